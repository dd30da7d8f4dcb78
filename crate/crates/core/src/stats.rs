//! Per-image rate statistics over a directory, optionally in parallel.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::ans::{encode_dataset_chained, measure_overhead, CodingMode, OverheadReport};
use crate::error::{Error, Result};
use crate::image::{load_image, pad_replicate};
use crate::model::{fnv1a64, ShvcModel};
use crate::tensor::Tensor;

/// Header of the machine-readable stats line.
pub const STATS_HEADER: &str = "file,bpd,net_bits,aux_in,aux_out";

#[derive(Clone, Debug, PartialEq)]
pub struct ImageStats {
    pub file: String,
    /// `C * H * W` of the original, unpadded image.
    pub dims: usize,
    pub report: OverheadReport,
}

impl ImageStats {
    pub fn bpd(&self) -> f64 {
        self.report.net_bits as f64 / self.dims as f64
    }

    /// `file,bpd,net_bits,aux_in,aux_out`
    pub fn line(&self) -> String {
        format!(
            "{},{:.6},{},{},{}",
            self.file,
            self.bpd(),
            self.report.net_bits,
            self.report.aux_bits_consumed,
            self.report.aux_bits_returned
        )
    }
}

/// Net bits over all images divided by their total dimension count, i.e.
/// the pixel-weighted mean of the per-image BPD.
pub fn aggregate_bpd(rows: &[ImageStats]) -> f64 {
    let bits: i64 = rows.iter().map(|r| r.report.net_bits).sum();
    let dims: usize = rows.iter().map(|r| r.dims).sum();
    if dims == 0 {
        0.0
    } else {
        bits as f64 / dims as f64
    }
}

/// Images found in a directory, sorted by file name.
pub struct ImageSet {
    pub images: Vec<(String, Tensor<u8>)>,
    /// Files that could not be read as images.
    pub skipped: Vec<(String, Error)>,
}

/// Read every regular file in `dir` except `.dims` sidecars.
pub fn collect_images(dir: &Path) -> Result<ImageSet> {
    let mut names: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.path())
        .filter(|p| p.extension().is_none_or(|e| e != "dims"))
        .collect();
    names.sort();
    let mut images = Vec::new();
    let mut skipped = Vec::new();
    for path in names {
        let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        match load_image(&path) {
            Ok(t) => images.push((name, t)),
            Err(e) => skipped.push((name, e)),
        }
    }
    Ok(ImageSet { images, skipped })
}

/// Aux seed for one file, independent of processing order.
pub fn file_seed(seed: u64, name: &str) -> u64 {
    seed ^ fnv1a64(name.as_bytes())
}

/// Code every image and report its rate. With `jobs > 1` images are coded
/// concurrently; results do not depend on `jobs`. Chained mode is
/// sequential by nature and ignores `jobs`.
pub fn compute_stats(
    images: &[(String, Tensor<u8>)],
    model: &ShvcModel,
    mode: CodingMode,
    jobs: usize,
    seed: u64,
) -> Result<Vec<ImageStats>> {
    let multiple = model.config().required_multiple();
    if mode == CodingMode::Chained {
        let padded: Vec<_> = images.iter().map(|(_, x)| pad_replicate(x, multiple)).collect();
        let enc = encode_dataset_chained(&padded, model, seed)?;
        return Ok(images
            .iter()
            .zip(enc.reports)
            .map(|((name, x), report)| ImageStats { file: name.clone(), dims: x.data().len(), report })
            .collect());
    }
    let one = |(name, x): &(String, Tensor<u8>)| -> Result<ImageStats> {
        let report = measure_overhead(&pad_replicate(x, multiple), model, mode, file_seed(seed, name))?;
        Ok(ImageStats { file: name.clone(), dims: x.data().len(), report })
    };
    if jobs <= 1 {
        return images.iter().map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| images.par_iter().map(one).collect())
}
