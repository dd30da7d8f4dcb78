//! Per-image rates over a directory, computed on a worker pool.
//!
//! `cargo run --release --example dataset_stats -- <dir> [jobs]`; without a
//! directory a few synthetic images are used.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shvc::ans::CodingMode;
use shvc::model::{Mode, ModelConfig, ShvcModel};
use shvc::stats::{aggregate_bpd, collect_images, compute_stats, STATS_HEADER};
use shvc::tensor::Tensor;

fn main() -> shvc::Result<()> {
    let mut args = std::env::args().skip(1);
    let images = match args.next() {
        Some(dir) => collect_images(dir.as_ref())?.images,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            (0..6)
                .map(|i| {
                    let noise = 1 << i;
                    (format!("synthetic{i}"), Tensor::from_fn(3, 16, 16, |c, y, x| (5 * x + 2 * y + 50 * c) as u8 ^ rng.gen_range(0..noise)))
                })
                .collect()
        }
    };
    let jobs = args.next().and_then(|j| j.parse().ok()).unwrap_or(2);

    let model = ShvcModel::seeded(&ModelConfig::lite(2, Mode::Arib))?;
    let rows = compute_stats(&images, &model, CodingMode::Arib, jobs, 0)?;
    println!("{STATS_HEADER}");
    for r in &rows {
        println!("{}", r.line());
    }
    println!("aggregate {:.4} bpd over {} images", aggregate_bpd(&rows), rows.len());
    Ok(())
}
