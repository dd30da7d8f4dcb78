//! Golden vectors: recorded network inputs and outputs that a second
//! implementation of the model (or a trainer export) must reproduce.
//!
//! The file reuses the weight record layout behind its own magic:
//!
//! ```text
//! "SHVG" | version u8 = 1 | config block | records
//! ```
//!
//! Records come in groups sharing a stem (`posterior.1`, `context.2`,
//! `prior.0.head.3`, ...) with `.input`, optional `.context`, `.output` and,
//! for prior heads, `.table` holding the quantized frequencies of the first
//! element.

use super::config::ModelConfig;
use super::forward::{level_grid, ContextD, ShvcModel};
use super::weights::{self, read_config, read_records, write_config, write_records, Reader, WeightRecord};
use crate::error::{Error, Result};
use crate::tensor::{subpixel_unshuffle_g, Tensor};

pub const GOLDEN_MAGIC: &[u8; 4] = b"SHVG";
pub const GOLDEN_VERSION: u8 = 1;
/// Relative tolerance for recorded float outputs.
pub const GOLDEN_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct GoldenVectors {
    pub config: ModelConfig,
    pub records: Vec<WeightRecord>,
}

/// Outcome of [`GoldenVectors::verify`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GoldenReport {
    pub outputs_checked: usize,
    pub tables_checked: usize,
    pub max_relative_error: f64,
    /// Stems whose output or table disagreed.
    pub failures: Vec<String>,
}

impl GoldenReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn record(name: String, t: &Tensor<f32>) -> WeightRecord {
    WeightRecord { name, shape: t.shape().to_vec(), data: t.data().to_vec() }
}

fn tensor(rec: &WeightRecord) -> Result<Tensor<f32>> {
    if rec.shape.len() != 3 {
        return Err(Error::WeightFormat(format!("golden record {} is not rank 3", rec.name)));
    }
    Tensor::from_vec(rec.shape[0], rec.shape[1], rec.shape[2], rec.data.clone())
}

fn to_f32(t: &Tensor<f64>) -> Tensor<f32> {
    t.map(|v| v as f32)
}

/// Snap continuous values onto the coding grid of `level`.
fn snap_to_grid(t: &Tensor<f64>, level: usize) -> Tensor<f32> {
    let grid = level_grid(level);
    t.map(|v| grid.value(grid.nearest(v)) as f32)
}

impl GoldenVectors {
    /// Record every network of `model` on a deterministic pass over `image`
    /// (values in `[-1, 1]`), using posterior means as latents.
    pub fn generate(model: &ShvcModel, image: &Tensor<f32>) -> Result<Self> {
        let cfg = model.config().clone();
        let k = cfg.k;
        let kk = cfg.num_subblocks();
        let mut records = Vec::new();
        let mut vars = vec![image.clone()];
        for l in 1..=cfg.layers {
            let q = model.posterior_params(l, &vars[l - 1])?;
            let out = Tensor::concat_channels(&[to_f32(&q.means).view(), to_f32(&q.log_scales).view()])?;
            records.push(record(format!("{}.input", weights::posterior_name(l)), &vars[l - 1]));
            records.push(record(format!("{}.output", weights::posterior_name(l)), &out));
            vars.push(snap_to_grid(&q.means, l));
        }
        for l in 1..=cfg.layers {
            let d = model.context_features(l, &vars[l])?;
            let stem = weights::context_name(l);
            records.push(record(format!("{stem}.input"), &vars[l]));
            records.push(record(format!("{stem}.output"), d.features.as_ref().expect("latent context")));
        }
        for level in 0..=cfg.layers {
            let prefix = subpixel_unshuffle_g(&vars[level], k)?;
            let latent = if level < cfg.layers { Some(model.context_features(level + 1, &vars[level + 1])?) } else { None };
            for i in 0..kk {
                let d = match &latent {
                    Some(d) if cfg.head_sees_latent(level, i) => d.clone(),
                    _ => ContextD::without_latent(level),
                };
                let p = model.prior_subblock_params(level, &d, &prefix, i)?;
                let stem = weights::head_name(level, i);
                records.push(record(format!("{stem}.input"), &prefix));
                if let Some(f) = &d.features {
                    records.push(record(format!("{stem}.context"), f));
                }
                records.push(record(format!("{stem}.output"), &to_f32(p.raw())));
                let table = p.table(0, (0, 0), &[], &level_grid(level))?;
                let freqs = table.freqs().iter().map(|&f| f as f32).collect::<Vec<_>>();
                records.push(WeightRecord { name: format!("{stem}.table"), shape: vec![freqs.len()], data: freqs });
            }
        }
        Ok(Self { config: cfg, records })
    }

    pub fn get(&self, name: &str) -> Option<&WeightRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    /// Recompute every recorded output from its recorded inputs.
    pub fn verify(&self, model: &ShvcModel) -> Result<GoldenReport> {
        if *model.config() != self.config {
            return Err(Error::InvalidConfig("golden vectors were recorded for another configuration".into()));
        }
        let cfg = &self.config;
        let need = |name: String| self.get(&name).ok_or(Error::WeightFormat(format!("missing golden record {name}")));
        let mut report = GoldenReport::default();
        let compare = |stem: &str, got: &Tensor<f32>, want: &WeightRecord, report: &mut GoldenReport| {
            report.outputs_checked += 1;
            if got.shape().as_slice() != want.shape.as_slice() {
                report.failures.push(stem.to_owned());
                return;
            }
            let mut worst = 0.0f64;
            for (&a, &b) in got.data().iter().zip(&want.data) {
                let (a, b) = (f64::from(a), f64::from(b));
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
            }
            report.max_relative_error = report.max_relative_error.max(worst);
            if worst > GOLDEN_TOLERANCE {
                report.failures.push(stem.to_owned());
            }
        };

        for l in 1..=cfg.layers {
            let stem = weights::posterior_name(l);
            let input = tensor(need(format!("{stem}.input"))?)?;
            let q = model.posterior_params(l, &input)?;
            let got = Tensor::concat_channels(&[to_f32(&q.means).view(), to_f32(&q.log_scales).view()])?;
            compare(&stem, &got, need(format!("{stem}.output"))?, &mut report);

            let stem = weights::context_name(l);
            let input = tensor(need(format!("{stem}.input"))?)?;
            let d = model.context_features(l, &input)?;
            compare(&stem, d.features.as_ref().expect("latent context"), need(format!("{stem}.output"))?, &mut report);
        }
        for level in 0..=cfg.layers {
            for i in 0..cfg.num_subblocks() {
                let stem = weights::head_name(level, i);
                let prefix = tensor(need(format!("{stem}.input"))?)?;
                let d = match self.get(&format!("{stem}.context")) {
                    Some(rec) => ContextD { level, features: Some(tensor(rec)?) },
                    None => ContextD::without_latent(level),
                };
                let p = model.prior_subblock_params(level, &d, &prefix, i)?;
                compare(&stem, &to_f32(p.raw()), need(format!("{stem}.output"))?, &mut report);
                let table = p.table(0, (0, 0), &[], &level_grid(level))?;
                let want = need(format!("{stem}.table"))?;
                report.tables_checked += 1;
                let same = table.freqs().len() == want.data.len()
                    && table.freqs().iter().zip(&want.data).all(|(&a, &b)| a as f32 == b);
                if !same {
                    report.failures.push(format!("{stem}.table"));
                }
            }
        }
        Ok(report)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(GOLDEN_MAGIC);
        out.push(GOLDEN_VERSION);
        write_config(&mut out, &self.config);
        write_records(&mut out, &self.records);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != GOLDEN_MAGIC {
            return Err(Error::BadMagic);
        }
        let version = r.u8()?;
        if version != GOLDEN_VERSION {
            return Err(Error::BadVersion(version));
        }
        let config = read_config(&mut r)?;
        let records = read_records(&mut r)?;
        if !r.is_empty() {
            return Err(Error::WeightFormat(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Self { config, records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Mode, ModelWeights};

    fn setup(mode: Mode) -> (ModelWeights, Tensor<f32>) {
        let mut c = ModelConfig::lite(2, mode).with_seed(5);
        c.widths = vec![6, 5, 4];
        let w = ModelWeights::init_seeded(&c).unwrap();
        let x = Tensor::from_fn(3, 8, 8, |c, h, w| ((c * 31 + h * 7 + w * 3) % 256) as f32 / 127.5 - 1.0);
        (w, x)
    }

    #[test]
    fn self_verification_passes() {
        for mode in [Mode::Shvc, Mode::Arib] {
            let (w, x) = setup(mode);
            let model = ShvcModel::new(&w).unwrap();
            let g = GoldenVectors::generate(&model, &x).unwrap();
            let back = GoldenVectors::from_bytes(&g.to_bytes()).unwrap();
            assert_eq!(back, g);
            let report = back.verify(&model).unwrap();
            assert!(report.passed(), "{:?}", report.failures);
            assert_eq!(report.tables_checked, 3 * 4);
            assert_eq!(report.max_relative_error, 0.0);
        }
    }

    #[test]
    fn perturbed_weights_are_detected() {
        let (mut w, x) = setup(Mode::Shvc);
        let g = GoldenVectors::generate(&ShvcModel::new(&w).unwrap(), &x).unwrap();
        let rec = w.get_mut("prior.0.head.1.conv3.bias").unwrap();
        rec.data[0] += 0.5;
        let report = g.verify(&ShvcModel::new(&w).unwrap()).unwrap();
        assert!(report.failures.iter().any(|f| f.starts_with("prior.0.head.1")));
        assert!(!report.failures.iter().any(|f| f.starts_with("posterior")));
    }

    #[test]
    fn rejects_weight_magic() {
        let (w, _) = setup(Mode::Shvc);
        assert!(matches!(GoldenVectors::from_bytes(&w.to_bytes()), Err(Error::BadMagic)));
    }
}
