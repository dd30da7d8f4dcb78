use std::sync::atomic::{AtomicUsize, Ordering};

use super::config::{Mode, ModelConfig};
use super::nn::ConvNet;
use super::weights::{self, ModelWeights};
use crate::dist::{mixture_pmf_vec, quantize_to_cdf, CdfTable, LogisticParams, MixtureParams, SymbolGrid, DEFAULT_PRECISION};
use crate::error::{Error, Result};
use crate::tensor::{pixel_unshuffle_f, repeat_upsample, subpixel_unshuffle_g, Tensor};

/// Network outputs are snapped to this grid before they reach a pmf, so the
/// quantized tables do not depend on the last bits of float arithmetic.
pub const PARAM_GRID: f64 = 1e-4;

#[inline]
pub fn snap(v: f32) -> f64 {
    (f64::from(v) / PARAM_GRID).round() * PARAM_GRID
}

/// Coding grid of the variable at `level`.
pub fn level_grid(level: usize) -> SymbolGrid {
    if level == 0 {
        SymbolGrid::pixels()
    } else {
        SymbolGrid::latents()
    }
}

/// Move a tensor from resolution `H / from` to `H / to` by space-to-depth or
/// nearest-neighbour repetition.
fn resample(t: &Tensor<f32>, from: usize, to: usize) -> Result<Tensor<f32>> {
    if to > from {
        pixel_unshuffle_f(t, to / from)
    } else if from > to {
        Ok(repeat_upsample(t, from / to))
    } else {
        Ok(t.clone())
    }
}

/// Per-element logistic parameters of a fully factorised posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticField {
    pub means: Tensor<f64>,
    pub log_scales: Tensor<f64>,
}

impl LogisticField {
    pub fn shape(&self) -> [usize; 3] {
        self.means.shape()
    }

    pub fn get(&self, c: usize, h: usize, w: usize) -> LogisticParams {
        LogisticParams::new(self.means.get(c, h, w), self.log_scales.get(c, h, w))
    }
}

/// Decoded context `D` for the variable at `level`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextD {
    pub level: usize,
    pub features: Option<Tensor<f32>>,
}

impl ContextD {
    /// Context that carries no latent information.
    pub fn without_latent(level: usize) -> Self {
        Self { level, features: None }
    }

    pub fn has_latent(&self) -> bool {
        self.features.is_some()
    }
}

/// Weak autoregression parameters for one sub-block.
///
/// Stored as the snapped network output, `[channel layout, h, w]`, where the
/// block of channel `c` is `alpha, beta_0..beta_{c-1}, mean offsets (M),
/// log-scales (M), logits (M)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakArParams {
    channels: usize,
    mixtures: usize,
    values: Tensor<f64>,
}

impl WeakArParams {
    pub fn new(channels: usize, mixtures: usize, values: Tensor<f64>) -> Result<Self> {
        let expected = channels * (1 + 3 * mixtures) + channels * (channels.saturating_sub(1)) / 2;
        if values.channels() != expected {
            return Err(Error::ChannelMismatch { expected, found: values.channels() });
        }
        Ok(Self { channels, mixtures, values })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn mixtures(&self) -> usize {
        self.mixtures
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn raw(&self) -> &Tensor<f64> {
        &self.values
    }

    fn block(&self, c: usize) -> usize {
        (0..c).map(|j| 1 + j + 3 * self.mixtures).sum()
    }

    #[inline]
    fn at(&self, ch: usize, site: (usize, usize)) -> f64 {
        self.values.get(ch, site.0, site.1)
    }

    pub fn alpha(&self, c: usize, site: (usize, usize)) -> f64 {
        self.at(self.block(c), site)
    }

    /// Coefficients `beta_c^(0..c)` at a site.
    pub fn betas(&self, c: usize, site: (usize, usize)) -> Vec<f64> {
        let b = self.block(c) + 1;
        (0..c).map(|i| self.at(b + i, site)).collect()
    }

    /// Mixture for channel `c` at `site`, with every component mean shifted by
    /// the linear channel dependency on `decoded` (channels `0..c`).
    pub fn mixture(&self, c: usize, site: (usize, usize), decoded: &[f64]) -> MixtureParams {
        let shift = weak_ar_mean(self, decoded, c, site);
        let m = self.mixtures;
        let base = self.block(c) + 1 + c;
        let components = (0..m)
            .map(|j| LogisticParams::new(self.at(base + j, site) + shift, self.at(base + m + j, site)))
            .collect();
        let logits = (0..m).map(|j| self.at(base + 2 * m + j, site)).collect();
        MixtureParams { components, logits }
    }

    /// Quantized coding table of channel `c` at `site`.
    pub fn table(&self, c: usize, site: (usize, usize), decoded: &[f64], grid: &SymbolGrid) -> Result<CdfTable> {
        quantize_to_cdf(&mixture_pmf_vec(&self.mixture(c, site, decoded), grid), DEFAULT_PRECISION)
    }
}

/// `alpha + sum_i beta^(i) * decoded_i` for channel `c`.
pub fn weak_ar_mean(p: &WeakArParams, decoded: &[f64], c: usize, site: (usize, usize)) -> f64 {
    let b = p.block(c);
    let mut mu = p.at(b, site);
    for (i, &v) in decoded.iter().take(c).enumerate() {
        mu += p.at(b + 1 + i, site) * v;
    }
    mu
}

/// Inference-only SHVC model.
#[derive(Debug)]
pub struct ShvcModel {
    config: ModelConfig,
    hash: u64,
    posteriors: Vec<ConvNet>,
    contexts: Vec<ConvNet>,
    /// `heads[level][i]`; `None` for the learnable top slice.
    heads: Vec<Vec<Option<ConvNet>>>,
    top: Vec<f32>,
    prior_evals: AtomicUsize,
}

impl ShvcModel {
    pub fn new(weights: &ModelWeights) -> Result<Self> {
        weights.validate()?;
        let config = weights.config.clone();
        let kk = config.num_subblocks();
        let posteriors = (1..=config.layers)
            .map(|l| weights.network(&weights::posterior_name(l)))
            .collect::<Result<_>>()?;
        let contexts = (1..=config.layers)
            .map(|l| weights.network(&weights::context_name(l)))
            .collect::<Result<_>>()?;
        let mut heads = Vec::with_capacity(config.layers + 1);
        for level in 0..=config.layers {
            let mut row = Vec::with_capacity(kk);
            for i in 0..kk {
                if level == config.layers && i == 0 {
                    row.push(None);
                } else {
                    row.push(Some(weights.network(&weights::head_name(level, i))?));
                }
            }
            heads.push(row);
        }
        let top = weights
            .get(&weights::top_name(config.layers))
            .ok_or_else(|| Error::WeightFormat("missing top prior".into()))?
            .data
            .clone();
        Ok(Self {
            hash: weights.hash(),
            config,
            posteriors,
            contexts,
            heads,
            top,
            prior_evals: AtomicUsize::new(0),
        })
    }

    /// Model with seeded weights for `config`.
    pub fn seeded(config: &ModelConfig) -> Result<Self> {
        Self::new(&ModelWeights::init_seeded(config)?)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// FNV-1a hash of the serialized weights this model was built from.
    pub fn weights_hash(&self) -> u64 {
        self.hash
    }

    /// Prior head evaluations since construction (the top slice is not a
    /// network and is not counted).
    pub fn prior_evaluations(&self) -> usize {
        self.prior_evals.load(Ordering::Relaxed)
    }

    /// Parameters of `q(z^(layer) | input)`.
    ///
    /// For `layer == 1` the input is the image in value units; in ArIB mode
    /// only its first `split` sub-blocks reach the network. For deeper layers
    /// the input is `z^(layer-1)`.
    pub fn posterior_params(&self, layer: usize, input: &Tensor<f32>) -> Result<LogisticField> {
        let cfg = &self.config;
        if !(1..=cfg.layers).contains(&layer) {
            return Err(Error::IndexOutOfRange { index: layer, limit: cfg.layers + 1 });
        }
        let in_c = cfg.level_channels(layer - 1);
        if input.channels() != in_c {
            return Err(Error::ChannelMismatch { expected: in_c, found: input.channels() });
        }
        let d = cfg.downsample[layer - 1];
        let net_input = if layer == 1 {
            let mut g = subpixel_unshuffle_g(input, cfg.k)?;
            if cfg.mode == Mode::Arib {
                let n = g.plane_len();
                g.data_mut()[cfg.split * in_c * n..].fill(0.0);
            }
            resample(&g, cfg.k, d)?
        } else {
            resample(input, 1, d)?
        };
        let out = self.posteriors[layer - 1].forward(&net_input)?;
        let c = cfg.level_channels(layer);
        let (h, w) = (out.height(), out.width());
        if h * d != input.height() || w * d != input.width() {
            return Err(Error::ShapeMismatch {
                expected: vec![c, input.height() / d, input.width() / d],
                found: vec![c, h, w],
            });
        }
        let snapped = out.map(snap);
        let n = snapped.plane_len();
        let means = Tensor::from_vec(c, h, w, snapped.data()[..c * n].to_vec())?;
        let log_scales = Tensor::from_vec(c, h, w, snapped.data()[c * n..].to_vec())?;
        Ok(LogisticField { means, log_scales })
    }

    /// Features of `z^(layer)` at the sub-block resolution of level `layer - 1`.
    pub fn context_features(&self, layer: usize, conditioning: &Tensor<f32>) -> Result<ContextD> {
        let cfg = &self.config;
        if !(1..=cfg.layers).contains(&layer) {
            return Err(Error::IndexOutOfRange { index: layer, limit: cfg.layers + 1 });
        }
        let c = cfg.level_channels(layer);
        if conditioning.channels() != c {
            return Err(Error::ChannelMismatch { expected: c, found: conditioning.channels() });
        }
        let input = resample(conditioning, cfg.downsample[layer - 1], cfg.k)?;
        let features = self.contexts[layer - 1].forward(&input)?;
        Ok(ContextD { level: layer - 1, features: Some(features) })
    }

    /// One strong-autoregression step: parameters of sub-block `i` of the
    /// variable at `level` given context `d` and the already decoded
    /// sub-blocks in `prefix` (the `g`-ordered variable in value units;
    /// channels from sub-block `i` on are ignored).
    pub fn prior_subblock_params(
        &self,
        level: usize,
        d: &ContextD,
        prefix: &Tensor<f32>,
        i: usize,
    ) -> Result<WeakArParams> {
        let cfg = &self.config;
        let kk = cfg.num_subblocks();
        if level > cfg.layers {
            return Err(Error::IndexOutOfRange { index: level, limit: cfg.layers + 1 });
        }
        if i >= kk {
            return Err(Error::IndexOutOfRange { index: i, limit: kk });
        }
        let c = cfg.level_channels(level);
        let m = cfg.level_mixtures(level);
        if prefix.channels() != c * kk {
            return Err(Error::ChannelMismatch { expected: c * kk, found: prefix.channels() });
        }
        let wants_latent = cfg.head_sees_latent(level, i);
        if d.has_latent() && !wants_latent {
            if level == 0 {
                return Err(Error::CausalityViolation { subblock: i, split: cfg.split });
            }
            return Err(Error::InvalidConfig(format!("prior of level {level} takes no latent context")));
        }
        if !d.has_latent() && wants_latent {
            return Err(Error::InvalidConfig(format!(
                "sub-block {i} of level {level} needs latent context"
            )));
        }
        let (h, w) = (prefix.height(), prefix.width());

        let Some(net) = &self.heads[level][i] else {
            let values = Tensor::from_fn(self.top.len(), h, w, |ch, _, _| snap(self.top[ch]));
            return WeakArParams::new(c, m, values);
        };

        let n = prefix.plane_len();
        let mut masked = prefix.clone();
        masked.data_mut()[i * c * n..].fill(0.0);
        let input = match &d.features {
            Some(f) => {
                if f.height() != h || f.width() != w {
                    return Err(Error::ShapeMismatch {
                        expected: vec![f.channels(), h, w],
                        found: f.shape().to_vec(),
                    });
                }
                Tensor::concat_channels(&[f.view(), masked.view()])?
            }
            None => masked,
        };
        self.prior_evals.fetch_add(1, Ordering::Relaxed);
        let out = net.forward(&input)?;
        WeakArParams::new(c, m, out.map(snap))
    }
}
