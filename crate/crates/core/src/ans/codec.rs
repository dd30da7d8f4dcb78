//! Image coding: runs a schedule against an [`AnsCoder`] using the tables
//! produced by a [`ShvcModel`].

use std::fmt;
use std::str::FromStr;

use super::coder::{AnsCoder, AuxSource, FLUSH_BITS};
use super::schedule::{arib_schedule, bitswap_schedule, decode_schedule, Action, Factor, Step};
use crate::dist::{mixture_pmf_vec, quantize_to_cdf, CdfTable, LogisticParams, MixtureParams, SymbolGrid, DEFAULT_PRECISION};
use crate::error::{Error, Result};
use crate::model::{level_grid, ContextD, Mode, ShvcModel};
use crate::tensor::{subpixel_shuffle_g_inv, subpixel_unshuffle_g, Tensor};

/// How a container's payload was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CodingMode {
    /// Bits-back with PRNG initial bits.
    Shvc,
    /// Autoregressive initial bits.
    Arib,
    /// Many images on one stack, each funding the next.
    Chained,
}

impl CodingMode {
    pub fn to_u8(self) -> u8 {
        match self {
            CodingMode::Shvc => 0,
            CodingMode::Arib => 1,
            CodingMode::Chained => 2,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(CodingMode::Shvc),
            1 => Ok(CodingMode::Arib),
            2 => Ok(CodingMode::Chained),
            _ => Err(Error::CorruptStream(format!("unknown coding mode {v}"))),
        }
    }
}

impl fmt::Display for CodingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodingMode::Shvc => "shvc",
            CodingMode::Arib => "arib",
            CodingMode::Chained => "chained",
        })
    }
}

impl FromStr for CodingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shvc" => Ok(CodingMode::Shvc),
            "arib" => Ok(CodingMode::Arib),
            "chained" => Ok(CodingMode::Chained),
            _ => Err(Error::InvalidConfig(format!("unknown mode {s:?} (expected shvc, arib or chained)"))),
        }
    }
}

/// Bit accounting for one coded image.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OverheadReport {
    /// Physical message size including the flushed state.
    pub total_bits: u64,
    /// `sum(-log2 mass)` over pushes minus the same over pops.
    pub model_bits: f64,
    pub aux_bits_consumed: u64,
    /// Aux bits a decoder hands back; at encode time this is what the
    /// decoder is entitled to, `measure_overhead` confirms it by decoding.
    pub aux_bits_returned: u64,
    /// `total_bits - aux_bits_returned`.
    pub net_bits: i64,
}

impl OverheadReport {
    fn new(total_bits: u64, model_bits: f64, consumed: u64, returned: u64) -> Self {
        Self {
            total_bits,
            model_bits,
            aux_bits_consumed: consumed,
            aux_bits_returned: returned,
            net_bits: total_bits as i64 - returned as i64,
        }
    }
}

/// Cost of one executed step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepCost {
    pub step: Step,
    /// `sum(-log2 mass)` of the coded symbols.
    pub bits: f64,
    pub symbols: usize,
}

/// Result of coding one image on its own stack.
#[derive(Clone, Debug)]
pub struct Encoded {
    /// Message in pop order, flushed state first.
    pub words: Vec<u32>,
    pub report: OverheadReport,
    pub steps: Vec<StepCost>,
    /// Coded latent symbols `z^(1)..z^(L)`, spatial layout.
    pub latents: Vec<Tensor<u16>>,
}

impl Encoded {
    pub fn symbol_count(&self) -> usize {
        self.steps.iter().map(|s| s.symbols).sum()
    }

    /// Realized `-log2 q` of the first latent pop.
    pub fn first_pop_bits(&self) -> f64 {
        self.steps.iter().find(|s| s.step.action == Action::Pop).map_or(0.0, |s| s.bits)
    }
}

#[derive(Clone, Debug)]
pub struct Decoded {
    pub image: Tensor<u8>,
    pub latents: Vec<Tensor<u16>>,
    /// Recovered initial bits, in the order they were drawn at encode time.
    pub returned_aux_words: Vec<u32>,
    pub steps: Vec<StepCost>,
}

impl Decoded {
    pub fn aux_bits_returned(&self) -> u64 {
        32 * self.returned_aux_words.len() as u64
    }
}

/// Every variable of one image, kept in sub-block (`g`) layout.
struct Workspace<'m> {
    model: &'m ShvcModel,
    symbols: Vec<Tensor<u16>>,
    values: Vec<Tensor<f32>>,
}

impl<'m> Workspace<'m> {
    fn new(model: &'m ShvcModel, height: usize, width: usize) -> Result<Self> {
        let cfg = model.config();
        let k = cfg.k;
        let dims = cfg.level_dims(height, width)?;
        let mut symbols = Vec::with_capacity(dims.len());
        let mut values = Vec::with_capacity(dims.len());
        for (level, &(h, w)) in dims.iter().enumerate() {
            let ch = cfg.level_channels(level) * k * k;
            symbols.push(Tensor::filled(ch, h / k, w / k, 0u16));
            values.push(Tensor::filled(ch, h / k, w / k, 0.0f32));
        }
        Ok(Self { model, symbols, values })
    }

    fn load(&mut self, level: usize, t: &Tensor<u16>) -> Result<()> {
        let g = subpixel_unshuffle_g(t, self.model.config().k)?;
        if g.shape() != self.symbols[level].shape() {
            return Err(Error::ShapeMismatch {
                expected: self.symbols[level].shape().to_vec(),
                found: g.shape().to_vec(),
            });
        }
        let grid = level_grid(level);
        self.values[level] = g.map(|s| grid.value(usize::from(s)) as f32);
        self.symbols[level] = g;
        Ok(())
    }

    fn set(&mut self, level: usize, index: usize, symbol: usize, grid: &SymbolGrid) {
        self.symbols[level].data_mut()[index] = symbol as u16;
        self.values[level].data_mut()[index] = grid.value(symbol) as f32;
    }

    fn channels(&self, level: usize) -> usize {
        self.model.config().level_channels(level)
    }

    fn spatial_values(&self, level: usize) -> Result<Tensor<f32>> {
        subpixel_shuffle_g_inv(&self.values[level], self.model.config().k, self.channels(level))
    }

    fn spatial_symbols(&self, level: usize) -> Result<Tensor<u16>> {
        subpixel_shuffle_g_inv(&self.symbols[level], self.model.config().k, self.channels(level))
    }

    fn context(&self, level: usize) -> Result<Option<ContextD>> {
        let cfg = self.model.config();
        if level < cfg.layers {
            Ok(Some(self.model.context_features(level + 1, &self.spatial_values(level + 1)?)?))
        } else {
            Ok(None)
        }
    }

    fn run(&mut self, coder: &mut AnsCoder, step: &Step) -> Result<StepCost> {
        let (bits, symbols) = match &step.factor {
            Factor::Posterior(l) => self.run_posterior(coder, step.action, *l)?,
            Factor::Prior { level, subblocks } => {
                self.run_prior(coder, step.action, *level, subblocks.clone())?
            }
        };
        Ok(StepCost { step: step.clone(), bits, symbols })
    }

    fn run_posterior(&mut self, coder: &mut AnsCoder, action: Action, layer: usize) -> Result<(f64, usize)> {
        let k = self.model.config().k;
        let q = self.model.posterior_params(layer, &self.spatial_values(layer - 1)?)?;
        let means = subpixel_unshuffle_g(&q.means, k)?;
        let log_scales = subpixel_unshuffle_g(&q.log_scales, k)?;
        let grid = level_grid(layer);
        let n = means.data().len();
        let mut bits = 0.0;
        match action {
            Action::Push => {
                for idx in (0..n).rev() {
                    let t = posterior_table(means.data()[idx], log_scales.data()[idx], &grid)?;
                    let s = usize::from(self.symbols[layer].data()[idx]);
                    bits += t.bits(s);
                    coder.push(s, &t);
                }
            }
            Action::Pop => {
                for idx in 0..n {
                    let t = posterior_table(means.data()[idx], log_scales.data()[idx], &grid)?;
                    let s = coder.pop(&t)?;
                    bits += t.bits(s);
                    self.set(layer, idx, s, &grid);
                }
            }
        }
        Ok((bits, n))
    }

    fn run_prior(
        &mut self,
        coder: &mut AnsCoder,
        action: Action,
        level: usize,
        subblocks: std::ops::Range<usize>,
    ) -> Result<(f64, usize)> {
        let cfg = self.model.config();
        let c = self.channels(level);
        let grid = level_grid(level);
        let needs_latent = subblocks.clone().any(|i| cfg.head_sees_latent(level, i));
        let latent = if needs_latent { self.context(level)? } else { None };
        let plain = ContextD::without_latent(level);
        let w = self.values[level].width();
        let sites = self.values[level].plane_len();
        let order: Vec<usize> = match action {
            Action::Push => subblocks.rev().collect(),
            Action::Pop => subblocks.collect(),
        };
        let mut bits = 0.0;
        let mut count = 0;
        let mut decoded = Vec::with_capacity(c);
        for i in order {
            let d = match &latent {
                Some(d) if cfg.head_sees_latent(level, i) => d,
                _ => &plain,
            };
            let params = self.model.prior_subblock_params(level, d, &self.values[level], i)?;
            let base = i * c * sites;
            let elements: Vec<(usize, usize)> = match action {
                Action::Push => (0..c).rev().flat_map(|ch| (0..sites).rev().map(move |s| (ch, s))).collect(),
                Action::Pop => (0..c).flat_map(|ch| (0..sites).map(move |s| (ch, s))).collect(),
            };
            for (ch, site) in elements {
                decoded.clear();
                decoded.extend((0..ch).map(|j| f64::from(self.values[level].data()[base + j * sites + site])));
                let t = params.table(ch, (site / w, site % w), &decoded, &grid)?;
                let idx = base + ch * sites + site;
                let s = match action {
                    Action::Push => {
                        let s = usize::from(self.symbols[level].data()[idx]);
                        coder.push(s, &t);
                        s
                    }
                    Action::Pop => {
                        let s = coder.pop(&t)?;
                        self.set(level, idx, s, &grid);
                        s
                    }
                };
                bits += t.bits(s);
                count += 1;
            }
        }
        Ok((bits, count))
    }
}

fn posterior_table(mean: f64, log_scale: f64, grid: &SymbolGrid) -> Result<CdfTable> {
    let pmf = mixture_pmf_vec(&MixtureParams::single(LogisticParams::new(mean, log_scale)), grid);
    quantize_to_cdf(&pmf, DEFAULT_PRECISION)
}

fn check_image(model: &ShvcModel, x: &Tensor<u8>) -> Result<()> {
    let cfg = model.config();
    if x.channels() != cfg.channels {
        return Err(Error::ChannelMismatch { expected: cfg.channels, found: x.channels() });
    }
    cfg.level_dims(x.height(), x.width()).map(|_| ())
}

/// The schedule used for one image in `mode`.
pub fn encode_plan(model: &ShvcModel, mode: CodingMode) -> Result<Vec<Step>> {
    let cfg = model.config();
    match mode {
        CodingMode::Shvc | CodingMode::Chained => Ok(bitswap_schedule(cfg.layers, cfg.num_subblocks())),
        CodingMode::Arib => {
            if cfg.mode != Mode::Arib {
                return Err(Error::InvalidConfig("ArIB coding needs a model built in ArIB mode".into()));
            }
            Ok(arib_schedule(cfg.layers, cfg.num_subblocks(), cfg.split))
        }
    }
}

/// Run `plan` for image `x` on top of whatever `coder` already holds.
pub fn encode_into(coder: &mut AnsCoder, x: &Tensor<u8>, model: &ShvcModel, plan: &[Step]) -> Result<(Vec<StepCost>, Vec<Tensor<u16>>)> {
    check_image(model, x)?;
    let mut ws = Workspace::new(model, x.height(), x.width())?;
    ws.load(0, &x.map(u16::from))?;
    let steps = plan.iter().map(|s| ws.run(coder, s)).collect::<Result<Vec<_>>>()?;
    let latents = (1..=model.config().layers).map(|l| ws.spatial_symbols(l)).collect::<Result<_>>()?;
    Ok((steps, latents))
}

fn encode_single(x: &Tensor<u8>, model: &ShvcModel, aux: AuxSource, mode: CodingMode) -> Result<Encoded> {
    let plan = encode_plan(model, mode)?;
    let mut coder = AnsCoder::new(aux)?;
    let (steps, latents) = encode_into(&mut coder, x, model, &plan)?;
    let model_bits = signed_bits(&steps);
    let consumed = coder.aux_bits_consumed();
    Ok(Encoded {
        words: coder.to_words(),
        report: OverheadReport::new(coder.total_bits(), model_bits, consumed, consumed),
        steps,
        latents,
    })
}

fn signed_bits(steps: &[StepCost]) -> f64 {
    steps
        .iter()
        .map(|s| match s.step.action {
            Action::Push => s.bits,
            Action::Pop => -s.bits,
        })
        .sum()
}

/// Bits-back coding of one image; initial bits come from `aux`.
pub fn encode_image_shvc(x: &Tensor<u8>, model: &ShvcModel, aux: AuxSource) -> Result<Encoded> {
    if matches!(aux, AuxSource::None) {
        return Err(Error::InvalidConfig("bits-back coding needs an auxiliary source".into()));
    }
    encode_single(x, model, aux, CodingMode::Shvc)
}

/// ArIB coding of one image. `padding_seed` only feeds the state seed and
/// any shortfall of the first posterior pop.
pub fn encode_image_arib(x: &Tensor<u8>, model: &ShvcModel, padding_seed: u64) -> Result<Encoded> {
    encode_single(x, model, AuxSource::prng(padding_seed), CodingMode::Arib)
}

/// Step-by-step decoder for one image.
pub struct ImageDecoder<'m> {
    ws: Workspace<'m>,
    plan: Vec<Step>,
    next: usize,
}

impl<'m> ImageDecoder<'m> {
    /// `mode` names the schedule the image was encoded with.
    pub fn new(model: &'m ShvcModel, height: usize, width: usize, mode: CodingMode) -> Result<Self> {
        let plan = decode_schedule(&encode_plan(model, mode)?);
        Ok(Self { ws: Workspace::new(model, height, width)?, plan, next: 0 })
    }

    pub fn plan(&self) -> &[Step] {
        &self.plan
    }

    /// Execute the next step; `None` once the plan is exhausted.
    pub fn step(&mut self, coder: &mut AnsCoder) -> Result<Option<StepCost>> {
        let Some(step) = self.plan.get(self.next).cloned() else {
            return Ok(None);
        };
        self.next += 1;
        self.ws.run(coder, &step).map(Some)
    }

    pub fn run(&mut self, coder: &mut AnsCoder) -> Result<Vec<StepCost>> {
        let mut out = Vec::new();
        while let Some(c) = self.step(coder)? {
            out.push(c);
        }
        Ok(out)
    }

    /// Current symbols of the variable at `level` (undecoded entries are 0).
    pub fn symbols(&self, level: usize) -> Result<Tensor<u16>> {
        self.ws.spatial_symbols(level)
    }

    pub fn image(&self) -> Result<Tensor<u8>> {
        Ok(self.symbols(0)?.map(|s| s as u8))
    }

    pub fn latents(&self) -> Result<Vec<Tensor<u16>>> {
        (1..=self.ws.model.config().layers).map(|l| self.symbols(l)).collect()
    }
}

fn decode_single(words: &[u32], model: &ShvcModel, height: usize, width: usize, mode: CodingMode) -> Result<Decoded> {
    let mut coder = AnsCoder::from_words(words)?;
    let mut dec = ImageDecoder::new(model, height, width, mode)?;
    let steps = dec.run(&mut coder)?;
    Ok(Decoded {
        image: dec.image()?,
        latents: dec.latents()?,
        returned_aux_words: coder.returned_aux_words()?,
        steps,
    })
}

pub fn decode_image_shvc(words: &[u32], model: &ShvcModel, height: usize, width: usize) -> Result<Decoded> {
    decode_single(words, model, height, width, CodingMode::Shvc)
}

pub fn decode_image_arib(words: &[u32], model: &ShvcModel, height: usize, width: usize) -> Result<Decoded> {
    decode_single(words, model, height, width, CodingMode::Arib)
}

/// Encode and decode `x`, reporting what the decoder actually returned.
pub fn measure_overhead(x: &Tensor<u8>, model: &ShvcModel, mode: CodingMode, seed: u64) -> Result<OverheadReport> {
    let mode = if mode == CodingMode::Chained { CodingMode::Shvc } else { mode };
    let enc = encode_single(x, model, AuxSource::prng(seed), mode)?;
    let dec = decode_single(&enc.words, model, x.height(), x.width(), mode)?;
    if dec.image != *x {
        return Err(Error::CorruptStream("round trip changed the image".into()));
    }
    let r = &enc.report;
    Ok(OverheadReport::new(r.total_bits, r.model_bits, r.aux_bits_consumed, dec.aux_bits_returned()))
}

/// `-log2 p(x | z) - log2 p(z) + log2 q(z | x)` evaluated directly from the
/// model's quantized tables at the given latents, independently of any
/// schedule or coder.
pub fn codelength_oracle(model: &ShvcModel, x: &Tensor<u8>, latents: &[Tensor<u16>]) -> Result<f64> {
    check_image(model, x)?;
    let cfg = model.config();
    if latents.len() != cfg.layers {
        return Err(Error::InvalidConfig(format!("expected {} latents, got {}", cfg.layers, latents.len())));
    }
    let k = cfg.k;
    let mut symbols = vec![x.map(u16::from)];
    symbols.extend(latents.iter().cloned());
    let values: Vec<Tensor<f32>> = symbols
        .iter()
        .enumerate()
        .map(|(l, s)| {
            let grid = level_grid(l);
            s.map(|v| grid.value(usize::from(v)) as f32)
        })
        .collect();

    let mut q_bits = 0.0;
    for l in 1..=cfg.layers {
        let q = model.posterior_params(l, &values[l - 1])?;
        let grid = level_grid(l);
        for (idx, &s) in symbols[l].data().iter().enumerate() {
            let t = posterior_table(q.means.data()[idx], q.log_scales.data()[idx], &grid)?;
            q_bits += t.bits(usize::from(s));
        }
    }

    let mut p_bits = 0.0;
    for level in 0..=cfg.layers {
        let c = cfg.level_channels(level);
        let grid = level_grid(level);
        let g_vals = subpixel_unshuffle_g(&values[level], k)?;
        let g_syms = subpixel_unshuffle_g(&symbols[level], k)?;
        let ctx = if level < cfg.layers { Some(model.context_features(level + 1, &values[level + 1])?) } else { None };
        let (h, w) = (g_vals.height(), g_vals.width());
        for i in 0..cfg.num_subblocks() {
            let d = match &ctx {
                Some(d) if cfg.head_sees_latent(level, i) => d.clone(),
                _ => ContextD::without_latent(level),
            };
            let params = model.prior_subblock_params(level, &d, &g_vals, i)?;
            for ch in 0..c {
                for y in 0..h {
                    for xx in 0..w {
                        let decoded: Vec<f64> = (0..ch).map(|j| f64::from(g_vals.get(i * c + j, y, xx))).collect();
                        let t = params.table(ch, (y, xx), &decoded, &grid)?;
                        p_bits += t.bits(usize::from(g_syms.get(i * c + ch, y, xx)));
                    }
                }
            }
        }
    }
    Ok(p_bits - q_bits)
}

/// Several images coded onto one stack; each image's pops draw on the bits
/// pushed for the images before it.
#[derive(Clone, Debug)]
pub struct ChainedEncoded {
    pub words: Vec<u32>,
    /// `(height, width)` per image, in encode order.
    pub dims: Vec<(usize, usize)>,
    /// Per-image accounting; `total_bits` counts the words the image added.
    pub reports: Vec<OverheadReport>,
    pub report: OverheadReport,
}

impl ChainedEncoded {
    /// Bits charged once for the whole chain, on top of the per-image nets.
    pub const FLUSH_BITS: u64 = FLUSH_BITS;
}

pub fn encode_dataset_chained(images: &[Tensor<u8>], model: &ShvcModel, seed: u64) -> Result<ChainedEncoded> {
    let plan = encode_plan(model, CodingMode::Chained)?;
    let mut coder = AnsCoder::new(AuxSource::prng(seed))?;
    let mut reports = Vec::with_capacity(images.len());
    let mut model_total = 0.0;
    for x in images {
        let (len0, aux0) = (coder.stack().len(), coder.aux_bits_consumed());
        let aux0 = if reports.is_empty() { 0 } else { aux0 };
        let (steps, _) = encode_into(&mut coder, x, model, &plan)?;
        let model_bits = signed_bits(&steps);
        model_total += model_bits;
        let bits = 32 * (coder.stack().len() as i64 - len0 as i64);
        let consumed = coder.aux_bits_consumed() - aux0;
        reports.push(OverheadReport {
            total_bits: bits.max(0) as u64,
            model_bits,
            aux_bits_consumed: consumed,
            aux_bits_returned: consumed,
            net_bits: bits - consumed as i64,
        });
    }
    let consumed = coder.aux_bits_consumed();
    Ok(ChainedEncoded {
        words: coder.to_words(),
        dims: images.iter().map(|x| (x.height(), x.width())).collect(),
        reports,
        report: OverheadReport::new(coder.total_bits(), model_total, consumed, consumed),
    })
}

/// Decodes a chain last image first.
pub struct ChainedDecoder<'m> {
    model: &'m ShvcModel,
    coder: AnsCoder,
    dims: Vec<(usize, usize)>,
    remaining: usize,
}

impl<'m> ChainedDecoder<'m> {
    pub fn new(model: &'m ShvcModel, words: &[u32], dims: Vec<(usize, usize)>) -> Result<Self> {
        let remaining = dims.len();
        Ok(Self { model, coder: AnsCoder::from_words(words)?, dims, remaining })
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Index of the only image that can be decoded now.
    pub fn next_index(&self) -> Option<usize> {
        self.remaining.checked_sub(1)
    }

    pub fn decode(&mut self, index: usize) -> Result<Tensor<u8>> {
        let next = self.next_index().ok_or(Error::ChainOrder { requested: index, next: usize::MAX })?;
        if index != next {
            return Err(Error::ChainOrder { requested: index, next });
        }
        let (h, w) = self.dims[index];
        let mut dec = ImageDecoder::new(self.model, h, w, CodingMode::Chained)?;
        dec.run(&mut self.coder)?;
        self.remaining -= 1;
        dec.image()
    }

    /// Every image, in encode order.
    pub fn decode_all(mut self) -> Result<(Vec<Tensor<u8>>, Vec<u32>)> {
        let mut out = Vec::with_capacity(self.len());
        while let Some(j) = self.next_index() {
            out.push(self.decode(j)?);
        }
        out.reverse();
        Ok((out, self.coder.returned_aux_words()?))
    }
}
