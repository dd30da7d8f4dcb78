//! Portable weight container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "SHVW" | version u8 = 1
//! config: L u8 | k u8 | C u16 | split u16 | mode u8 | M u8
//!         widths u16 x (L+1) | latent channels u16 x L | downsample u8 x L | seed u64
//! record count u32
//! per record: name length u16 | UTF-8 name | rank u8 | dims u32 x rank | f32 x prod(dims)
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Mode, ModelConfig};
use super::nn::{Conv2d, ConvNet};
use crate::error::{Error, Result};

pub const WEIGHT_MAGIC: &[u8; 4] = b"SHVW";
pub const WEIGHT_VERSION: u8 = 1;

/// Convolutions per network.
pub const NET_DEPTH: usize = 4;
const PRELU_INIT: f32 = 0.25;

/// One named, shaped array of `f32`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl WeightRecord {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::WeightFormat(format!(
                "record {name}: shape {shape:?} needs {n} values, found {}",
                data.len()
            )));
        }
        Ok(Self { name, shape, data })
    }
}

/// Shape of one convolutional network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetSpec {
    pub name: String,
    pub in_channels: usize,
    pub hidden: usize,
    pub out_channels: usize,
}

impl NetSpec {
    fn channel_plan(&self) -> Vec<(usize, usize)> {
        (0..NET_DEPTH)
            .map(|j| {
                let i = if j == 0 { self.in_channels } else { self.hidden };
                let o = if j + 1 == NET_DEPTH { self.out_channels } else { self.hidden };
                (i, o)
            })
            .collect()
    }
}

/// Channel multiplier when resampling from resolution `H / from` to `H / to`.
pub(crate) fn resample_channel_factor(from: usize, to: usize) -> usize {
    if to > from {
        let r = to / from;
        r * r
    } else {
        1
    }
}

pub fn posterior_name(layer: usize) -> String {
    format!("posterior.{layer}")
}

pub fn context_name(layer: usize) -> String {
    format!("context.{layer}")
}

pub fn head_name(level: usize, i: usize) -> String {
    format!("prior.{level}.head.{i}")
}

pub fn top_name(level: usize) -> String {
    format!("prior.{level}.top")
}

/// Every network the configuration needs, in file order.
pub fn network_specs(config: &ModelConfig) -> Vec<NetSpec> {
    let k = config.k;
    let kk = config.num_subblocks();
    let mut specs = Vec::new();
    for l in 1..=config.layers {
        let d = config.downsample[l - 1];
        let prev_c = config.level_channels(l - 1);
        let in_channels = if l == 1 {
            // the data enters as g(x; k) at H / k
            prev_c * kk * resample_channel_factor(k, d)
        } else {
            prev_c * resample_channel_factor(1, d)
        };
        specs.push(NetSpec {
            name: posterior_name(l),
            in_channels,
            hidden: config.widths[l - 1],
            out_channels: 2 * config.level_channels(l),
        });
        specs.push(NetSpec {
            name: context_name(l),
            in_channels: config.level_channels(l) * resample_channel_factor(d, k),
            hidden: config.widths[l - 1],
            out_channels: config.widths[l - 1],
        });
    }
    for level in 0..=config.layers {
        for i in 0..kk {
            if level == config.layers && i == 0 {
                continue;
            }
            let ctx = if config.head_sees_latent(level, i) { config.widths[level] } else { 0 };
            specs.push(NetSpec {
                name: head_name(level, i),
                in_channels: ctx + config.level_channels(level) * kk,
                hidden: config.widths[level],
                out_channels: config.head_out_channels(level),
            });
        }
    }
    specs
}

/// Expected `(name, shape)` of every record.
pub fn expected_layout(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let mut layout = Vec::new();
    for spec in network_specs(config) {
        for (j, (i, o)) in spec.channel_plan().into_iter().enumerate() {
            layout.push((format!("{}.conv{j}.weight", spec.name), vec![o, i, 3, 3]));
            layout.push((format!("{}.conv{j}.bias", spec.name), vec![o]));
            if j + 1 < NET_DEPTH {
                layout.push((format!("{}.prelu{j}", spec.name), vec![o]));
            }
        }
    }
    layout.push((top_name(config.layers), vec![config.head_out_channels(config.layers)]));
    layout
}

/// Configuration plus every parameter record.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    pub records: Vec<WeightRecord>,
}

impl ModelWeights {
    /// Deterministic initialization from `config.seed`: every parameter is
    /// uniform on `[-a, a]` with `a = 1 / sqrt(fan_in)`, PReLU slopes start at
    /// 0.25.
    pub fn init_seeded(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut records = Vec::new();
        for (name, shape) in expected_layout(config) {
            let n: usize = shape.iter().product();
            let data = if name.contains(".prelu") {
                vec![PRELU_INIT; n]
            } else {
                let fan_in = if name.ends_with(".weight") {
                    shape[1] * shape[2] * shape[3]
                } else if name.ends_with(".bias") {
                    // matched to the weight of the same layer
                    weight_fan_in(&records, &name)
                } else {
                    1
                };
                let a = 1.0 / (fan_in as f32).sqrt();
                (0..n).map(|_| rng.gen_range(-a..=a)).collect()
            };
            records.push(WeightRecord { name, shape, data });
        }
        Ok(Self { config: config.clone(), records })
    }

    pub fn get(&self, name: &str) -> Option<&WeightRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut WeightRecord> {
        self.records.iter_mut().find(|r| r.name == name)
    }

    /// Checks names, shapes and finiteness against the configuration.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let layout = expected_layout(&self.config);
        if layout.len() != self.records.len() {
            return Err(Error::WeightFormat(format!(
                "expected {} records, found {}",
                layout.len(),
                self.records.len()
            )));
        }
        for ((name, shape), rec) in layout.iter().zip(&self.records) {
            if *name != rec.name || *shape != rec.shape {
                return Err(Error::WeightFormat(format!(
                    "expected record {name} {shape:?}, found {} {:?}",
                    rec.name, rec.shape
                )));
            }
            if rec.data.len() != shape.iter().product::<usize>() {
                return Err(Error::WeightFormat(format!("record {name} has the wrong element count")));
            }
            if rec.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::WeightFormat(format!("record {name} holds a non-finite value")));
            }
        }
        Ok(())
    }

    /// Build the network named `name` from its records.
    pub fn network(&self, name: &str) -> Result<ConvNet> {
        let missing = |n: String| Error::WeightFormat(format!("missing record {n}"));
        let mut convs = Vec::with_capacity(NET_DEPTH);
        let mut slopes = Vec::with_capacity(NET_DEPTH - 1);
        for j in 0..NET_DEPTH {
            let wn = format!("{name}.conv{j}.weight");
            let w = self.get(&wn).ok_or_else(|| missing(wn))?;
            let bn = format!("{name}.conv{j}.bias");
            let b = self.get(&bn).ok_or_else(|| missing(bn))?;
            convs.push(Conv2d {
                in_channels: w.shape[1],
                out_channels: w.shape[0],
                weight: w.data.clone(),
                bias: b.data.clone(),
            });
            if j + 1 < NET_DEPTH {
                let pn = format!("{name}.prelu{j}");
                slopes.push(self.get(&pn).ok_or_else(|| missing(pn))?.data.clone());
            }
        }
        Ok(ConvNet { convs, slopes })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(WEIGHT_MAGIC);
        out.push(WEIGHT_VERSION);
        write_config(&mut out, &self.config);
        write_records(&mut out, &self.records);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != WEIGHT_MAGIC {
            return Err(Error::BadMagic);
        }
        let version = r.u8()?;
        if version != WEIGHT_VERSION {
            return Err(Error::BadVersion(version));
        }
        let config = read_config(&mut r)?;
        let records = read_records(&mut r)?;
        if !r.is_empty() {
            return Err(Error::WeightFormat(format!("{} trailing bytes", r.remaining())));
        }
        let weights = Self { config, records };
        weights.validate()?;
        Ok(weights)
    }

    /// FNV-1a over the serialized bytes.
    pub fn hash(&self) -> u64 {
        fnv1a64(&self.to_bytes())
    }

    pub fn parameter_count(&self) -> usize {
        self.records.iter().map(|r| r.data.len()).sum()
    }
}

fn weight_fan_in(records: &[WeightRecord], bias_name: &str) -> usize {
    let weight_name = bias_name.replace(".bias", ".weight");
    records
        .iter()
        .rev()
        .find(|r| r.name == weight_name)
        .map_or(1, |r| r.shape[1] * r.shape[2] * r.shape[3])
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

pub(crate) fn write_config(out: &mut Vec<u8>, c: &ModelConfig) {
    out.push(c.layers as u8);
    out.push(c.k as u8);
    out.extend_from_slice(&(c.channels as u16).to_le_bytes());
    out.extend_from_slice(&(c.split as u16).to_le_bytes());
    out.push(c.mode.to_u8());
    out.push(c.mixtures as u8);
    for &w in &c.widths {
        out.extend_from_slice(&(w as u16).to_le_bytes());
    }
    for &lc in &c.latent_channels {
        out.extend_from_slice(&(lc as u16).to_le_bytes());
    }
    for &d in &c.downsample {
        out.push(d as u8);
    }
    out.extend_from_slice(&c.seed.to_le_bytes());
}

pub(crate) fn read_config(r: &mut Reader<'_>) -> Result<ModelConfig> {
    let layers = r.u8()? as usize;
    let k = r.u8()? as usize;
    let channels = r.u16()? as usize;
    let split = r.u16()? as usize;
    let mode = Mode::from_u8(r.u8()?)?;
    let mixtures = r.u8()? as usize;
    if !(1..=4).contains(&layers) {
        return Err(Error::WeightFormat(format!("layer count {layers} out of range")));
    }
    let widths = (0..=layers).map(|_| r.u16().map(usize::from)).collect::<Result<_>>()?;
    let latent_channels = (0..layers).map(|_| r.u16().map(usize::from)).collect::<Result<_>>()?;
    let downsample = (0..layers).map(|_| r.u8().map(usize::from)).collect::<Result<_>>()?;
    let seed = r.u64()?;
    let config =
        ModelConfig { layers, k, channels, split, mode, mixtures, widths, latent_channels, downsample, seed };
    config.validate()?;
    Ok(config)
}

pub(crate) fn write_records(out: &mut Vec<u8>, records: &[WeightRecord]) {
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for rec in records {
        out.extend_from_slice(&(rec.name.len() as u16).to_le_bytes());
        out.extend_from_slice(rec.name.as_bytes());
        out.push(rec.shape.len() as u8);
        for &d in &rec.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &rec.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub(crate) fn read_records(r: &mut Reader<'_>) -> Result<Vec<WeightRecord>> {
    let count = r.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::WeightFormat("record name is not UTF-8".into()))?
            .to_owned();
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let n = n.filter(|&n| n.saturating_mul(4) <= r.remaining()).ok_or_else(|| {
            Error::WeightFormat(format!("record {name}: shape {shape:?} exceeds the file"))
        })?;
        let raw = r.take(n * 4)?;
        let data: Vec<f32> =
            raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::WeightFormat(format!("record {name} holds a non-finite value")));
        }
        records.push(WeightRecord { name, shape, data });
    }
    Ok(records)
}

/// Bounds-checked little-endian cursor.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::WeightFormat(format!(
                "truncated: wanted {n} bytes at offset {}, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }
}
