//! The `.shvc` file: a fixed header, the coder payload and a CRC-32.
//!
//! ```text
//! "SHVC" | version u8 = 1 | mode u8 | k u8 | L u8 | split u16 | C u16
//! orig H u32 | orig W u32 | padded H u32 | padded W u32
//! model hash u64 | aux seed u64 | payload length u64 | payload | crc32 u32
//! ```
//!
//! All integers are little-endian. Single-image payloads are the serialized
//! stack. Chained payloads start with the image count `n` (u32) and `n`
//! records of `orig H, orig W, padded H, padded W` (u32 each) before the
//! stack; their header dimensions are zero.

use crate::ans::{
    decode_image_arib, decode_image_shvc, encode_dataset_chained, encode_image_arib, encode_image_shvc,
    words_from_bytes, words_to_bytes, AuxSource, ChainedDecoder, CodingMode, OverheadReport,
};
use crate::error::{Error, Result};
use crate::image::{crop, pad_replicate};
use crate::model::{ShvcModel, Reader};
use crate::tensor::Tensor;

pub const CONTAINER_MAGIC: &[u8; 4] = b"SHVC";
pub const CONTAINER_VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 1 + 1 + 1 + 2 + 2 + 4 * 4 + 8 + 8 + 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Container {
    pub mode: CodingMode,
    pub k: u8,
    pub layers: u8,
    pub split: u16,
    pub channels: u16,
    pub orig_height: u32,
    pub orig_width: u32,
    pub padded_height: u32,
    pub padded_width: u32,
    pub model_hash: u64,
    pub aux_seed: u64,
    pub payload: Vec<u8>,
}

impl Container {
    fn for_model(model: &ShvcModel, mode: CodingMode, aux_seed: u64, payload: Vec<u8>) -> Self {
        let cfg = model.config();
        Self {
            mode,
            k: cfg.k as u8,
            layers: cfg.layers as u8,
            split: cfg.split as u16,
            channels: cfg.channels as u16,
            orig_height: 0,
            orig_width: 0,
            padded_height: 0,
            padded_width: 0,
            model_hash: model.weights_hash(),
            aux_seed,
            payload,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len() + 4);
        out.extend_from_slice(CONTAINER_MAGIC);
        out.push(CONTAINER_VERSION);
        out.push(self.mode.to_u8());
        out.push(self.k);
        out.push(self.layers);
        out.extend_from_slice(&self.split.to_le_bytes());
        out.extend_from_slice(&self.channels.to_le_bytes());
        for v in [self.orig_height, self.orig_width, self.padded_height, self.padded_width] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.model_hash.to_le_bytes());
        out.extend_from_slice(&self.aux_seed.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&crc32fast::hash(&self.payload).to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4).map_err(corrupt)? != CONTAINER_MAGIC {
            return Err(Error::BadMagic);
        }
        let version = r.u8().map_err(corrupt)?;
        if version != CONTAINER_VERSION {
            return Err(Error::BadVersion(version));
        }
        let mut header = || -> Result<Self> {
            let mode = CodingMode::from_u8(r.u8()?)?;
            let k = r.u8()?;
            let layers = r.u8()?;
            let split = r.u16()?;
            let channels = r.u16()?;
            let (orig_height, orig_width, padded_height, padded_width) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
            let model_hash = r.u64()?;
            let aux_seed = r.u64()?;
            let len = r.u64()?;
            if len != (r.remaining() as u64).saturating_sub(4) {
                return Err(Error::CorruptStream(format!(
                    "payload length {len} does not match the {} bytes present",
                    r.remaining()
                )));
            }
            let payload = r.take(len as usize)?.to_vec();
            let stored = r.u32()?;
            let computed = crc32fast::hash(&payload);
            if stored != computed {
                return Err(Error::CrcMismatch { stored, computed });
            }
            Ok(Self {
                mode,
                k,
                layers,
                split,
                channels,
                orig_height,
                orig_width,
                padded_height,
                padded_width,
                model_hash,
                aux_seed,
                payload,
            })
        };
        header().map_err(corrupt)
    }

    /// Reject containers written with different weights or shape settings.
    pub fn check_model(&self, model: &ShvcModel) -> Result<()> {
        if self.model_hash != model.weights_hash() {
            return Err(Error::ModelHashMismatch { expected: self.model_hash, found: model.weights_hash() });
        }
        let cfg = model.config();
        if usize::from(self.k) != cfg.k
            || usize::from(self.layers) != cfg.layers
            || usize::from(self.channels) != cfg.channels
            || usize::from(self.split) != cfg.split
        {
            return Err(Error::CorruptStream("header settings disagree with the model".into()));
        }
        Ok(())
    }
}

fn corrupt(e: Error) -> Error {
    match e {
        Error::WeightFormat(m) => Error::CorruptStream(m),
        other => other,
    }
}

/// Pad, encode and frame one image.
pub fn compress_image(x: &Tensor<u8>, model: &ShvcModel, mode: CodingMode, seed: u64) -> Result<(Container, OverheadReport)> {
    if mode == CodingMode::Chained {
        return compress_chained(std::slice::from_ref(x), model, seed);
    }
    let padded = pad_replicate(x, model.config().required_multiple());
    let enc = match mode {
        CodingMode::Arib => encode_image_arib(&padded, model, seed)?,
        _ => encode_image_shvc(&padded, model, AuxSource::prng(seed))?,
    };
    let mut c = Container::for_model(model, mode, seed, words_to_bytes(&enc.words));
    c.orig_height = x.height() as u32;
    c.orig_width = x.width() as u32;
    c.padded_height = padded.height() as u32;
    c.padded_width = padded.width() as u32;
    Ok((c, enc.report))
}

/// Decode a single-image container.
pub fn decompress_image(c: &Container, model: &ShvcModel) -> Result<Tensor<u8>> {
    c.check_model(model)?;
    if c.mode == CodingMode::Chained {
        let mut images = decompress_chained(c, model)?;
        if images.len() != 1 {
            return Err(Error::UnsupportedImage(format!("chained container holds {} images", images.len())));
        }
        return Ok(images.remove(0));
    }
    let (ph, pw) = (c.padded_height as usize, c.padded_width as usize);
    let m = model.config().required_multiple();
    if ph % m != 0 || pw % m != 0 || c.orig_height as usize > ph || c.orig_width as usize > pw {
        return Err(Error::CorruptStream(format!("padded size {ph}x{pw} is not valid for this model")));
    }
    let words = words_from_bytes(&c.payload)?;
    let dec = match c.mode {
        CodingMode::Arib => decode_image_arib(&words, model, ph, pw)?,
        _ => decode_image_shvc(&words, model, ph, pw)?,
    };
    crop(&dec.image, c.orig_height as usize, c.orig_width as usize)
}

/// Encode several images onto one stack.
pub fn compress_chained(images: &[Tensor<u8>], model: &ShvcModel, seed: u64) -> Result<(Container, OverheadReport)> {
    let m = model.config().required_multiple();
    let padded: Vec<_> = images.iter().map(|x| pad_replicate(x, m)).collect();
    let enc = encode_dataset_chained(&padded, model, seed)?;
    let mut payload = (images.len() as u32).to_le_bytes().to_vec();
    for (x, p) in images.iter().zip(&padded) {
        for v in [x.height(), x.width(), p.height(), p.width()] {
            payload.extend_from_slice(&(v as u32).to_le_bytes());
        }
    }
    payload.extend(words_to_bytes(&enc.words));
    Ok((Container::for_model(model, CodingMode::Chained, seed, payload), enc.report))
}

/// A chained container opened for decoding, last image first.
pub struct ChainedArchive<'m> {
    decoder: ChainedDecoder<'m>,
    orig: Vec<(usize, usize)>,
}

impl<'m> ChainedArchive<'m> {
    pub fn open(c: &Container, model: &'m ShvcModel) -> Result<Self> {
        c.check_model(model)?;
        if c.mode != CodingMode::Chained {
            return Err(Error::CorruptStream("not a chained container".into()));
        }
        Self::parse(c, model).map_err(corrupt)
    }

    fn parse(c: &Container, model: &'m ShvcModel) -> Result<Self> {
        let mut r = Reader::new(&c.payload);
        let n = r.u32()? as usize;
        if n.saturating_mul(16) > r.remaining() {
            return Err(Error::CorruptStream(format!("image count {n} exceeds the payload")));
        }
        let mut orig = Vec::with_capacity(n);
        let mut padded = Vec::with_capacity(n);
        for _ in 0..n {
            let v = [r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|v| v as usize);
            orig.push((v[0], v[1]));
            padded.push((v[2], v[3]));
        }
        let words = words_from_bytes(r.take(r.remaining())?)?;
        Ok(Self { decoder: ChainedDecoder::new(model, &words, padded)?, orig })
    }

    pub fn len(&self) -> usize {
        self.orig.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orig.is_empty()
    }

    pub fn next_index(&self) -> Option<usize> {
        self.decoder.next_index()
    }

    /// Decode image `index`; only [`ChainedArchive::next_index`] is allowed.
    pub fn decode(&mut self, index: usize) -> Result<Tensor<u8>> {
        let img = self.decoder.decode(index)?;
        let (h, w) = self.orig[index];
        crop(&img, h, w)
    }
}

/// Every image of a chained container, in encode order.
pub fn decompress_chained(c: &Container, model: &ShvcModel) -> Result<Vec<Tensor<u8>>> {
    let mut archive = ChainedArchive::open(c, model)?;
    let mut out = Vec::with_capacity(archive.len());
    while let Some(j) = archive.next_index() {
        out.push(archive.decode(j)?);
    }
    out.reverse();
    Ok(out)
}
