//! Range-ANS with a 64-bit state and a LIFO stack of 32-bit words.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::CdfTable;
use crate::error::{Error, Result};

/// Lower bound of the normalized state interval `[2^32, 2^64)`.
pub const STATE_LOWER: u64 = 1 << 32;
/// Bits charged for flushing the final state.
pub const FLUSH_BITS: u64 = 64;

/// Where a pop gets its bits once the stack is empty.
#[derive(Clone, Debug)]
pub enum AuxSource {
    /// Deterministic words from a seeded ChaCha8 stream.
    Prng { seed: u64, rng: ChaCha8Rng },
    /// Words of an earlier message, consumed in its pop order.
    Chained(Vec<u32>),
    /// Running dry is an error.
    None,
}

impl AuxSource {
    pub fn prng(seed: u64) -> Self {
        AuxSource::Prng { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Chain onto a serialized message; words are drawn in pop order.
    pub fn chained(mut words_in_pop_order: Vec<u32>) -> Self {
        words_in_pop_order.reverse();
        AuxSource::Chained(words_in_pop_order)
    }

    fn draw(&mut self) -> Result<u32> {
        match self {
            AuxSource::Prng { rng, .. } => Ok(rng.next_u32()),
            AuxSource::Chained(words) => words.pop().ok_or(Error::Underflow),
            AuxSource::None => Err(Error::Underflow),
        }
    }

    /// The first `n` words this source would hand out, without consuming them.
    pub fn preview(&self, n: usize) -> Vec<u32> {
        match self {
            AuxSource::Prng { rng, .. } => {
                let mut r = rng.clone();
                (0..n).map(|_| r.next_u32()).collect()
            }
            AuxSource::Chained(words) => words.iter().rev().take(n).copied().collect(),
            AuxSource::None => Vec::new(),
        }
    }
}

/// ANS state and bitstream.
///
/// A fresh coder takes 32 bits from its aux source to initialise the state
/// to `2^32 + w`. Every pop that leaves the state below `2^32` pulls one
/// word from the stack, or from the aux source once the stack is empty.
#[derive(Clone, Debug)]
pub struct AnsCoder {
    state: u64,
    /// Last element is the top.
    stack: Vec<u32>,
    aux: AuxSource,
    aux_words: u64,
}

impl AnsCoder {
    /// Start a new message, seeding the state from `aux`.
    pub fn new(mut aux: AuxSource) -> Result<Self> {
        let w = aux.draw()?;
        Ok(Self { state: STATE_LOWER | u64::from(w), stack: Vec::new(), aux, aux_words: 1 })
    }

    /// Resume from serialized words (see [`AnsCoder::to_words`]). The
    /// decoder never draws aux bits, so none is attached.
    pub fn from_words(words_in_pop_order: &[u32]) -> Result<Self> {
        if words_in_pop_order.len() < 2 {
            return Err(Error::CorruptStream("message shorter than the flushed state".into()));
        }
        let state = (u64::from(words_in_pop_order[0]) << 32) | u64::from(words_in_pop_order[1]);
        if state < STATE_LOWER {
            return Err(Error::CorruptStream("flushed state below 2^32".into()));
        }
        let stack = words_in_pop_order[2..].iter().rev().copied().collect();
        Ok(Self { state, stack, aux: AuxSource::None, aux_words: 0 })
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn stack(&self) -> &[u32] {
        &self.stack
    }

    pub fn aux(&self) -> &AuxSource {
        &self.aux
    }

    pub fn set_aux(&mut self, aux: AuxSource) {
        self.aux = aux;
    }

    /// Aux bits drawn so far, including the 32 seed bits.
    pub fn aux_bits_consumed(&self) -> u64 {
        32 * self.aux_words
    }

    /// Size of the message if flushed now.
    pub fn total_bits(&self) -> u64 {
        32 * self.stack.len() as u64 + FLUSH_BITS
    }

    /// Information content `log2(state) + 32 * |stack|`.
    pub fn content_bits(&self) -> f64 {
        (self.state as f64).log2() + 32.0 * self.stack.len() as f64
    }

    /// Encode `symbol` under `table`.
    pub fn push(&mut self, symbol: usize, table: &CdfTable) {
        let p = table.precision();
        let freq = u64::from(table.freq(symbol));
        debug_assert!(freq > 0, "pushing a zero-frequency symbol");
        if (self.state >> (64 - p)) >= freq {
            self.stack.push(self.state as u32);
            self.state >>= 32;
        }
        self.state = ((self.state / freq) << p) + self.state % freq + u64::from(table.start(symbol));
    }

    /// Decode a symbol under `table`.
    pub fn pop(&mut self, table: &CdfTable) -> Result<usize> {
        let p = table.precision();
        let slot = (self.state & ((1u64 << p) - 1)) as u32;
        let symbol = table.find(slot);
        let next = u64::from(table.freq(symbol)) * (self.state >> p) + u64::from(slot - table.start(symbol));
        let next = if next < STATE_LOWER {
            let word = match self.stack.pop() {
                Some(w) => w,
                None => {
                    let w = self.aux.draw()?;
                    self.aux_words += 1;
                    w
                }
            };
            (next << 32) | u64::from(word)
        } else {
            next
        };
        self.state = next;
        Ok(symbol)
    }

    /// Flush: the state as two words on top of the stack, all listed in pop
    /// order.
    pub fn to_words(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.stack.len() + 2);
        out.push((self.state >> 32) as u32);
        out.push(self.state as u32);
        out.extend(self.stack.iter().rev());
        out
    }

    /// Aux words recovered by a decoder that has undone every step: the seed
    /// word followed by the stack in pop order, i.e. in the order they were
    /// originally drawn.
    pub fn returned_aux_words(&self) -> Result<Vec<u32>> {
        if self.state >> 32 != 1 {
            return Err(Error::CorruptStream("decoder did not return to a seeded state".into()));
        }
        let mut out = vec![self.state as u32];
        out.extend(self.stack.iter().rev());
        Ok(out)
    }
}

/// `u32` word count then the words, little-endian, in pop order.
pub fn words_to_bytes(words: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * words.len());
    out.extend_from_slice(&(words.len() as u32).to_le_bytes());
    for w in words {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

pub fn words_from_bytes(bytes: &[u8]) -> Result<Vec<u32>> {
    if bytes.len() < 4 {
        return Err(Error::CorruptStream("missing word count".into()));
    }
    let n = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    let body = &bytes[4..];
    if body.len() != 4 * n {
        return Err(Error::CorruptStream(format!("expected {n} words, found {} bytes", body.len())));
    }
    Ok(body.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
}
