//! Discretized logistic distributions and the fixed-point tables the ANS coder
//! consumes.
//!
//! Continuous densities are integrated over uniform bins of a [`SymbolGrid`].
//! The first and last bins extend to minus and plus infinity, so every pmf
//! over the grid sums to one up to floating point rounding.

use crate::error::{Error, Result};

/// Default coder precision for every table.
pub const DEFAULT_PRECISION: u32 = 16;

pub const MIN_LOG_SCALE: f64 = -7.0;
pub const MAX_LOG_SCALE: f64 = 7.0;

/// A finite, uniformly spaced set of reconstruction values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolGrid {
    pub num_symbols: usize,
    /// Real value of symbol 0.
    pub origin: f64,
    pub bin_width: f64,
}

impl SymbolGrid {
    pub fn new(num_symbols: usize, origin: f64, bin_width: f64) -> Result<Self> {
        if num_symbols < 2 || !(bin_width > 0.0) || !origin.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "symbol grid needs >= 2 symbols and positive bin width (got {num_symbols}, {bin_width})"
            )));
        }
        Ok(Self { num_symbols, origin, bin_width })
    }

    /// 8-bit pixels rescaled to `[-1, 1]`.
    pub fn pixels() -> Self {
        Self { num_symbols: 256, origin: -1.0, bin_width: 2.0 / 255.0 }
    }

    /// The latent coding grid: 64 bins of width 0.5 centred on zero.
    pub fn latents() -> Self {
        Self { num_symbols: 64, origin: -15.75, bin_width: 0.5 }
    }

    #[inline]
    pub fn value(&self, symbol: usize) -> f64 {
        self.origin + symbol as f64 * self.bin_width
    }

    /// Nearest symbol to a real value, saturating at the grid ends.
    pub fn nearest(&self, value: f64) -> usize {
        let v = ((value - self.origin) / self.bin_width).round();
        if v <= 0.0 {
            0
        } else {
            (v as usize).min(self.num_symbols - 1)
        }
    }

    /// Bin edges `(lower, upper)` with the outermost edges at infinity.
    pub fn edges(&self, symbol: usize) -> (f64, f64) {
        let centre = self.value(symbol);
        let half = 0.5 * self.bin_width;
        let lower = if symbol == 0 { f64::NEG_INFINITY } else { centre - half };
        let upper = if symbol + 1 == self.num_symbols { f64::INFINITY } else { centre + half };
        (lower, upper)
    }
}

/// Location and log-scale of a logistic density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogisticParams {
    pub mean: f64,
    log_scale: f64,
}

impl LogisticParams {
    pub fn new(mean: f64, log_scale: f64) -> Self {
        Self { mean, log_scale: log_scale.clamp(MIN_LOG_SCALE, MAX_LOG_SCALE) }
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }
}

/// Mixture of logistics with unnormalized mixture logits.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureParams {
    pub components: Vec<LogisticParams>,
    pub logits: Vec<f64>,
}

impl MixtureParams {
    pub fn new(components: Vec<LogisticParams>, logits: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != logits.len() {
            return Err(Error::InvalidConfig(format!(
                "mixture needs matching non-empty components and logits ({} vs {})",
                components.len(),
                logits.len()
            )));
        }
        Ok(Self { components, logits })
    }

    pub fn single(p: LogisticParams) -> Self {
        Self { components: vec![p], logits: vec![0.0] }
    }

    /// Softmax of the logits.
    pub fn weights(&self) -> Vec<f64> {
        softmax(&self.logits)
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// `sigmoid(b) - sigmoid(a)` for `a <= b`, evaluated on the side of zero that
/// avoids cancellation.
fn sigmoid_diff(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        sigmoid(-a) - sigmoid(-b)
    } else {
        sigmoid(b) - sigmoid(a)
    }
}

/// Mass of one bin under a discretized logistic.
pub fn discretized_logistic_pmf(symbol: usize, p: LogisticParams, grid: &SymbolGrid) -> f64 {
    let (lower, upper) = grid.edges(symbol);
    let inv_s = (-p.log_scale).exp();
    sigmoid_diff((lower - p.mean) * inv_s, (upper - p.mean) * inv_s)
}

/// Mass of one bin under a discretized logistic mixture.
pub fn mixture_pmf(symbol: usize, m: &MixtureParams, grid: &SymbolGrid) -> f64 {
    m.weights()
        .iter()
        .zip(&m.components)
        .map(|(w, &c)| w * discretized_logistic_pmf(symbol, c, grid))
        .sum()
}

/// The full pmf of a mixture over the grid.
///
/// Evaluates the CDF once per interior edge and differences neighbours, so
/// the result telescopes to exactly one before rounding.
pub fn mixture_pmf_vec(m: &MixtureParams, grid: &SymbolGrid) -> Vec<f64> {
    let n = grid.num_symbols;
    let mut pmf = vec![0.0; n];
    let weights = m.weights();
    let half = 0.5 * grid.bin_width;
    for (w, c) in weights.iter().zip(&m.components) {
        let inv_s = (-c.log_scale).exp();
        let mut prev = 0.0;
        for (v, slot) in pmf.iter_mut().enumerate().take(n - 1) {
            let edge = grid.value(v) + half;
            let cdf = sigmoid((edge - c.mean) * inv_s);
            *slot += w * (cdf - prev);
            prev = cdf;
        }
        pmf[n - 1] += w * (1.0 - prev);
    }
    pmf
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy_bits(pmf: &[f64]) -> f64 {
    -pmf.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>()
}

/// Integer frequencies summing to `2^precision`, every one at least 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CdfTable {
    precision: u32,
    freqs: Vec<u32>,
    /// `cumulative[v]` is the start of symbol `v`; the last entry is `2^precision`.
    cumulative: Vec<u32>,
}

impl CdfTable {
    pub fn from_freqs(freqs: Vec<u32>, precision: u32) -> Result<Self> {
        if !(1..=24).contains(&precision) {
            return Err(Error::InvalidPmf(format!("precision {precision} outside 1..=24")));
        }
        if freqs.is_empty() {
            return Err(Error::InvalidPmf("empty frequency table".into()));
        }
        if freqs.iter().any(|&f| f == 0) {
            return Err(Error::InvalidPmf("zero frequency".into()));
        }
        let mut cumulative = Vec::with_capacity(freqs.len() + 1);
        let mut acc = 0u64;
        cumulative.push(0);
        for &f in &freqs {
            acc += u64::from(f);
            if acc > 1u64 << precision {
                break;
            }
            cumulative.push(acc as u32);
        }
        if acc != 1u64 << precision {
            return Err(Error::InvalidPmf(format!("frequencies sum to {acc}, expected 2^{precision}")));
        }
        Ok(Self { precision, freqs, cumulative })
    }

    #[inline]
    pub fn precision(&self) -> u32 {
        self.precision
    }

    #[inline]
    pub fn num_symbols(&self) -> usize {
        self.freqs.len()
    }

    pub fn freqs(&self) -> &[u32] {
        &self.freqs
    }

    /// Prefix sums, `num_symbols + 1` entries starting at 0.
    pub fn cumulative(&self) -> &[u32] {
        &self.cumulative
    }

    #[inline]
    pub fn freq(&self, symbol: usize) -> u32 {
        self.freqs[symbol]
    }

    #[inline]
    pub fn start(&self, symbol: usize) -> u32 {
        self.cumulative[symbol]
    }

    /// Symbol whose interval contains `slot`.
    #[inline]
    pub fn find(&self, slot: u32) -> usize {
        self.cumulative.partition_point(|&c| c <= slot) - 1
    }

    /// Codelength of `symbol` in bits.
    pub fn bits(&self, symbol: usize) -> f64 {
        f64::from(self.precision) - f64::from(self.freqs[symbol]).log2()
    }

    pub fn probability(&self, symbol: usize) -> f64 {
        f64::from(self.freqs[symbol]) / (1u64 << self.precision) as f64
    }

    /// Re-checks every table invariant.
    pub fn validate(&self) -> Result<()> {
        let total = 1u64 << self.precision;
        if self.cumulative.len() != self.freqs.len() + 1 || self.cumulative[0] != 0 {
            return Err(Error::InvalidPmf("cumulative table has wrong length".into()));
        }
        for (i, &f) in self.freqs.iter().enumerate() {
            if f == 0 {
                return Err(Error::InvalidPmf(format!("symbol {i} has zero frequency")));
            }
            if u64::from(self.cumulative[i]) + u64::from(f) != u64::from(self.cumulative[i + 1]) {
                return Err(Error::InvalidPmf(format!("cumulative table broken at {i}")));
            }
        }
        if u64::from(*self.cumulative.last().unwrap()) != total {
            return Err(Error::InvalidPmf("frequencies do not sum to 2^precision".into()));
        }
        Ok(())
    }

    /// `KL(pmf || freqs / 2^P)` in bits.
    pub fn kl_bits(&self, pmf: &[f64]) -> f64 {
        pmf.iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| p * (p / self.probability(i)).log2())
            .sum()
    }

    /// Frequencies as little-endian `u32`s.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.freqs.iter().flat_map(|f| f.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(bytes: &[u8], precision: u32) -> Result<Self> {
        if bytes.len() % 4 != 0 {
            return Err(Error::InvalidPmf("table byte length not a multiple of 4".into()));
        }
        let freqs = bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::from_freqs(freqs, precision)
    }

    /// Overwrites one frequency without rebalancing. Only useful for
    /// exercising the validators.
    #[doc(hidden)]
    pub fn corrupt(&mut self, symbol: usize, freq: u32) {
        self.freqs[symbol] = freq;
    }
}

/// Quantize a pmf to a [`CdfTable`].
///
/// Each frequency starts as `max(1, round(p * 2^P))`. Any surplus or deficit is
/// then settled one count at a time in largest-remainder order: deficits go to
/// the symbols whose rounding lost the most, surpluses come from the symbols
/// that gained the most (never below 1). Ties break on the lower index, so the
/// table is a pure function of the input bits.
pub fn quantize_to_cdf(pmf: &[f64], precision: u32) -> Result<CdfTable> {
    let n = pmf.len();
    if !(1..=24).contains(&precision) {
        return Err(Error::InvalidPmf(format!("precision {precision} outside 1..=24")));
    }
    let total = 1u64 << precision;
    if n as u64 > total {
        return Err(Error::TableCapacity { num_symbols: n, precision });
    }
    if n == 0 {
        return Err(Error::InvalidPmf("empty pmf".into()));
    }
    let mut sum = 0.0;
    for &p in pmf {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidPmf(format!("entry {p} is not a finite non-negative number")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidPmf(format!("entries sum to {sum}")));
    }

    let scale = total as f64;
    let targets: Vec<f64> = pmf.iter().map(|&p| p * scale).collect();
    let mut freqs: Vec<i64> = targets.iter().map(|&t| (t.round() as i64).max(1)).collect();
    let mut diff = total as i64 - freqs.iter().sum::<i64>();

    if diff != 0 {
        let mut order: Vec<usize> = (0..n).collect();
        let remainder = |i: usize| targets[i] - freqs[i] as f64;
        if diff > 0 {
            order.sort_unstable_by(|&a, &b| remainder(b).total_cmp(&remainder(a)).then(a.cmp(&b)));
            'add: loop {
                for &i in &order {
                    freqs[i] += 1;
                    diff -= 1;
                    if diff == 0 {
                        break 'add;
                    }
                }
            }
        } else {
            order.sort_unstable_by(|&a, &b| remainder(a).total_cmp(&remainder(b)).then(a.cmp(&b)));
            'take: loop {
                for &i in &order {
                    if freqs[i] > 1 {
                        freqs[i] -= 1;
                        diff += 1;
                        if diff == 0 {
                            break 'take;
                        }
                    }
                }
            }
        }
    }

    CdfTable::from_freqs(freqs.into_iter().map(|f| f as u32).collect(), precision)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: i32, hi: i32) -> SymbolGrid {
        SymbolGrid::new((hi - lo + 1) as usize, lo as f64, 1.0).unwrap()
    }

    fn sig(t: f64) -> f64 {
        1.0 / (1.0 + (-t).exp())
    }

    #[test]
    fn unit_logistic_central_bin() {
        // symbol 8 of {-8..8} is the interior bin [-0.5, 0.5]
        let g = grid(-8, 8);
        let p = discretized_logistic_pmf(8, LogisticParams::new(0.0, 0.0), &g);
        assert!((p - 0.244_918_662_403_709_2).abs() < 1e-12);
        assert!((p - (sig(0.5) - sig(-0.5))).abs() < 1e-15);
    }

    #[test]
    fn tails_fold_into_edge_bins() {
        let g = grid(0, 255);
        let p = LogisticParams::new(-1e6, 0.0);
        assert!((discretized_logistic_pmf(0, p, &g) - 1.0).abs() < 1e-12);
        let q = LogisticParams::new(1e6, 0.0);
        assert!((discretized_logistic_pmf(255, q, &g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_about_centre() {
        let g = grid(-10, 10);
        let p = LogisticParams::new(0.0, 0.7);
        for v in 0..10 {
            let a = discretized_logistic_pmf(v, p, &g);
            let b = discretized_logistic_pmf(20 - v, p, &g);
            assert!((a - b).abs() < 1e-15, "{v}: {a} vs {b}");
        }
    }

    #[test]
    fn pmfs_normalize() {
        let g = SymbolGrid::pixels();
        for &(mu, ls) in &[(0.0, -3.0), (0.9, -7.0), (-2.0, 2.0), (0.3, 7.0)] {
            let p = LogisticParams::new(mu, ls);
            let s: f64 = (0..256).map(|v| discretized_logistic_pmf(v, p, &g)).sum();
            assert!((s - 1.0).abs() < 1e-12, "{mu} {ls}: {s}");
            let v = mixture_pmf_vec(&MixtureParams::single(p), &g);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_scale_is_clamped() {
        assert_eq!(LogisticParams::new(0.0, -20.0).log_scale(), MIN_LOG_SCALE);
        assert_eq!(LogisticParams::new(0.0, 9.0).log_scale(), MAX_LOG_SCALE);
    }

    #[test]
    fn single_component_mixture_matches() {
        let g = grid(-8, 8);
        let p = LogisticParams::new(0.3, -0.2);
        let m = MixtureParams::single(p);
        let two = MixtureParams::new(vec![p, p], vec![1.5, -3.0]).unwrap();
        for v in 0..17 {
            let a = discretized_logistic_pmf(v, p, &g);
            assert!((mixture_pmf(v, &m, &g) - a).abs() < 1e-15);
            assert!((mixture_pmf(v, &two, &g) - a).abs() < 1e-15);
        }
    }

    #[test]
    fn two_component_average() {
        let g = grid(-8, 8);
        let m = MixtureParams::new(
            vec![LogisticParams::new(-2.0, 0.0), LogisticParams::new(2.0, 0.0)],
            vec![0.0, 0.0],
        )
        .unwrap();
        // value 0 is symbol 8; hand-summed CDF differences
        let left = sig(0.5 + 2.0) - sig(-0.5 + 2.0);
        let right = sig(0.5 - 2.0) - sig(-0.5 - 2.0);
        let expected = 0.5 * (left + right);
        assert!((mixture_pmf(8, &m, &g) - expected).abs() < 1e-15);
        assert!((expected - 0.106_567_343_785_112_84).abs() < 1e-12);
        let v = mixture_pmf_vec(&m, &g);
        assert!((v[8] - expected).abs() < 1e-14);
    }

    #[test]
    fn quantize_uniform() {
        let t = quantize_to_cdf(&[0.25; 4], 12).unwrap();
        assert_eq!(t.freqs(), &[1024, 1024, 1024, 1024]);
        assert_eq!(t.cumulative(), &[0, 1024, 2048, 3072, 4096]);
    }

    #[test]
    fn quantize_point_mass() {
        let t = quantize_to_cdf(&[1.0, 0.0, 0.0], 8).unwrap();
        assert_eq!(t.freqs(), &[254, 1, 1]);
    }

    #[test]
    fn quantize_capacity_and_validation() {
        assert!(matches!(quantize_to_cdf(&[0.2; 5], 2), Err(Error::TableCapacity { .. })));
        assert!(quantize_to_cdf(&[0.5, 0.4], 8).is_err());
        assert!(quantize_to_cdf(&[1.5, -0.5], 8).is_err());
        assert!(quantize_to_cdf(&[f64::NAN, 1.0], 8).is_err());
    }

    #[test]
    fn find_inverts_start() {
        let t = quantize_to_cdf(&[0.1, 0.2, 0.3, 0.4], 10).unwrap();
        for s in 0..4 {
            for slot in t.start(s)..t.start(s) + t.freq(s) {
                assert_eq!(t.find(slot), s);
            }
        }
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy_bits(&[1.0 / 256.0; 256]) - 8.0).abs() < 1e-12);
        assert!((entropy_bits(&[0.5, 0.5]) - 1.0).abs() < 1e-15);
        assert_eq!(entropy_bits(&[1.0, 0.0]), 0.0);
    }

    #[test]
    fn corrupted_table_fails_validation() {
        let mut t = quantize_to_cdf(&[0.5, 0.5], 8).unwrap();
        t.validate().unwrap();
        t.corrupt(0, 7);
        assert!(t.validate().is_err());
    }

    #[test]
    fn golden_table_bytes() {
        // frozen: a discretized unit logistic over {-3..3}, P = 12
        let g = grid(-3, 3);
        let pmf = mixture_pmf_vec(&MixtureParams::single(LogisticParams::new(0.0, 0.0)), &g);
        let t = quantize_to_cdf(&pmf, 12).unwrap();
        assert_eq!(t.freqs(), &[311, 436, 799, 1003, 799, 437, 311]);
        let bytes = t.to_le_bytes();
        assert_eq!(&bytes[..8], &[0x37, 0x01, 0, 0, 0xb4, 0x01, 0, 0]);
        assert_eq!(CdfTable::from_le_bytes(&bytes, 12).unwrap(), t);
    }
}
