//! Channel-major tensors and the lossless space-to-depth reorders.
//!
//! Two reorders fold a `C x H x W` tensor into `C*k^2 x H/k x W/k`:
//!
//! * [`pixel_unshuffle_f`] is the classic pixel unshuffle. Output channel `n`
//!   holds input channel `n / k^2` at spatial offset `((n / k) % k, n % k)`, so
//!   the `k^2` offsets of one input channel are adjacent.
//! * [`subpixel_unshuffle_g`] groups by spatial offset instead. Output channel
//!   `n` holds input channel `n % C` at offset `((n / (C*k)) % k, (n / C) % k)`,
//!   so every run of `C` channels (a *sub-block*) shares one offset. Sub-blocks
//!   visit the offsets in raster order, which is what the strong autoregression
//!   iterates over.
//!
//! Both are implemented as gathers rather than convolutions with one-hot
//! kernels; the result is identical and exact on integers.

use std::ops::Range;

use crate::error::{Error, Result};

/// A dense `C x H x W` array stored in `(c, h, w)` order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Copy> Tensor<T> {
    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch {
                expected: vec![channels, height, width],
                found: vec![data.len()],
            });
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: T) -> Self {
        Self { channels, height, width, data: vec![value; channels * height * width] }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for h in 0..height {
                for w in 0..width {
                    data.push(f(c, h, w));
                }
            }
        }
        Self { channels, height, width, data }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, h: usize, w: usize) -> T {
        self.data[(c * self.height + h) * self.width + w]
    }

    #[inline]
    pub fn set(&mut self, c: usize, h: usize, w: usize, value: T) {
        self.data[(c * self.height + h) * self.width + w] = value;
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Tensor<U> {
        Tensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Borrow a contiguous run of channels.
    pub fn channel_range(&self, range: Range<usize>) -> Result<TensorView<'_, T>> {
        if range.start > range.end || range.end > self.channels {
            return Err(Error::IndexOutOfRange { index: range.end, limit: self.channels });
        }
        let n = self.plane_len();
        Ok(TensorView {
            channels: range.len(),
            height: self.height,
            width: self.width,
            data: &self.data[range.start * n..range.end * n],
        })
    }

    /// Stack tensors of identical spatial size along the channel axis.
    pub fn concat_channels(parts: &[TensorView<'_, T>]) -> Result<Self> {
        let first = parts.first().ok_or(Error::IndexOutOfRange { index: 0, limit: 0 })?;
        let (height, width) = (first.height, first.width);
        let mut data = Vec::new();
        let mut channels = 0;
        for p in parts {
            if p.height != height || p.width != width {
                return Err(Error::ShapeMismatch {
                    expected: vec![p.channels, height, width],
                    found: vec![p.channels, p.height, p.width],
                });
            }
            channels += p.channels;
            data.extend_from_slice(p.data);
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn view(&self) -> TensorView<'_, T> {
        TensorView {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: &self.data,
        }
    }
}

/// Borrowed channel-major tensor.
#[derive(Clone, Copy, Debug)]
pub struct TensorView<'a, T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: &'a [T],
}

impl<T: Copy> TensorView<'_, T> {
    pub fn to_tensor(&self) -> Tensor<T> {
        Tensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.to_vec(),
        }
    }
}

/// How a `C*k^2`-channel downsampled tensor splits into sub-blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubBlockLayout {
    pub k: usize,
    pub channels_per_subblock: usize,
}

impl SubBlockLayout {
    pub fn new(k: usize, channels_per_subblock: usize) -> Self {
        Self { k, channels_per_subblock }
    }

    pub fn num_subblocks(&self) -> usize {
        self.k * self.k
    }

    pub fn total_channels(&self) -> usize {
        self.channels_per_subblock * self.num_subblocks()
    }

    /// Spatial offset `(dy, dx)` of sub-block `i` in the original tensor.
    pub fn offset(&self, i: usize) -> (usize, usize) {
        (i / self.k, i % self.k)
    }

    /// Offsets in sub-block order: `(0,0), (0,1), ..., (k-1,k-1)`.
    pub fn subblock_order(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_subblocks()).map(move |i| self.offset(i))
    }

    pub fn channels_of(&self, i: usize) -> Range<usize> {
        i * self.channels_per_subblock..(i + 1) * self.channels_per_subblock
    }

    /// Checks that a `H x W` tensor can be described by this layout.
    pub fn check_dims(&self, height: usize, width: usize) -> Result<()> {
        check_divisible(height, width, self.k)
    }
}

fn check_divisible(height: usize, width: usize, k: usize) -> Result<()> {
    if k == 0 || height % k != 0 {
        return Err(Error::Indivisible { dim: "height", size: height, k });
    }
    if width % k != 0 {
        return Err(Error::Indivisible { dim: "width", size: width, k });
    }
    Ok(())
}

/// Gather into a `C*k^2 x H/k x W/k` tensor where output channel `n` reads
/// input `(src(n), dy(n), dx(n))`.
fn gather<T: Copy>(
    t: &Tensor<T>,
    k: usize,
    source: impl Fn(usize) -> (usize, usize, usize),
) -> Result<Tensor<T>> {
    check_divisible(t.height, t.width, k)?;
    let (oh, ow) = (t.height / k, t.width / k);
    let out_channels = t.channels * k * k;
    let mut data = Vec::with_capacity(t.data.len());
    for n in 0..out_channels {
        let (c, dy, dx) = source(n);
        let plane = t.channel(c);
        for h in 0..oh {
            let row = &plane[(h * k + dy) * t.width..];
            data.extend((0..ow).map(|w| row[w * k + dx]));
        }
    }
    Ok(Tensor { channels: out_channels, height: oh, width: ow, data })
}

/// Classic space-to-depth (pixel unshuffle).
pub fn pixel_unshuffle_f<T: Copy>(t: &Tensor<T>, k: usize) -> Result<Tensor<T>> {
    let kk = k * k;
    gather(t, k, |n| (n / kk, (n / k) % k, n % k))
}

/// Space-to-depth with channels grouped into sub-blocks of shared offset.
pub fn subpixel_unshuffle_g<T: Copy>(t: &Tensor<T>, k: usize) -> Result<Tensor<T>> {
    let c = t.channels;
    gather(t, k, |n| (n % c, (n / (c * k)) % k, (n / c) % k))
}

/// Inverse of [`subpixel_unshuffle_g`] for an original channel count `c`.
pub fn subpixel_shuffle_g_inv<T: Copy>(t: &Tensor<T>, k: usize, c: usize) -> Result<Tensor<T>> {
    if k == 0 || t.channels != c * k * k {
        return Err(Error::ChannelMismatch { expected: c * k * k, found: t.channels });
    }
    let (h_out, w_out) = (t.height * k, t.width * k);
    let mut out = Vec::with_capacity(t.data.len());
    for ch in 0..c {
        for h in 0..h_out {
            let (y, dy) = (h / k, h % k);
            for w in 0..w_out {
                let (x, dx) = (w / k, w % k);
                let n = (dy * k + dx) * c + ch;
                out.push(t.get(n, y, x));
            }
        }
    }
    Ok(Tensor { channels: c, height: h_out, width: w_out, data: out })
}

/// `perm[n]` is the [`pixel_unshuffle_f`] channel holding the same elements as
/// [`subpixel_unshuffle_g`] channel `n`.
pub fn f_g_permutation(c: usize, k: usize) -> Vec<usize> {
    let kk = k * k;
    (0..c * kk)
        .map(|n| {
            let ch = n % c;
            let dy = (n / (c * k)) % k;
            let dx = (n / c) % k;
            ch * kk + dy * k + dx
        })
        .collect()
}

/// Inverse of a permutation given as an index table.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Channels `[i*c, (i+1)*c)` of a downsampled tensor.
pub fn subblock_view<T: Copy>(t: &Tensor<T>, i: usize, c: usize) -> Result<TensorView<'_, T>> {
    if c == 0 || t.channels % c != 0 {
        return Err(Error::ChannelMismatch { expected: c, found: t.channels });
    }
    let count = t.channels / c;
    if i >= count {
        return Err(Error::IndexOutOfRange { index: i, limit: count });
    }
    t.channel_range(i * c..(i + 1) * c)
}

/// Nearest-neighbour upsampling by an integer factor.
pub fn repeat_upsample<T: Copy>(t: &Tensor<T>, r: usize) -> Tensor<T> {
    if r == 1 {
        return t.clone();
    }
    Tensor::from_fn(t.channels, t.height * r, t.width * r, |c, h, w| t.get(c, h / r, w / r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indexed(c: usize, h: usize, w: usize) -> Tensor<i32> {
        Tensor::from_fn(c, h, w, |c, h, w| (100 * c + 10 * h + w) as i32)
    }

    #[test]
    fn f_on_two_by_two() {
        let t = Tensor::from_vec(1, 2, 2, vec![1, 2, 3, 4]).unwrap();
        let out = pixel_unshuffle_f(&t, 2).unwrap();
        assert_eq!(out.shape(), [4, 1, 1]);
        assert_eq!(out.data(), &[1, 2, 3, 4]);
    }

    #[test]
    fn f_matches_index_oracle() {
        let t = indexed(3, 4, 4);
        let out = pixel_unshuffle_f(&t, 2).unwrap();
        assert_eq!(out.get(1, 0, 0), 1);
        // brute force over every output element
        for n in 0..12 {
            for h in 0..2 {
                for w in 0..2 {
                    let (c, dy, dx) = (n / 4, (n / 2) % 2, n % 2);
                    assert_eq!(out.get(n, h, w), t.get(c, 2 * h + dy, 2 * w + dx));
                }
            }
        }
        // channels 0..3 are channel 0's offset planes
        for n in 0..4 {
            assert!(out.channel(n).iter().all(|&v| v < 100));
        }
    }

    #[test]
    fn g_example() {
        let t = indexed(3, 2, 2);
        let out = subpixel_unshuffle_g(&t, 2).unwrap();
        assert_eq!(out.data(), &[0, 100, 200, 1, 101, 201, 10, 110, 210, 11, 111, 211]);
        let back = subpixel_shuffle_g_inv(&out, 2, 3).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn k_one_is_identity() {
        let t = indexed(3, 5, 7);
        assert_eq!(pixel_unshuffle_f(&t, 1).unwrap(), t);
        assert_eq!(subpixel_unshuffle_g(&t, 1).unwrap(), t);
        assert_eq!(subpixel_shuffle_g_inv(&t, 1, 3).unwrap(), t);
    }

    #[test]
    fn indivisible_shapes_are_rejected() {
        let t = indexed(1, 3, 4);
        assert!(matches!(pixel_unshuffle_f(&t, 2), Err(Error::Indivisible { dim: "height", .. })));
        let t = indexed(1, 4, 3);
        assert!(matches!(subpixel_unshuffle_g(&t, 2), Err(Error::Indivisible { dim: "width", .. })));
        let t = indexed(5, 1, 1);
        assert!(matches!(subpixel_shuffle_g_inv(&t, 2, 1), Err(Error::ChannelMismatch { .. })));
    }

    #[test]
    fn permutation_examples() {
        assert_eq!(f_g_permutation(1, 3), (0..9).collect::<Vec<_>>());
        assert_eq!(f_g_permutation(3, 2), vec![0, 4, 8, 1, 5, 9, 2, 6, 10, 3, 7, 11]);
        let p = f_g_permutation(4, 3);
        let inv = invert_permutation(&p);
        for i in 0..p.len() {
            assert_eq!(p[inv[i]], i);
        }
    }

    #[test]
    fn subblock_views() {
        let g = subpixel_unshuffle_g(&indexed(3, 2, 2), 2).unwrap();
        assert_eq!(subblock_view(&g, 0, 3).unwrap().data, &[0, 100, 200]);
        assert_eq!(subblock_view(&g, 3, 3).unwrap().data, &[11, 111, 211]);
        assert!(matches!(subblock_view(&g, 4, 3), Err(Error::IndexOutOfRange { .. })));
        let views: Vec<_> = (0..4).map(|i| subblock_view(&g, i, 3).unwrap()).collect();
        assert_eq!(Tensor::concat_channels(&views).unwrap(), g);
    }

    #[test]
    fn layout_offsets_are_raster() {
        let l = SubBlockLayout::new(3, 2);
        let offs: Vec<_> = l.subblock_order().collect();
        assert_eq!(offs[0], (0, 0));
        assert_eq!(offs[1], (0, 1));
        assert_eq!(offs[3], (1, 0));
        assert_eq!(offs[8], (2, 2));
        assert_eq!(l.total_channels(), 18);
        assert_eq!(l.channels_of(2), 4..6);
    }

    #[test]
    fn upsample_repeats() {
        let t = Tensor::from_vec(1, 1, 2, vec![7, 9]).unwrap();
        let u = repeat_upsample(&t, 2);
        assert_eq!(u.data(), &[7, 7, 9, 9, 7, 7, 9, 9]);
    }
}
