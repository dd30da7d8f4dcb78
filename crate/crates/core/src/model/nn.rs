//! Minimal inference-only layers: 3x3 same-padded convolutions and PReLU.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const KERNEL: usize = 3;

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[out, in, 3, 3]`
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv2d {
    pub fn forward(&self, input: &Tensor<f32>) -> Result<Tensor<f32>> {
        if input.channels() != self.in_channels {
            return Err(Error::ChannelMismatch { expected: self.in_channels, found: input.channels() });
        }
        let (h, w) = (input.height(), input.width());
        let mut out = Tensor::filled(self.out_channels, h, w, 0.0f32);
        for o in 0..self.out_channels {
            let plane = out.channel_mut(o);
            plane.fill(self.bias[o]);
            for i in 0..self.in_channels {
                let src = input.channel(i);
                let kernel = &self.weight[(o * self.in_channels + i) * 9..][..9];
                for ky in 0..KERNEL {
                    for kx in 0..KERNEL {
                        let wgt = kernel[ky * KERNEL + kx];
                        if wgt == 0.0 {
                            continue;
                        }
                        accumulate_shifted(plane, src, h, w, ky as isize - 1, kx as isize - 1, wgt);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `dst[y][x] += wgt * src[y + dy][x + dx]` wherever the source is in bounds.
#[inline]
fn accumulate_shifted(dst: &mut [f32], src: &[f32], h: usize, w: usize, dy: isize, dx: isize, wgt: f32) {
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx.max(0)) as usize;
    if x0 >= x1 {
        return;
    }
    for y in 0..h {
        let sy = y as isize + dy;
        if sy < 0 || sy >= h as isize {
            continue;
        }
        let d = &mut dst[y * w + x0..y * w + x1];
        let s0 = (sy as usize) * w + (x0 as isize + dx) as usize;
        let s = &src[s0..s0 + d.len()];
        for (a, b) in d.iter_mut().zip(s) {
            *a += wgt * b;
        }
    }
}

fn prelu(t: &mut Tensor<f32>, slopes: &[f32]) {
    for (c, &a) in slopes.iter().enumerate() {
        for v in t.channel_mut(c) {
            if *v < 0.0 {
                *v *= a;
            }
        }
    }
}

/// A stack of convolutions with PReLU between consecutive layers.
#[derive(Clone, Debug)]
pub struct ConvNet {
    pub convs: Vec<Conv2d>,
    /// One slope vector per hidden activation.
    pub slopes: Vec<Vec<f32>>,
}

impl ConvNet {
    pub fn in_channels(&self) -> usize {
        self.convs[0].in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.convs.last().map_or(0, |c| c.out_channels)
    }

    pub fn forward(&self, input: &Tensor<f32>) -> Result<Tensor<f32>> {
        let mut x = self.convs[0].forward(input)?;
        for (conv, slopes) in self.convs[1..].iter().zip(&self.slopes) {
            prelu(&mut x, slopes);
            x = conv.forward(&x)?;
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct, unoptimized convolution used as an oracle.
    fn naive(conv: &Conv2d, x: &Tensor<f32>) -> Tensor<f32> {
        let (h, w) = (x.height() as isize, x.width() as isize);
        Tensor::from_fn(conv.out_channels, x.height(), x.width(), |o, y, xx| {
            let mut acc = conv.bias[o];
            for i in 0..conv.in_channels {
                for ky in 0..3isize {
                    for kx in 0..3isize {
                        let (sy, sx) = (y as isize + ky - 1, xx as isize + kx - 1);
                        if sy >= 0 && sy < h && sx >= 0 && sx < w {
                            let wi = ((o * conv.in_channels + i) * 3 + ky as usize) * 3 + kx as usize;
                            acc += conv.weight[wi] * x.get(i, sy as usize, sx as usize);
                        }
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn matches_naive_convolution() {
        let conv = Conv2d {
            in_channels: 2,
            out_channels: 3,
            weight: (0..54).map(|i| ((i * 37 % 17) as f32 - 8.0) / 8.0).collect(),
            bias: vec![0.5, -0.25, 0.0],
        };
        let x = Tensor::from_fn(2, 4, 5, |c, h, w| (c * 20 + h * 5 + w) as f32 / 10.0 - 1.0);
        let fast = conv.forward(&x).unwrap();
        let slow = naive(&conv, &x);
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn one_by_one_input() {
        let conv = Conv2d { in_channels: 1, out_channels: 1, weight: vec![1.0; 9], bias: vec![0.0] };
        let x = Tensor::from_vec(1, 1, 1, vec![2.0]).unwrap();
        assert_eq!(conv.forward(&x).unwrap().data(), &[2.0]);
    }

    #[test]
    fn prelu_scales_negatives() {
        let mut t = Tensor::from_vec(2, 1, 2, vec![-1.0, 2.0, -4.0, 0.5]).unwrap();
        prelu(&mut t, &[0.25, 0.5]);
        assert_eq!(t.data(), &[-0.25, 2.0, -2.0, 0.5]);
    }
}
