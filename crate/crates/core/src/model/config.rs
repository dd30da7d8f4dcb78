use crate::error::{Error, Result};

/// Dependency structure of the data likelihood and first posterior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Every data sub-block is conditioned on the first latent.
    Shvc,
    /// Sub-blocks `split..k^2` of the data ignore the latent, and the first
    /// posterior only reads sub-blocks `0..split`.
    Arib,
}

impl Mode {
    pub fn to_u8(self) -> u8 {
        match self {
            Mode::Shvc => 0,
            Mode::Arib => 1,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Mode::Shvc),
            1 => Ok(Mode::Arib),
            _ => Err(Error::InvalidConfig(format!("unknown model mode {v}"))),
        }
    }
}

/// Hidden widths of the small four-layer networks, one per level (data first).
pub const LITE_WIDTHS: [usize; 5] = [32, 24, 16, 8, 8];

/// Shape of the latent hierarchy and of every network in it.
///
/// Level 0 is the image `x`; level `l >= 1` is the latent `z^(l)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    /// Number of latent layers `L`.
    pub layers: usize,
    /// Space-to-depth scale factor; every variable is split into `k^2` sub-blocks.
    pub k: usize,
    /// Image channels.
    pub channels: usize,
    /// Number of data sub-blocks the first posterior may read (ArIB only).
    pub split: usize,
    pub mode: Mode,
    /// Logistic mixture components for the data likelihood.
    pub mixtures: usize,
    /// Hidden width per level, `layers + 1` entries.
    pub widths: Vec<usize>,
    /// Channels of each latent, `layers` entries.
    pub latent_channels: Vec<usize>,
    /// Spatial downsampling from level `l - 1` to level `l`, `layers` entries.
    pub downsample: Vec<usize>,
    /// Seed for [`crate::model::ModelWeights::init_seeded`].
    pub seed: u64,
}

impl ModelConfig {
    /// The small default model: `k = 2`, RGB, five mixture components,
    /// 32/24/16/8 hidden widths and halving resolution at every layer.
    pub fn lite(layers: usize, mode: Mode) -> Self {
        let layers = layers.clamp(1, 4);
        Self {
            layers,
            k: 2,
            channels: 3,
            split: 2,
            mode,
            mixtures: 5,
            widths: LITE_WIDTHS[..=layers].to_vec(),
            latent_channels: vec![3; layers],
            downsample: vec![2; layers],
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(1..=4).contains(&self.layers) {
            return bad(format!("layers must be in 1..=4, got {}", self.layers));
        }
        if self.k == 0 || self.k > 8 {
            return bad(format!("k must be in 1..=8, got {}", self.k));
        }
        if self.channels == 0 || self.mixtures == 0 {
            return bad("channels and mixtures must be positive".into());
        }
        if self.mode == Mode::Arib && !(1..self.k * self.k).contains(&self.split) {
            return bad(format!(
                "split must be in 1..{} for ArIB, got {}",
                self.k * self.k,
                self.split
            ));
        }
        if self.widths.len() != self.layers + 1
            || self.latent_channels.len() != self.layers
            || self.downsample.len() != self.layers
        {
            return bad("per-level vectors have the wrong length".into());
        }
        if self.widths.iter().chain(&self.latent_channels).chain(&self.downsample).any(|&v| v == 0) {
            return bad("widths, latent channels and downsample factors must be positive".into());
        }
        // context features and the first posterior move between resolutions
        // H / d and H / k, so the two factors must divide one another
        for &d in &self.downsample {
            if d % self.k != 0 && self.k % d != 0 {
                return bad(format!("downsample factor {d} and k = {} are incommensurate", self.k));
            }
        }
        Ok(())
    }

    /// Number of sub-blocks per variable.
    pub fn num_subblocks(&self) -> usize {
        self.k * self.k
    }

    /// Channels of the variable at `level`.
    pub fn level_channels(&self, level: usize) -> usize {
        if level == 0 {
            self.channels
        } else {
            self.latent_channels[level - 1]
        }
    }

    /// Mixture components used by the prior of `level`.
    pub fn level_mixtures(&self, level: usize) -> usize {
        if level == 0 {
            self.mixtures
        } else {
            1
        }
    }

    /// Image height and width must be multiples of this.
    pub fn required_multiple(&self) -> usize {
        self.k * self.downsample.iter().product::<usize>()
    }

    /// `(height, width)` of every level for an image of the given size.
    pub fn level_dims(&self, height: usize, width: usize) -> Result<Vec<(usize, usize)>> {
        let m = self.required_multiple();
        if height == 0 || height % m != 0 {
            return Err(Error::Indivisible { dim: "height", size: height, k: m });
        }
        if width == 0 || width % m != 0 {
            return Err(Error::Indivisible { dim: "width", size: width, k: m });
        }
        let mut dims = vec![(height, width)];
        let (mut h, mut w) = (height, width);
        for &d in &self.downsample {
            h /= d;
            w /= d;
            dims.push((h, w));
        }
        Ok(dims)
    }

    /// Whether sub-block `i` of `level` is conditioned on the latent above it.
    pub fn head_sees_latent(&self, level: usize, i: usize) -> bool {
        if level >= self.layers {
            return false;
        }
        !(self.mode == Mode::Arib && level == 0 && i >= self.split)
    }

    /// Output channels of a prior head for `level`: per channel `c` one alpha,
    /// `c` betas and mean offset, log-scale and logit per component.
    pub fn head_out_channels(&self, level: usize) -> usize {
        let c = self.level_channels(level);
        let m = self.level_mixtures(level);
        c * (1 + 3 * m) + c * (c - 1) / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lite_configs_validate() {
        for l in 1..=4 {
            for mode in [Mode::Shvc, Mode::Arib] {
                ModelConfig::lite(l, mode).validate().unwrap();
            }
        }
    }

    #[test]
    fn split_bounds() {
        let mut c = ModelConfig::lite(1, Mode::Arib);
        c.split = 0;
        assert!(c.validate().is_err());
        c.split = 4;
        assert!(c.validate().is_err());
        c.split = 3;
        c.validate().unwrap();
    }

    #[test]
    fn dims_follow_downsampling() {
        let c = ModelConfig::lite(3, Mode::Shvc);
        assert_eq!(c.required_multiple(), 16);
        assert_eq!(c.level_dims(32, 16).unwrap(), vec![(32, 16), (16, 8), (8, 4), (4, 2)]);
        assert!(c.level_dims(24, 16).is_err());
    }

    #[test]
    fn head_widths() {
        let c = ModelConfig::lite(1, Mode::Shvc);
        // 3 * (1 + 15) + 3
        assert_eq!(c.head_out_channels(0), 51);
        // latents: 3 * 4 + 3
        assert_eq!(c.head_out_channels(1), 15);
    }

    #[test]
    fn arib_tail_heads_drop_latent() {
        let c = ModelConfig::lite(2, Mode::Arib);
        assert!(c.head_sees_latent(0, 0));
        assert!(c.head_sees_latent(0, 1));
        assert!(!c.head_sees_latent(0, 2));
        assert!(!c.head_sees_latent(0, 3));
        assert!(c.head_sees_latent(1, 3));
        assert!(!c.head_sees_latent(2, 0));
    }
}
