//! Coding schedules: the order in which distributions are pushed and popped.

use std::fmt;
use std::ops::Range;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Push,
    Pop,
}

impl Action {
    pub fn flip(self) -> Self {
        match self {
            Action::Push => Action::Pop,
            Action::Pop => Action::Push,
        }
    }
}

/// A distribution coded by one step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Factor {
    /// `q(z^(layer) | level layer - 1)`.
    Posterior(usize),
    /// Prior sub-blocks `subblocks` of the variable at `level`, conditioned
    /// on the latent above when the model says so.
    Prior { level: usize, subblocks: Range<usize> },
}

/// One step of a schedule. Pushes run over sub-blocks, channels and sites in
/// reverse so that the matching pop sees them forward.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub action: Action,
    pub factor: Factor,
}

impl Step {
    pub fn pop(factor: Factor) -> Self {
        Self { action: Action::Pop, factor }
    }

    pub fn push(factor: Factor) -> Self {
        Self { action: Action::Push, factor }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verb = match self.action {
            Action::Push => "push",
            Action::Pop => "pop",
        };
        match &self.factor {
            Factor::Posterior(l) => write!(f, "{verb} q(z{l}|{})", var(l - 1)),
            Factor::Prior { level, subblocks } => {
                write!(f, "{verb} p({}[{}..{}])", var(*level), subblocks.start, subblocks.end)
            }
        }
    }
}

fn var(level: usize) -> String {
    if level == 0 {
        "x".into()
    } else {
        format!("z{level}")
    }
}

/// Hierarchical bits-back plan for `layers` latents over `kk` sub-blocks:
/// for each layer pop `q(z_l | v_{l-1})`, then push `p(v_{l-1} | z_l)`;
/// finally push the top prior.
pub fn bitswap_schedule(layers: usize, kk: usize) -> Vec<Step> {
    let mut steps = Vec::with_capacity(2 * layers + 1);
    for l in 1..=layers {
        steps.push(Step::pop(Factor::Posterior(l)));
        steps.push(Step::push(Factor::Prior { level: l - 1, subblocks: 0..kk }));
    }
    steps.push(Step::push(Factor::Prior { level: layers, subblocks: 0..kk }));
    steps
}

/// Autoregressive-initial-bits plan: the latent-free data sub-blocks
/// `split..kk` are pushed first and fund the first posterior pop.
pub fn arib_schedule(layers: usize, kk: usize, split: usize) -> Vec<Step> {
    let mut steps = vec![
        Step::push(Factor::Prior { level: 0, subblocks: split..kk }),
        Step::pop(Factor::Posterior(1)),
        Step::push(Factor::Prior { level: 0, subblocks: 0..split }),
    ];
    steps.extend(bitswap_schedule(layers, kk).into_iter().skip(2));
    steps
}

/// The decoder runs the encoder's steps backwards with every push and pop
/// exchanged.
pub fn decode_schedule(encode: &[Step]) -> Vec<Step> {
    encode.iter().rev().map(|s| Step { action: s.action.flip(), factor: s.factor.clone() }).collect()
}
