//! The hierarchical latent model: configuration, weights and the forward
//! passes that turn decoded context into coding distributions.

mod config;
mod forward;
mod golden;
pub mod nn;
mod weights;

pub use config::{Mode, ModelConfig, LITE_WIDTHS};
pub use forward::{level_grid, snap, weak_ar_mean, ContextD, LogisticField, ShvcModel, WeakArParams, PARAM_GRID};
pub use golden::{GoldenReport, GoldenVectors, GOLDEN_MAGIC, GOLDEN_TOLERANCE, GOLDEN_VERSION};
pub use weights::{
    context_name, expected_layout, fnv1a64, head_name, network_specs, posterior_name, top_name, ModelWeights,
    NetSpec, WeightRecord, NET_DEPTH, WEIGHT_MAGIC, WEIGHT_VERSION,
};
pub(crate) use weights::Reader;
