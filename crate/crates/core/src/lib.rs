pub mod ans;
pub mod container;
pub mod dist;
pub mod error;
pub mod image;
pub mod model;
pub mod selftest;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
