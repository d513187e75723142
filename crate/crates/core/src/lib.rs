pub mod cli;
pub mod concentration;
pub mod config;
pub mod dobrushin;
pub mod error;
pub mod kernel_exact;
pub mod models;
pub mod rng;
pub mod sampler;
pub mod space;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
