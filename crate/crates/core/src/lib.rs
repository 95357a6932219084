pub mod baseline;
pub mod brnn;
pub mod cli;
pub mod config;
pub mod cuttlefish;
pub mod dataset;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod pca;
pub mod pipeline;
pub mod preprocess;
pub mod rng;

pub use error::{Error, Result};
