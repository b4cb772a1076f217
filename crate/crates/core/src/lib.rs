pub mod cli;
pub mod driver;
pub mod error;
pub mod gradient;
pub mod ingest;
pub mod metrics;
pub mod microclusters;
pub mod numerics;
pub mod optimizer;
pub mod projection;
pub mod similarity;
pub mod spectral;

pub use error::{Error, Result};
