//! Censored quantile regression with neural networks.
//!
//! The crate provides synthetic censored data generators, a small MLP with
//! manual backpropagation, Portnoy-style censored quantile losses, four
//! training procedures and the evaluation metrics used to compare them.

pub mod algo;
pub mod data;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod seed;
pub mod synthgen;

pub use algo::{Method, TrainConfig, TrainedQuantileModel};
pub use data::{CensoredDataset, DatasetKind, Standardizer};
pub use distributions::DistSpec;
pub use error::{Error, Result};
pub use loss::{PseudoValue, QuantileGrid};
pub use metrics::MetricReport;
pub use synthgen::{Type1Name, Type1Spec};
