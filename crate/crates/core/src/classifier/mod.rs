//! Per-feature SVMs, score fusion and evaluation metrics.

mod fusion;
mod metrics;
mod scaler;
pub mod svm;

pub use fusion::{fuse, FusionRule};
pub use metrics::{evaluate, EvalReport, RocPoint};
pub use scaler::Standardizer;
pub use svm::{grid_search, train_svm, GridPoint, SvmFit, SvmModel, SvmParams};
