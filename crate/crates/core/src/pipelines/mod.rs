//! Calibration strategies, Rubin pooling and the cross-validation drivers.

pub mod approaches;
pub mod folds;
pub mod pooling;
pub mod prediction;

pub use approaches::{
    fit_pooled, imputation_seed, naive_seed, partition_seed, run_approach1, run_approach2, run_methods,
    run_naive, Method, Protocol, RunSettings,
};
pub use folds::{make_folds, FoldPartition};
pub use pooling::{average_step_functions, mean_design, pool_rubin, pooled_beta, PooledCoxModel, PoolVariant};
pub use prediction::{Combine, PredictionSet};
