//! Multiple imputation of missing predictors, with the censored outcome
//! entering the imputation models through its Nelson-Aalen transform.

pub mod augment;
pub mod chained;
pub mod models;

pub use augment::{build_augmented, AugmentedDataset, PredictorBlock, RowRole};
pub use chained::{
    impute_chained, impute_single, impute_with_seeds, Diagnostics, ImputationOptions,
    ImputationStack, ImputedCopy, Origin,
};
