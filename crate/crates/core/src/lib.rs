//! Cox regression with multiple imputation for survival prediction under
//! missing predictors.
//!
//! The survival estimators and assessment statistics are generic over the
//! scalar type (`f32`, `f64`, and exact rationals where only field
//! operations are needed). Imputation, the calibration pipelines and the
//! simulation work in `f64`.

pub mod assessment;
pub mod error;
pub mod imputation;
pub mod io;
pub mod linalg;
pub mod pipelines;
pub mod scalar;
pub mod seed;
pub mod simulation;
pub mod survival;

pub use error::{Error, Result};
pub use scalar::{Field, Real};
pub use survival::{
    fit_cox, predict_survival, ColumnKind, CoxFit, StepFunction, SurvivalCurve, SurvivalDataset,
    SurvivalModel,
};

pub type CoxFit64 = survival::CoxFit<f64>;
pub type CoxFit32 = survival::CoxFit<f32>;
pub type StepFunction64 = survival::StepFunction<f64>;
pub type StepFunction32 = survival::StepFunction<f32>;
pub type SurvivalCurve64 = survival::SurvivalCurve<f64>;
pub type DesignMatrix64 = survival::DesignMatrix<f64>;
pub type PooledCoxModel64 = pipelines::PooledCoxModel<f64>;
