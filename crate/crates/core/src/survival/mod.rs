//! Survival estimators: Cox regression, Breslow, Nelson-Aalen, Kaplan-Meier.

pub mod cox;
pub mod data;
pub mod design;
pub mod estimators;
pub mod step;

pub use cox::{fit_cox, fit_cox_with, predict_survival, CoxFit, CoxOptions, PartialLikelihood, SurvivalModel};
pub use data::{ColumnKind, SurvivalDataset};
pub use design::{DesignColumn, DesignMatrix, DesignSpec};
pub use estimators::{breslow, kaplan_meier, kaplan_meier_censoring, nelson_aalen};
pub use step::{StepFunction, SurvivalCurve};
