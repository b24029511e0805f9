use ndarray::{concatenate, Array2, Axis};

use crate::error::{Error, Result};
use crate::survival::data::{ColumnKind, SurvivalDataset};
use crate::survival::estimators::nelson_aalen;

/// Predictor rows without outcomes (the rows to be predicted).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorBlock {
    pub values: Array2<f64>,
    pub missing: Array2<bool>,
}

impl PredictorBlock {
    pub fn new(values: Array2<f64>, missing: Array2<bool>) -> Result<Self> {
        if values.dim() != missing.dim() {
            return Err(Error::Shape(format!(
                "values {:?} vs mask {:?}",
                values.dim(),
                missing.dim()
            )));
        }
        Ok(Self { values, missing })
    }

    pub fn empty(p: usize) -> Self {
        Self {
            values: Array2::zeros((0, p)),
            missing: Array2::from_elem((0, p), false),
        }
    }

    /// Predictor rows of `data` at `rows`; outcomes are dropped.
    pub fn from_rows(data: &SurvivalDataset, rows: &[usize]) -> Self {
        Self {
            values: data.predictors().select(Axis(0), rows),
            missing: data.missing().select(Axis(0), rows),
        }
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }
}

/// Calibration rows (with outcomes) stacked on top of validation rows whose
/// outcomes are missing, ready for joint imputation.
///
/// The censored outcome enters the imputation models as the calibration-set
/// Nelson-Aalen cumulative hazard at each subject's own time, plus the event
/// indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    predictors: Array2<f64>,
    missing: Array2<bool>,
    kinds: Vec<ColumnKind>,
    n_calibration: usize,
    na_transform: Vec<f64>,
    status: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowRole {
    Calibration,
    Validation,
}

impl AugmentedDataset {
    pub fn n(&self) -> usize {
        self.predictors.nrows()
    }

    pub fn p(&self) -> usize {
        self.kinds.len()
    }

    pub fn n_calibration(&self) -> usize {
        self.n_calibration
    }

    pub fn n_validation(&self) -> usize {
        self.n() - self.n_calibration
    }

    pub fn role(&self, row: usize) -> RowRole {
        if row < self.n_calibration {
            RowRole::Calibration
        } else {
            RowRole::Validation
        }
    }

    pub fn predictors(&self) -> &Array2<f64> {
        &self.predictors
    }

    pub fn missing(&self) -> &Array2<bool> {
        &self.missing
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    /// `H(T_i)` for calibration rows.
    pub fn na_transform(&self) -> &[f64] {
        &self.na_transform
    }

    /// Event indicators for calibration rows.
    pub fn calibration_status(&self) -> &[bool] {
        &self.status
    }

    /// Outcome surrogate for `row`, `None` on validation rows.
    pub fn outcome(&self, row: usize) -> Option<(f64, bool)> {
        (row < self.n_calibration).then(|| (self.na_transform[row], self.status[row]))
    }

    pub fn has_missing_predictors(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }
}

/// Stacks calibration data and validation predictors. The Nelson-Aalen
/// transform is computed from the calibration rows only.
pub fn build_augmented(
    calibration: &SurvivalDataset,
    validation: &PredictorBlock,
) -> Result<AugmentedDataset> {
    let p = calibration.p();
    if validation.values.ncols() != p || validation.missing.dim() != validation.values.dim() {
        return Err(Error::Shape(format!(
            "validation block is {:?} but calibration has {p} predictors",
            validation.values.dim()
        )));
    }
    // Validation cells must satisfy the same column kinds.
    for ((i, j), &v) in validation.values.indexed_iter() {
        if validation.missing[[i, j]] {
            continue;
        }
        let ok = match calibration.kinds()[j] {
            ColumnKind::Continuous => v.is_finite(),
            ColumnKind::Binary => v == 0.0 || v == 1.0,
            ColumnKind::Categorical { levels } => {
                v.fract() == 0.0 && v >= 0.0 && (v as usize) < levels
            }
        };
        if !ok {
            return Err(Error::Validation(format!(
                "validation cell ({i}, {j}) = {v} does not match column kind {:?}",
                calibration.kinds()[j]
            )));
        }
    }
    let h = nelson_aalen(calibration.time(), calibration.status());
    let na_transform = calibration.time().iter().map(|&t| h.eval(t)).collect();
    let mut validation_values = validation.values.clone();
    validation_values
        .iter_mut()
        .zip(validation.missing.iter())
        .filter(|(_, &m)| m)
        .for_each(|(v, _)| *v = 0.0);
    Ok(AugmentedDataset {
        predictors: concatenate![Axis(0), *calibration.predictors(), validation_values],
        missing: concatenate![Axis(0), *calibration.missing(), validation.missing],
        kinds: calibration.kinds().to_vec(),
        n_calibration: calibration.n(),
        na_transform,
        status: calibration.status().to_vec(),
    })
}
