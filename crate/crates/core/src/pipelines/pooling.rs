use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::survival::cox::{CoxFit, SurvivalModel};
use crate::survival::design::DesignMatrix;
use crate::survival::estimators::breslow;
use crate::survival::step::StepFunction;

/// How the baseline hazard of the pooled model is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoolVariant {
    /// Pointwise mean of the per-imputation baseline cumulative hazards.
    #[serde(rename = "2A")]
    AverageBaseline,
    /// Breslow re-estimate from the pooled coefficients on the mean-imputed
    /// calibration design.
    #[serde(rename = "2B")]
    BreslowOnMeanData,
}

/// Cox model with Rubin-pooled coefficients and a pooled baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledCoxModel<T> {
    pub beta_mi: Vec<T>,
    pub baseline_mi: StepFunction<T>,
    pub variant: PoolVariant,
}

impl<T: Real> SurvivalModel<T> for PooledCoxModel<T> {
    fn coefficients(&self) -> &[T] {
        &self.beta_mi
    }

    fn baseline(&self) -> &StepFunction<T> {
        &self.baseline_mi
    }
}

/// Mean of the per-imputation coefficient vectors.
pub fn pooled_beta<T: Real>(fits: &[CoxFit<T>]) -> Result<Vec<T>> {
    let first = fits
        .first()
        .ok_or_else(|| Error::Parameter("cannot pool an empty list of fits".into()))?;
    let q = first.beta.len();
    if let Some(f) = fits.iter().find(|f| f.beta.len() != q) {
        return Err(Error::Shape(format!(
            "fits disagree on coefficient count ({} vs {q})",
            f.beta.len()
        )));
    }
    let k = T::from_count(fits.len());
    Ok((0..q)
        .map(|a| fits.iter().fold(T::zero(), |s, f| s + f.beta[a]) / k)
        .collect())
}

/// Pointwise mean of cumulative hazards over the union of their knots.
pub fn average_step_functions<T: Real>(fns: &[&StepFunction<T>]) -> StepFunction<T> {
    let mut knots: Vec<T> = fns.iter().flat_map(|f| f.knots().iter().copied()).collect();
    knots.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
    knots.dedup();
    let k = T::from_count(fns.len());
    let values = knots
        .iter()
        .map(|&t| fns.iter().fold(T::zero(), |s, f| s + f.eval(t)) / k)
        .collect();
    StepFunction::from_parts_unchecked(knots, values)
}

/// Elementwise mean of designs with identical shape.
pub fn mean_design<T: Real>(designs: &[&DesignMatrix<T>]) -> Result<DesignMatrix<T>> {
    let first = designs
        .first()
        .ok_or_else(|| Error::Parameter("no designs to average".into()))?;
    let dim = first.values().dim();
    let mut acc = Array2::<T>::zeros(dim);
    for d in designs {
        if d.values().dim() != dim {
            return Err(Error::Shape("imputed designs differ in shape".into()));
        }
        acc.zip_mut_with(d.values(), |a, b| *a = *a + *b);
    }
    let k = T::from_count(designs.len());
    acc.mapv_inplace(|v| v / k);
    DesignMatrix::from_array(acc)
}

/// Rubin pooling of K Cox fits.
///
/// `mean_imputed_calibration`, `time` and `status` are only consulted for
/// [`PoolVariant::BreslowOnMeanData`].
pub fn pool_rubin<T: Real>(
    fits: &[CoxFit<T>],
    variant: PoolVariant,
    mean_imputed_calibration: Option<&DesignMatrix<T>>,
    time: &[T],
    status: &[bool],
) -> Result<PooledCoxModel<T>> {
    let beta_mi = pooled_beta(fits)?;
    let baseline_mi = match variant {
        PoolVariant::AverageBaseline => {
            let bases: Vec<&StepFunction<T>> = fits.iter().map(|f| &f.baseline_cumhaz).collect();
            average_step_functions(&bases)
        }
        PoolVariant::BreslowOnMeanData => {
            let design = mean_imputed_calibration.ok_or_else(|| {
                Error::Parameter("variant 2B needs the mean-imputed calibration design".into())
            })?;
            breslow(design, time, status, &beta_mi)?
        }
    };
    Ok(PooledCoxModel {
        beta_mi,
        baseline_mi,
        variant,
    })
}
