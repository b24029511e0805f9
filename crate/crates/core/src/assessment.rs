//! Evaluation statistics: the imputation-variation range R(t), the
//! IPCW Brier score, bias against known truth, and the report container.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::survival::estimators::kaplan_meier_censoring;
use crate::survival::step::SurvivalCurve;

/// Lower/upper bounds of the mid-range survival window.
pub const WINDOW_LO: f64 = 0.2;
pub const WINDOW_HI: f64 = 0.8;

/// Sample quantile by linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
pub fn quantile_sorted<T: Real>(sorted: &[T], p: T) -> T {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = T::from_count(sorted.len() - 1) * p;
    let lo = h.floor();
    let idx = lo.to_usize().unwrap_or(0).min(sorted.len() - 1);
    if idx + 1 >= sorted.len() {
        return sorted[idx];
    }
    sorted[idx] + (h - lo) * (sorted[idx + 1] - sorted[idx])
}

fn sort<T: Real>(v: &mut [T]) {
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
}

/// `(Q_0.9 − Q_0.1) × 100` over a pooled set of deviations.
pub fn percentile_range<T: Real>(mut deviations: Vec<T>) -> T {
    sort(&mut deviations);
    let q_hi = quantile_sorted(&deviations, T::lit(0.9));
    let q_lo = quantile_sorted(&deviations, T::lit(0.1));
    (q_hi - q_lo) * T::lit(100.0)
}

/// Mean shifted by the first entry, so constant rows give their value exactly.
fn row_mean<T: Real>(row: ndarray::ArrayView1<T>) -> T {
    let first = row[0];
    first + row.iter().fold(T::zero(), |s, v| s + (*v - first)) / T::from_count(row.len())
}

/// Pooled deviations from row means, over the rows accepted by `keep(row, mean)`.
fn pooled_deviations<T: Real>(
    predictions: ArrayView2<T>,
    mut keep: impl FnMut(usize, T) -> bool,
) -> Result<Vec<T>> {
    if predictions.ncols() < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 predictions per subject, got {}",
            predictions.ncols()
        )));
    }
    let mut deviations = Vec::new();
    for (i, row) in predictions.outer_iter().enumerate() {
        let mean = row_mean(row);
        if keep(i, mean) {
            deviations.extend(row.iter().map(|v| *v - mean));
        }
    }
    Ok(deviations)
}

/// Imputation-variation range R(t) for an n×m matrix of survival
/// probabilities: deviations from each subject's mean, kept only for subjects
/// whose mean lies in [0.2, 0.8], pooled, and summarized as
/// `(Q_0.9 − Q_0.1) × 100`.
pub fn variation_r<T: Real>(predictions: ArrayView2<T>) -> Result<T> {
    variation_r_rows(predictions, None)
}

/// [`variation_r`] restricted to the subjects in `rows` (a stratum).
pub fn variation_r_rows<T: Real>(predictions: ArrayView2<T>, rows: Option<&[bool]>) -> Result<T> {
    let (lo, hi) = (T::lit(WINDOW_LO), T::lit(WINDOW_HI));
    let deviations = pooled_deviations(predictions, |i, mean| {
        rows.is_none_or(|r| r[i]) && mean >= lo && mean <= hi
    })?;
    if deviations.is_empty() {
        return Err(Error::EmptyFilter(
            "no subject has a mean prediction within [0.2, 0.8]".into(),
        ));
    }
    Ok(percentile_range(deviations))
}

/// How subjects are selected by their true survival probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TruthFilter {
    /// Between the given sample quantiles of the true survival probabilities.
    Percentile { lo: f64, hi: f64 },
    /// Between the given probability values.
    Value { lo: f64, hi: f64 },
}

impl Default for TruthFilter {
    fn default() -> Self {
        TruthFilter::Percentile {
            lo: WINDOW_LO,
            hi: WINDOW_HI,
        }
    }
}

impl TruthFilter {
    /// Inclusive selection mask over `truth`.
    pub fn select<T: Real>(&self, truth: &[T]) -> Vec<bool> {
        let (lo, hi) = match *self {
            TruthFilter::Value { lo, hi } => (T::lit(lo), T::lit(hi)),
            TruthFilter::Percentile { lo, hi } => {
                if truth.is_empty() {
                    return Vec::new();
                }
                let mut sorted = truth.to_vec();
                sort(&mut sorted);
                (
                    quantile_sorted(&sorted, T::lit(lo)),
                    quantile_sorted(&sorted, T::lit(hi)),
                )
            }
        };
        truth.iter().map(|&s| s >= lo && s <= hi).collect()
    }
}

/// One simulated dataset's replicate predictions (n × R) and true survival.
pub struct SimulationPredictions<'a, T> {
    pub predictions: ArrayView2<'a, T>,
    pub truth: &'a [T],
    /// Optional stratum restriction.
    pub rows: Option<&'a [bool]>,
}

/// R(t)_s for one simulation, with subjects selected by true survival.
pub fn simulation_r<T: Real>(sim: &SimulationPredictions<T>, filter: TruthFilter) -> Result<T> {
    if sim.truth.len() != sim.predictions.nrows() {
        return Err(Error::Shape(format!(
            "{} truth values for {} subjects",
            sim.truth.len(),
            sim.predictions.nrows()
        )));
    }
    let window = filter.select(sim.truth);
    let deviations = pooled_deviations(sim.predictions, |i, _| {
        window[i] && sim.rows.is_none_or(|r| r[i])
    })?;
    if deviations.is_empty() {
        return Err(Error::EmptyFilter(
            "no subject inside the true-survival window".into(),
        ));
    }
    Ok(percentile_range(deviations))
}

/// Mean over simulations of R(t)_s. Simulations whose window is empty for the
/// requested stratum are skipped; if all are empty the filter error is returned.
pub fn simulation_variation_r<T: Real>(
    sims: &[SimulationPredictions<T>],
    filter: TruthFilter,
) -> Result<T> {
    let mut total = T::zero();
    let mut used = 0usize;
    let mut last_err = None;
    for sim in sims {
        match simulation_r(sim, filter) {
            Ok(r) => {
                total = total + r;
                used += 1;
            }
            Err(e @ Error::EmptyFilter(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(last_err.unwrap_or_else(|| Error::EmptyFilter("no simulations".into())));
    }
    Ok(total / T::from_count(used))
}

/// Mean of `prediction − truth` over subjects with `0.2 <= truth <= 0.8`.
pub fn bias_summary<T: Real>(mean_predictions: &[T], truth: &[T]) -> Result<T> {
    bias_summary_rows(mean_predictions, truth, None)
}

pub fn bias_summary_rows<T: Real>(
    mean_predictions: &[T],
    truth: &[T],
    rows: Option<&[bool]>,
) -> Result<T> {
    if mean_predictions.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} truth values",
            mean_predictions.len(),
            truth.len()
        )));
    }
    let window = TruthFilter::Value {
        lo: WINDOW_LO,
        hi: WINDOW_HI,
    }
    .select(truth);
    let mut sum = T::zero();
    let mut count = 0usize;
    for i in 0..truth.len() {
        if window[i] && rows.is_none_or(|r| r[i]) {
            sum = sum + (mean_predictions[i] - truth[i]);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyFilter(
            "no subject with true survival within [0.2, 0.8]".into(),
        ));
    }
    Ok(sum / T::from_count(count))
}

/// IPCW Brier score at `t`, with the censoring distribution estimated by
/// Kaplan-Meier from the same data.
pub fn brier_ipcw<T: Real>(predictions: &[T], time: &[T], status: &[bool], t: T) -> Result<T> {
    let g = kaplan_meier_censoring(time, status);
    brier_ipcw_with(predictions, time, status, t, &g, None)
}

/// IPCW Brier score with a supplied censoring curve, averaged over the
/// subjects selected by `rows` (all when `None`):
///
/// `BS(t) = n⁻¹ Σ Ŝ_i² 1{T_i <= t, δ_i = 1} / G(T_i−) + (1 − Ŝ_i)² 1{T_i > t} / G(t)`
pub fn brier_ipcw_with<T: Real>(
    predictions: &[T],
    time: &[T],
    status: &[bool],
    t: T,
    censoring: &SurvivalCurve<T>,
    rows: Option<&[bool]>,
) -> Result<T> {
    let n = time.len();
    if predictions.len() != n || status.len() != n || rows.is_some_and(|r| r.len() != n) {
        return Err(Error::Shape(format!(
            "{} predictions, {n} times, {} statuses",
            predictions.len(),
            status.len()
        )));
    }
    let g_t = censoring.eval(t);
    let mut sum = T::zero();
    let mut count = 0usize;
    let mut degenerate = Vec::new();
    for i in 0..n {
        if rows.is_some_and(|r| !r[i]) {
            continue;
        }
        count += 1;
        let s = predictions[i];
        if time[i] <= t {
            if status[i] {
                let w = censoring.eval_left(time[i]);
                if w > T::zero() {
                    sum = sum + s * s / w;
                } else {
                    degenerate.push(i);
                }
            }
        } else if g_t > T::zero() {
            sum = sum + (T::one() - s) * (T::one() - s) / g_t;
        } else {
            degenerate.push(i);
        }
    }
    if !degenerate.is_empty() {
        return Err(Error::DegenerateWeights {
            subjects: degenerate,
        });
    }
    if count == 0 {
        return Err(Error::EmptyFilter("no subjects selected for the Brier score".into()));
    }
    Ok(sum / T::from_count(count))
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    /// Subjects with at least one missing predictor.
    Missing,
    /// Subjects with fully observed predictors.
    Observed,
    All,
}

impl Stratum {
    pub const ALL: [Stratum; 3] = [Stratum::Missing, Stratum::Observed, Stratum::All];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stratum::Missing => "missing",
            Stratum::Observed => "observed",
            Stratum::All => "all",
        }
    }

    pub fn mask(&self, had_missing: &[bool]) -> Vec<bool> {
        had_missing
            .iter()
            .map(|&m| match self {
                Stratum::Missing => m,
                Stratum::Observed => !m,
                Stratum::All => true,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Mean IPCW Brier score across replicates (and simulations).
    BrierMean,
    /// Replicate standard deviation of the Brier score.
    BrierSd,
    /// R(t) across replicate calibrations of the combined prediction.
    RReplicates,
    /// R(t) across the K constituent predictions of one calibration.
    RIndividual,
    /// Mean bias of the replicate-averaged prediction against the truth.
    BiasMean,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::BrierMean => "brier_mean",
            Metric::BrierSd => "brier_sd",
            Metric::RReplicates => "r_replicates",
            Metric::RIndividual => "r_individual",
            Metric::BiasMean => "bias_mean",
        }
    }
}

/// One long-format report entry. `value` is `None` when the statistic is
/// undefined (e.g. replicate variation from a single replicate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub k: usize,
    pub horizon: f64,
    pub stratum: Stratum,
    pub metric: Metric,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub rows: Vec<ReportRow>,
}

impl AssessmentReport {
    pub fn push(
        &mut self,
        method: &str,
        k: usize,
        horizon: f64,
        stratum: Stratum,
        metric: Metric,
        value: Option<f64>,
    ) {
        self.rows.push(ReportRow {
            method: method.to_string(),
            k,
            horizon,
            stratum,
            metric,
            value,
        });
    }

    pub fn extend(&mut self, other: AssessmentReport) {
        self.rows.extend(other.rows);
    }

    pub fn get(
        &self,
        method: &str,
        k: usize,
        horizon: f64,
        stratum: Stratum,
        metric: Metric,
    ) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.method == method
                    && r.k == k
                    && r.horizon == horizon
                    && r.stratum == stratum
                    && r.metric == metric
            })
            .and_then(|r| r.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn type7_quantiles() {
        let v: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_sorted(&v, 0.9) - 3.7).abs() < 1e-12);
        assert_eq!(quantile_sorted(&[5.0], 0.3), 5.0);
    }

    #[test]
    fn constant_matrix_has_zero_range() {
        let m = Array2::from_elem((4, 3), 0.5);
        assert_eq!(variation_r(m.view()).unwrap(), 0.0);
        // rows whose plain sum/m would not round back to the entry
        let awkward = array![[0.7, 0.7, 0.7], [0.2999999999999999, 0.2999999999999999, 0.2999999999999999]];
        assert_eq!(variation_r(awkward.view()).unwrap(), 0.0);
    }

    #[test]
    fn rows_outside_window_are_ignored() {
        let m = array![[0.9, 0.95], [0.5, 0.5]];
        assert_eq!(variation_r(m.view()).unwrap(), 0.0);
        let only_high = array![[0.9, 0.95], [0.85, 0.99]];
        assert!(matches!(variation_r(only_high.view()), Err(Error::EmptyFilter(_))));
    }

    #[test]
    fn single_column_is_rejected() {
        let m = array![[0.5], [0.4]];
        assert!(matches!(variation_r(m.view()), Err(Error::Parameter(_))));
    }

    #[test]
    fn bias_cases() {
        let truth: [f64; 3] = [0.5, 0.3, 0.9];
        assert_eq!(bias_summary(&truth, &truth).unwrap(), 0.0);
        let shifted: [f64; 3] = [0.52, 0.32, 0.0];
        // the subject with truth 0.9 is outside the window
        assert!((bias_summary(&shifted, &truth).unwrap() - 0.02).abs() < 1e-12);
        assert!(bias_summary(&[0.1], &[0.95]).is_err());
    }

    #[test]
    fn brier_perfect_predictions() {
        let time = [1.0, 2.0, 6.0, 8.0];
        let status = [true, true, true, true];
        let preds = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(brier_ipcw(&preds, &time, &status, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn brier_degenerate_weights() {
        // a censoring curve estimated elsewhere that hits zero before t
        let g = SurvivalCurve::from_parts_unchecked(vec![1.5], vec![0.0]);
        let time = [1.0, 2.0, 3.0];
        let status = [true, true, false];
        let e = brier_ipcw_with(&[0.5, 0.5, 0.5], &time, &status, 2.5, &g, None).unwrap_err();
        assert!(matches!(e, Error::DegenerateWeights { .. }));
    }

    #[test]
    fn truth_filters() {
        let truth = [0.1, 0.3, 0.5, 0.7, 0.9];
        assert_eq!(
            TruthFilter::Value { lo: 0.2, hi: 0.8 }.select(&truth),
            vec![false, true, true, true, false]
        );
        // type-7 20th/80th percentiles are 0.26 and 0.74
        assert_eq!(
            TruthFilter::default().select(&truth),
            vec![false, true, true, true, false]
        );
        assert_eq!(
            TruthFilter::Percentile { lo: 0.3, hi: 0.6 }.select(&truth),
            vec![false, false, true, false, false]
        );
    }
}
