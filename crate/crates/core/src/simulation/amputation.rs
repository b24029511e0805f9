use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed;
use crate::survival::data::SurvivalDataset;

/// Column that loses values.
const TARGET: usize = 0;
/// Column driving MAR deletion.
const DRIVER: usize = 1;

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("missing fraction {fraction} not in (0, 1)")))
    }
}

/// Deletes each subject's first predictor independently with probability `fraction`.
pub fn induce_mcar(data: &SurvivalDataset, fraction: f64, seed: u64) -> Result<SurvivalDataset> {
    check_fraction(fraction)?;
    let mut rng = seed::rng(seed);
    let cells: Vec<(usize, usize)> = (0..data.n())
        .filter(|_| rng.random_bool(fraction))
        .map(|i| (i, TARGET))
        .collect();
    Ok(data.with_missing(cells))
}

/// Min-max normalized second predictor, divided by its mean.
fn relative_driver(data: &SurvivalDataset) -> Result<Vec<f64>> {
    let col = data.predictors().column(DRIVER);
    let (lo, hi) = col
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(Error::Degenerate(
            "second predictor is constant; MAR probabilities are undefined".into(),
        ));
    }
    let star: Vec<f64> = col.iter().map(|&v| (v - lo) / (hi - lo)).collect();
    let mean = star.iter().sum::<f64>() / star.len() as f64;
    Ok(star.into_iter().map(|s| s / mean).collect())
}

fn expected_fraction(rel: &[f64], m: f64) -> f64 {
    rel.iter().map(|r| (r * m).min(1.0)).sum::<f64>() / rel.len() as f64
}

/// Solves `mean(min(rel_i · M, 1)) = target` for M by bisection.
pub fn calibrate_mar_multiplier(data: &SurvivalDataset, target: f64) -> Result<f64> {
    check_fraction(target)?;
    let rel = relative_driver(data)?;
    let mut hi = 1.0;
    while expected_fraction(&rel, hi) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Parameter(format!(
                "missing fraction {target} is not reachable under MAR"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_fraction(&rel, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Per-subject MAR deletion probabilities `min(X2* · M / mean(X2*), 1)`.
pub fn mar_probabilities(data: &SurvivalDataset, m: f64) -> Result<Vec<f64>> {
    Ok(relative_driver(data)?
        .into_iter()
        .map(|r| (r * m).min(1.0))
        .collect())
}

/// Deletes the first predictor with probability increasing in the second,
/// calibrated so the expected missing fraction equals `fraction`.
pub fn induce_mar(data: &SurvivalDataset, fraction: f64, seed: u64) -> Result<SurvivalDataset> {
    let m = calibrate_mar_multiplier(data, fraction)?;
    let probs = mar_probabilities(data, m)?;
    let mut rng = seed::rng(seed);
    let cells: Vec<(usize, usize)> = probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| rng.random_bool(p))
        .map(|(i, _)| (i, TARGET))
        .collect();
    Ok(data.with_missing(cells))
}
