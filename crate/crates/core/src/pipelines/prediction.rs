use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imputation::Diagnostics;

/// Rule for reducing the K predictions of a subject to one value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    #[default]
    Mean,
    Median,
    LogitMean,
}

impl Combine {
    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Combine::Mean => {
                // shifted by the first value so identical constituents combine exactly
                let first = values[0];
                first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64
            }
            Combine::Median => {
                let mut v = values.to_vec();
                v.sort_by(f64::total_cmp);
                let m = v.len() / 2;
                if v.len() % 2 == 1 {
                    v[m]
                } else {
                    0.5 * (v[m - 1] + v[m])
                }
            }
            Combine::LogitMean => {
                const EPS: f64 = 1e-12;
                let z = values
                    .iter()
                    .map(|&p| {
                        let p = p.clamp(EPS, 1.0 - EPS);
                        (p / (1.0 - p)).ln()
                    })
                    .sum::<f64>()
                    / values.len() as f64;
                1.0 / (1.0 + (-z).exp())
            }
        }
    }
}

impl std::str::FromStr for Combine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Combine::Mean),
            "median" => Ok(Combine::Median),
            "logit_mean" | "logit-mean" => Ok(Combine::LogitMean),
            other => Err(Error::Parameter(format!("unknown combine rule `{other}`"))),
        }
    }
}

/// Survival predictions for a set of subjects: one n × K matrix per horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    horizons: Vec<f64>,
    constituents: Vec<Array2<f64>>,
    had_missing: Vec<bool>,
    combined: Vec<Vec<f64>>,
    combine: Combine,
    own_outcome_used: Vec<bool>,
    diagnostics: Diagnostics,
}

impl PredictionSet {
    pub fn new(
        horizons: Vec<f64>,
        constituents: Vec<Array2<f64>>,
        had_missing: Vec<bool>,
        own_outcome_used: Vec<bool>,
        combine: Combine,
    ) -> Result<Self> {
        if constituents.len() != horizons.len() {
            return Err(Error::Shape("one prediction matrix per horizon expected".into()));
        }
        let n = had_missing.len();
        if own_outcome_used.len() != n {
            return Err(Error::Shape("taint flags do not match subject count".into()));
        }
        let k = constituents.first().map_or(0, |c| c.ncols());
        for c in &constituents {
            if c.dim() != (n, k) {
                return Err(Error::Shape(format!(
                    "prediction matrix is {:?}, expected ({n}, {k})",
                    c.dim()
                )));
            }
            if c.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Validation("prediction outside [0, 1]".into()));
            }
        }
        let combined = constituents
            .iter()
            .map(|c| {
                c.rows()
                    .into_iter()
                    .map(|r| combine.apply(r.as_slice().expect("standard layout")))
                    .collect()
            })
            .collect();
        Ok(Self {
            horizons,
            constituents,
            had_missing,
            combined,
            combine,
            own_outcome_used,
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn with_diagnostics(mut self, diagnostics: Diagnostics) -> Self {
        self.diagnostics = diagnostics;
        self
    }

    /// Imputation fallbacks accumulated over every imputation behind this set.
    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn horizons(&self) -> &[f64] {
        &self.horizons
    }

    pub fn n(&self) -> usize {
        self.had_missing.len()
    }

    pub fn k(&self) -> usize {
        self.constituents.first().map_or(0, |c| c.ncols())
    }

    /// n × K matrix of predictions at horizon index `h`.
    pub fn constituents(&self, h: usize) -> ArrayView2<'_, f64> {
        self.constituents[h].view()
    }

    pub fn combined(&self, h: usize) -> &[f64] {
        &self.combined[h]
    }

    pub fn had_missing(&self) -> &[bool] {
        &self.had_missing
    }

    pub fn combine_rule(&self) -> Combine {
        self.combine
    }

    /// Whether a subject's own outcome entered any step leading to its
    /// prediction. Always false for the full cross-validation protocols.
    pub fn own_outcome_used(&self) -> &[bool] {
        &self.own_outcome_used
    }

    /// Same predictions reduced with a different rule.
    pub fn recombined(&self, combine: Combine) -> Self {
        Self::new(
            self.horizons.clone(),
            self.constituents.clone(),
            self.had_missing.clone(),
            self.own_outcome_used.clone(),
            combine,
        )
        .expect("shape already validated")
        .with_diagnostics(self.diagnostics)
    }
}
