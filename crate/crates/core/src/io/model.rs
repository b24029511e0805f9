use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imputation::PredictorBlock;
use crate::pipelines::{fit_pooled, Method, PooledCoxModel, RunSettings};
use crate::survival::{DesignSpec, SurvivalDataset, SurvivalModel};

/// A pooled prediction rule written by `coxmi fit`.
///
/// Only approaches 2A and 2B give a single model; approach 1 needs the
/// calibration data at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub method: Method,
    pub k: usize,
    pub seed: u64,
    pub spec: DesignSpec,
    pub model: PooledCoxModel<f64>,
}

impl SavedModel {
    pub fn fit(data: &SurvivalDataset, method: Method, settings: &RunSettings) -> Result<Self> {
        let variant = match (method.is_naive(), method.pool_variant()) {
            (false, Some(v)) => v,
            _ => {
                return Err(Error::Parameter(format!(
                    "only ap2A and ap2B produce a single model; {method} predictions need `predict --calibration`"
                )))
            }
        };
        let (spec, model) = fit_pooled(data, variant, settings)?;
        Ok(Self {
            method,
            k: settings.k,
            seed: settings.seed,
            spec,
            model,
        })
    }

    /// Survival probabilities, one row per subject and one column per horizon.
    /// New rows must be fully observed.
    pub fn predict(&self, block: &PredictorBlock, horizons: &[f64]) -> Result<Array2<f64>> {
        let incomplete: Vec<usize> = block
            .missing
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(_, r)| r.iter().any(|m| *m))
            .map(|(i, _)| i + 1)
            .collect();
        if !incomplete.is_empty() {
            return Err(Error::Validation(format!(
                "rows {incomplete:?} have missing predictors; impute them jointly with `predict --calibration`"
            )));
        }
        let mut x = vec![0.0; self.spec.width()];
        let mut out = Array2::zeros((block.nrows(), horizons.len()));
        for (i, row) in block.values.rows().into_iter().enumerate() {
            self.spec.encode_row(row, &mut x)?;
            let s = self.model.predict_survival(&x, horizons)?;
            out.row_mut(i).assign(&ndarray::ArrayView1::from(&s));
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Wide survival table: `subject,S(t1),S(t2),...` with 1-based subjects.
pub fn write_survival_csv<W: Write>(writer: W, horizons: &[f64], survival: &Array2<f64>) -> Result<()> {
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["subject".to_string()];
    header.extend(horizons.iter().map(|t| format!("S({t})")));
    w.write_record(&header).map_err(ser)?;
    for (i, row) in survival.rows().into_iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))
}
