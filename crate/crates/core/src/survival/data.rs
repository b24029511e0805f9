use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a predictor column is stored and modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    /// Stored as 0.0 / 1.0.
    Binary,
    /// Stored as a level index in `0..levels`.
    Categorical { levels: usize },
}

/// Right-censored survival outcomes plus a predictor matrix with an explicit
/// missingness mask.
///
/// Missing cells hold `0.0` in `predictors`; every consumer must consult the
/// mask instead of the value.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    time: Vec<f64>,
    status: Vec<bool>,
    predictors: Array2<f64>,
    missing: Array2<bool>,
    kinds: Vec<ColumnKind>,
    names: Vec<String>,
}

impl SurvivalDataset {
    pub fn new(
        time: Vec<f64>,
        status: Vec<bool>,
        mut predictors: Array2<f64>,
        missing: Array2<bool>,
        kinds: Vec<ColumnKind>,
    ) -> Result<Self> {
        let n = time.len();
        let p = kinds.len();
        if n < 2 {
            return Err(Error::Shape(format!("need at least 2 subjects, got {n}")));
        }
        if p < 1 {
            return Err(Error::Shape("need at least one predictor column".into()));
        }
        if status.len() != n || predictors.dim() != (n, p) || missing.dim() != (n, p) {
            return Err(Error::Shape(format!(
                "time {n}, status {}, predictors {:?}, mask {:?}, kinds {p}",
                status.len(),
                predictors.dim(),
                missing.dim()
            )));
        }
        if let Some(i) = time.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Validation(format!(
                "time[{i}] = {} is not a positive finite number",
                time[i]
            )));
        }
        for ((i, j), v) in predictors.indexed_iter_mut() {
            if missing[[i, j]] {
                *v = 0.0;
                continue;
            }
            check_cell(*v, kinds[j]).map_err(|msg| {
                Error::Validation(format!("predictor cell ({i}, {j}) = {v}: {msg}"))
            })?;
        }
        let names = (0..p).map(|j| format!("x{}", j + 1)).collect();
        Ok(Self {
            time,
            status,
            predictors,
            missing,
            kinds,
            names,
        })
    }

    /// Fully observed dataset of continuous predictors.
    pub fn complete(time: Vec<f64>, status: Vec<bool>, predictors: Array2<f64>) -> Result<Self> {
        let dim = predictors.dim();
        Self::new(
            time,
            status,
            predictors,
            Array2::from_elem(dim, false),
            vec![ColumnKind::Continuous; dim.1],
        )
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::Shape(format!(
                "{} names for {} columns",
                names.len(),
                self.p()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.time.len()
    }

    pub fn p(&self) -> usize {
        self.kinds.len()
    }

    pub fn time(&self) -> &[f64] {
        &self.time
    }

    pub fn status(&self) -> &[bool] {
        &self.status
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

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[[i, j]]
    }

    /// Subjects with at least one missing predictor.
    pub fn row_has_missing(&self) -> Vec<bool> {
        self.missing
            .axis_iter(Axis(0))
            .map(|row| row.iter().any(|&m| m))
            .collect()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    pub fn missing_count(&self, j: usize) -> usize {
        self.missing.column(j).iter().filter(|&&m| m).count()
    }

    /// Rows `rows` in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let out = Self {
            time: rows.iter().map(|&i| self.time[i]).collect(),
            status: rows.iter().map(|&i| self.status[i]).collect(),
            predictors: self.predictors.select(Axis(0), rows),
            missing: self.missing.select(Axis(0), rows),
            kinds: self.kinds.clone(),
            names: self.names.clone(),
        };
        if out.n() < 2 {
            return Err(Error::Shape(format!(
                "subset has {} subjects, need at least 2",
                out.n()
            )));
        }
        Ok(out)
    }

    /// Marks cells missing. Cells already missing stay missing.
    pub fn with_missing(&self, cells: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut out = self.clone();
        for (i, j) in cells {
            out.missing[[i, j]] = true;
            out.predictors[[i, j]] = 0.0;
        }
        out
    }
}

fn check_cell(v: f64, kind: ColumnKind) -> std::result::Result<(), String> {
    if !v.is_finite() {
        return Err("not finite".into());
    }
    match kind {
        ColumnKind::Continuous => Ok(()),
        ColumnKind::Binary if v == 0.0 || v == 1.0 => Ok(()),
        ColumnKind::Binary => Err("binary cell must be 0 or 1".into()),
        ColumnKind::Categorical { levels } => {
            if v.fract() == 0.0 && v >= 0.0 && (v as usize) < levels {
                Ok(())
            } else {
                Err(format!("categorical cell must be a level index below {levels}"))
            }
        }
    }
}
