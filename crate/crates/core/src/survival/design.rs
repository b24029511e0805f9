use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::survival::data::{ColumnKind, SurvivalDataset};

/// One design column: a copy of predictor `source`, or the indicator of
/// `source == level` for categorical predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignColumn {
    pub source: usize,
    pub level: Option<usize>,
}

/// Mapping from predictor columns to design columns.
///
/// Categorical predictors are dummy coded with the first observed level as
/// the reference. Levels never observed get no column; encoding such a level
/// is an error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kinds: Vec<ColumnKind>,
    pub columns: Vec<DesignColumn>,
    /// Reference level per categorical source column (None for others).
    pub reference: Vec<Option<usize>>,
}

impl DesignSpec {
    pub fn from_dataset(data: &SurvivalDataset) -> Self {
        Self::from_parts(data.kinds(), data.predictors(), data.missing())
    }

    /// Spec from column kinds and the observed cells of `values`.
    pub fn from_parts(kinds: &[ColumnKind], values: &Array2<f64>, missing: &Array2<bool>) -> Self {
        let mut columns = Vec::new();
        let mut reference = Vec::with_capacity(kinds.len());
        for (j, kind) in kinds.iter().enumerate() {
            match *kind {
                ColumnKind::Continuous | ColumnKind::Binary => {
                    columns.push(DesignColumn {
                        source: j,
                        level: None,
                    });
                    reference.push(None);
                }
                ColumnKind::Categorical { levels } => {
                    let mut seen = vec![false; levels];
                    for i in 0..values.nrows() {
                        if !missing[[i, j]] {
                            seen[values[[i, j]] as usize] = true;
                        }
                    }
                    let observed: Vec<usize> = (0..levels).filter(|&l| seen[l]).collect();
                    reference.push(observed.first().copied());
                    columns.extend(observed.iter().skip(1).map(|&l| DesignColumn {
                        source: j,
                        level: Some(l),
                    }));
                }
            }
        }
        Self {
            kinds: kinds.to_vec(),
            columns,
            reference,
        }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn encode_row<T: Real>(&self, row: ArrayView1<f64>, out: &mut [T]) -> Result<()> {
        if row.len() != self.kinds.len() || out.len() != self.width() {
            return Err(Error::Shape(format!(
                "row of {} predictors / {} outputs for a spec of {} predictors / {} columns",
                row.len(),
                out.len(),
                self.kinds.len(),
                self.width()
            )));
        }
        for (j, kind) in self.kinds.iter().enumerate() {
            if let ColumnKind::Categorical { .. } = kind {
                let level = row[j] as usize;
                let known = self.reference[j] == Some(level)
                    || self
                        .columns
                        .iter()
                        .any(|c| c.source == j && c.level == Some(level));
                if !known {
                    return Err(Error::Validation(format!(
                        "level {level} of column {j} was not observed when the design was built"
                    )));
                }
            }
        }
        for (slot, col) in out.iter_mut().zip(&self.columns) {
            let v = row[col.source];
            *slot = match col.level {
                None => T::lit(v),
                Some(l) => {
                    if v as usize == l {
                        T::one()
                    } else {
                        T::zero()
                    }
                }
            };
        }
        Ok(())
    }

    /// Encodes a completed predictor matrix (no missing cells).
    pub fn encode<T: Real>(&self, predictors: &Array2<f64>) -> Result<DesignMatrix<T>> {
        let n = predictors.nrows();
        let mut values = Array2::<T>::zeros((n, self.width()));
        let mut buf = vec![T::zero(); self.width()];
        for i in 0..n {
            self.encode_row(predictors.row(i), &mut buf)?;
            values.row_mut(i).iter_mut().zip(&buf).for_each(|(d, s)| *d = *s);
        }
        Ok(DesignMatrix {
            values,
            columns: self.columns.clone(),
        })
    }
}

/// Fully observed n×q model matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    values: Array2<T>,
    columns: Vec<DesignColumn>,
}

impl<T: Real> DesignMatrix<T> {
    /// Raw design whose columns map one-to-one onto predictor columns.
    pub fn from_array(values: Array2<T>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("design matrix has non-finite entries".into()));
        }
        let columns = (0..values.ncols())
            .map(|j| DesignColumn {
                source: j,
                level: None,
            })
            .collect();
        Ok(Self { values, columns })
    }

    /// Design with no columns (null model) for `n` subjects.
    pub fn empty(n: usize) -> Self {
        Self {
            values: Array2::zeros((n, 0)),
            columns: Vec::new(),
        }
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn columns(&self) -> &[DesignColumn] {
        &self.columns
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select(ndarray::Axis(0), rows),
            columns: self.columns.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn categorical_data() -> SurvivalDataset {
        SurvivalDataset::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![true, false, true, true],
            array![[1.0, 0.5], [2.0, 1.5], [1.0, 0.0], [0.0, 2.0]],
            array![[false, false], [false, false], [true, false], [false, false]],
            vec![ColumnKind::Categorical { levels: 4 }, ColumnKind::Continuous],
        )
        .unwrap()
    }

    #[test]
    fn first_observed_level_is_reference() {
        let spec = DesignSpec::from_dataset(&categorical_data());
        assert_eq!(spec.reference, vec![Some(0), None]);
        // levels 1 and 2 observed besides the reference; level 3 never seen
        assert_eq!(spec.width(), 3);
        let d: DesignMatrix<f64> = spec.encode(&array![[2.0, 7.0], [0.0, 1.0]]).unwrap();
        assert_eq!(d.values(), &array![[0.0, 1.0, 7.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn unseen_level_is_rejected() {
        let spec = DesignSpec::from_dataset(&categorical_data());
        assert!(spec.encode::<f64>(&array![[3.0, 0.0]]).is_err());
    }
}
