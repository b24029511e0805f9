//! Multiple imputation by chained equations on an augmented dataset.

use ndarray::{Array1, Array2};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::imputation::augment::AugmentedDataset;
use crate::imputation::models;
use crate::seed::{self, Rng};
use crate::survival::data::ColumnKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImputationOptions {
    /// Chained-equation sweeps after the initial random fill.
    pub cycles: usize,
    /// Donor pool size for predictive mean matching.
    pub donors: usize,
    /// Relative ridge added to `XᵀX` in the linear-regression draws.
    pub ridge: f64,
}

impl Default for ImputationOptions {
    fn default() -> Self {
        Self {
            cycles: 5,
            donors: 5,
            ridge: 1e-5,
        }
    }
}

/// Counters for draws that could not use their intended model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Model fit failed; the cells were filled by a uniform donor draw.
    pub fallback_draws: usize,
    /// Only one level observed; the cells were filled with it.
    pub single_level_fills: usize,
}

impl Diagnostics {
    pub fn merge(&mut self, other: Diagnostics) {
        self.fallback_draws += other.fallback_draws;
        self.single_level_fills += other.single_level_fills;
    }
}

/// Which pipeline position produced an imputed copy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Origin {
    pub replicate: Option<usize>,
    pub imputation: usize,
    pub fold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputedCopy {
    pub predictors: Array2<f64>,
    pub seed: u64,
    pub origin: Origin,
}

/// K completed predictor matrices of one augmented dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationStack {
    copies: Vec<ImputedCopy>,
    imputed: Array2<bool>,
    kinds: Vec<ColumnKind>,
    diagnostics: Diagnostics,
}

impl ImputationStack {
    pub fn k(&self) -> usize {
        self.copies.len()
    }

    pub fn copies(&self) -> &[ImputedCopy] {
        &self.copies
    }

    pub fn copy(&self, k: usize) -> &Array2<f64> {
        &self.copies[k].predictors
    }

    /// Cells that were missing in the source and are imputed in every copy.
    pub fn imputed_mask(&self) -> &Array2<bool> {
        &self.imputed
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }
}

/// `k` imputations with per-copy seeds `derive(seed, [copy])`.
pub fn impute_chained(
    aug: &AugmentedDataset,
    k: usize,
    cycles: usize,
    seed: u64,
) -> Result<ImputationStack> {
    if k < 1 {
        return Err(Error::Parameter("need at least one imputation".into()));
    }
    let seeds: Vec<(u64, Origin)> = (0..k)
        .map(|c| {
            (
                seed::derive(seed, &[c as u64]),
                Origin {
                    imputation: c,
                    ..Origin::default()
                },
            )
        })
        .collect();
    let opts = ImputationOptions {
        cycles,
        ..ImputationOptions::default()
    };
    impute_with_seeds(aug, &seeds, &opts)
}

/// One imputation per supplied seed.
pub fn impute_with_seeds(
    aug: &AugmentedDataset,
    seeds: &[(u64, Origin)],
    opts: &ImputationOptions,
) -> Result<ImputationStack> {
    if seeds.is_empty() {
        return Err(Error::Parameter("need at least one imputation".into()));
    }
    let mut diagnostics = Diagnostics::default();
    let mut copies = Vec::with_capacity(seeds.len());
    for &(s, origin) in seeds {
        let (predictors, d) = impute_single(aug, s, opts)?;
        diagnostics.merge(d);
        copies.push(ImputedCopy {
            predictors,
            seed: s,
            origin,
        });
    }
    Ok(ImputationStack {
        copies,
        imputed: aug.missing().clone(),
        kinds: aug.kinds().to_vec(),
        diagnostics,
    })
}

struct Column {
    kind: ColumnKind,
    values: Vec<f64>,
    missing: Vec<bool>,
    /// Sorted levels seen among observed cells (categorical / binary).
    observed_levels: Vec<usize>,
}

impl Column {
    fn observed_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.missing.iter().enumerate().filter(|(_, m)| !**m).map(|(i, _)| i)
    }

    fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    /// Width of this column when used as a regressor.
    fn regressor_width(&self) -> usize {
        match self.kind {
            ColumnKind::Categorical { .. } => self.observed_levels.len().saturating_sub(1),
            _ => 1,
        }
    }
}

fn levels_of(values: &[f64], missing: &[bool]) -> Vec<usize> {
    let mut levels: Vec<usize> = values
        .iter()
        .zip(missing)
        .filter(|(_, m)| !**m)
        .map(|(v, _)| *v as usize)
        .collect();
    levels.sort_unstable();
    levels.dedup();
    levels
}

/// Regressor matrix (intercept + every other column) over all rows.
fn regressors(columns: &[Column], target: usize, n: usize) -> Array2<f64> {
    let m = 1 + columns
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != target)
        .map(|(_, col)| col.regressor_width())
        .sum::<usize>();
    let mut x = Array2::<f64>::zeros((n, m));
    x.column_mut(0).fill(1.0);
    let mut offset = 1;
    for (c, col) in columns.iter().enumerate() {
        if c == target {
            continue;
        }
        match col.kind {
            ColumnKind::Categorical { .. } => {
                for (d, &level) in col.observed_levels.iter().skip(1).enumerate() {
                    for i in 0..n {
                        if col.values[i] as usize == level {
                            x[[i, offset + d]] = 1.0;
                        }
                    }
                }
            }
            _ => {
                for i in 0..n {
                    x[[i, offset]] = col.values[i];
                }
            }
        }
        offset += col.regressor_width();
    }
    x
}

fn donor_draw(col: &Column, count: usize, rng: &mut Rng) -> Vec<f64> {
    let pool: Vec<f64> = col.observed_rows().map(|i| col.values[i]).collect();
    (0..count)
        .map(|_| pool[rng.random_range(0..pool.len())])
        .collect()
}

/// One completed copy of the predictors. Outcome surrogates on validation
/// rows are imputed along the way and then dropped.
pub fn impute_single(
    aug: &AugmentedDataset,
    seed: u64,
    opts: &ImputationOptions,
) -> Result<(Array2<f64>, Diagnostics)> {
    let n = aug.n();
    let p = aug.p();
    for j in 0..p {
        if aug.missing().column(j).iter().all(|&m| m) {
            return Err(Error::UnusableColumn { column: j });
        }
    }
    let mut diagnostics = Diagnostics::default();
    if !aug.has_missing_predictors() {
        return Ok((aug.predictors().clone(), diagnostics));
    }

    let n_cal = aug.n_calibration();
    let mut columns: Vec<Column> = (0..p)
        .map(|j| {
            let values = aug.predictors().column(j).to_vec();
            let missing = aug.missing().column(j).to_vec();
            let observed_levels = match aug.kinds()[j] {
                ColumnKind::Continuous => Vec::new(),
                _ => levels_of(&values, &missing),
            };
            Column {
                kind: aug.kinds()[j],
                values,
                missing,
                observed_levels,
            }
        })
        .collect();
    let outcome_missing: Vec<bool> = (0..n).map(|i| i >= n_cal).collect();
    let mut hazard = vec![0.0; n];
    hazard[..n_cal].copy_from_slice(aug.na_transform());
    let mut status = vec![0.0; n];
    for (dst, &s) in status.iter_mut().zip(aug.calibration_status()) {
        *dst = if s { 1.0 } else { 0.0 };
    }
    columns.push(Column {
        kind: ColumnKind::Continuous,
        values: hazard,
        missing: outcome_missing.clone(),
        observed_levels: Vec::new(),
    });
    let status_levels = levels_of(&status, &outcome_missing);
    columns.push(Column {
        kind: ColumnKind::Binary,
        values: status,
        missing: outcome_missing,
        observed_levels: status_levels,
    });

    let mut rng = seed::rng(seed);
    let incomplete: Vec<usize> = (0..columns.len())
        .filter(|&j| columns[j].has_missing())
        .collect();

    for &j in &incomplete {
        let mis: Vec<usize> = (0..n).filter(|&i| columns[j].missing[i]).collect();
        let fill = donor_draw(&columns[j], mis.len(), &mut rng);
        for (&i, v) in mis.iter().zip(fill) {
            columns[j].values[i] = v;
        }
    }

    for _ in 0..opts.cycles {
        for &j in &incomplete {
            let col = &columns[j];
            let obs: Vec<usize> = col.observed_rows().collect();
            let mis: Vec<usize> = (0..n).filter(|&i| col.missing[i]).collect();
            let draws = if col.kind != ColumnKind::Continuous && col.observed_levels.len() < 2 {
                diagnostics.single_level_fills += 1;
                Some(vec![col.observed_levels[0] as f64; mis.len()])
            } else {
                let x = regressors(&columns, j, n);
                let x_obs = x.select(ndarray::Axis(0), &obs);
                let x_mis = x.select(ndarray::Axis(0), &mis);
                let col = &columns[j];
                match col.kind {
                    ColumnKind::Continuous => {
                        let y = Array1::from_iter(obs.iter().map(|&i| col.values[i]));
                        models::pmm_draw(&x_obs, &y, &x_mis, opts.donors, opts.ridge, &mut rng)
                    }
                    ColumnKind::Binary => {
                        let y: Vec<f64> = obs.iter().map(|&i| col.values[i]).collect();
                        models::logistic_draw(&x_obs, &y, &x_mis, &mut rng)
                    }
                    ColumnKind::Categorical { .. } => {
                        let y: Vec<usize> = obs.iter().map(|&i| col.values[i] as usize).collect();
                        models::polytomous_draw(&x_obs, &y, &col.observed_levels, &x_mis, &mut rng)
                    }
                }
            };
            let draws = match draws {
                Some(d) => d,
                None => {
                    diagnostics.fallback_draws += 1;
                    donor_draw(&columns[j], mis.len(), &mut rng)
                }
            };
            for (&i, v) in mis.iter().zip(draws) {
                columns[j].values[i] = v;
            }
        }
    }

    let mut out = aug.predictors().clone();
    for j in 0..p {
        for i in 0..n {
            if columns[j].missing[i] {
                out[[i, j]] = columns[j].values[i];
            }
        }
    }
    Ok((out, diagnostics))
}
