//! Cross-validation and direct-prediction drivers for approaches 1, 2A, 2B
//! and their naive counterparts.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imputation::{build_augmented, impute_single, Diagnostics, ImputationOptions, PredictorBlock};
use crate::pipelines::folds::{make_folds, FoldPartition};
use crate::pipelines::pooling::{mean_design, pool_rubin, PoolVariant, PooledCoxModel};
use crate::pipelines::prediction::{Combine, PredictionSet};
use crate::seed::{self, tag};
use crate::survival::cox::{fit_cox, CoxFit, SurvivalModel};
use crate::survival::data::SurvivalDataset;
use crate::survival::design::{DesignMatrix, DesignSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ap1")]
    Ap1,
    #[serde(rename = "ap2A")]
    Ap2A,
    #[serde(rename = "ap2B")]
    Ap2B,
    #[serde(rename = "nv1")]
    Nv1,
    #[serde(rename = "nv2A")]
    Nv2A,
    #[serde(rename = "nv2B")]
    Nv2B,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Ap1,
        Method::Ap2A,
        Method::Ap2B,
        Method::Nv1,
        Method::Nv2A,
        Method::Nv2B,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ap1 => "ap1",
            Method::Ap2A => "ap2A",
            Method::Ap2B => "ap2B",
            Method::Nv1 => "nv1",
            Method::Nv2A => "nv2A",
            Method::Nv2B => "nv2B",
        }
    }

    pub fn is_naive(self) -> bool {
        matches!(self, Method::Nv1 | Method::Nv2A | Method::Nv2B)
    }

    /// Pooling variant, or `None` for the per-imputation approach.
    pub fn pool_variant(self) -> Option<PoolVariant> {
        match self {
            Method::Ap1 | Method::Nv1 => None,
            Method::Ap2A | Method::Nv2A => Some(PoolVariant::AverageBaseline),
            Method::Ap2B | Method::Nv2B => Some(PoolVariant::BreslowOnMeanData),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parameter(format!("unknown method `{s}`")))
    }
}

/// Settings shared by every driver.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    /// Number of imputations K.
    pub k: usize,
    pub seed: u64,
    /// Prediction times, strictly increasing.
    pub horizons: Vec<f64>,
    pub combine: Combine,
    pub imputation: ImputationOptions,
}

impl RunSettings {
    pub fn new(k: usize, seed: u64, horizons: Vec<f64>) -> Self {
        Self {
            k,
            seed,
            horizons,
            combine: Combine::default(),
            imputation: ImputationOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Parameter("need at least one imputation (K >= 1)".into()));
        }
        if self.horizons.is_empty() {
            return Err(Error::Parameter("no prediction horizons given".into()));
        }
        if self.horizons.iter().any(|t| !t.is_finite() || *t < 0.0)
            || self.horizons.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Parameter(
                "horizons must be finite, non-negative and strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Where predictions are made.
#[derive(Debug, Clone, Copy)]
pub enum Protocol<'a> {
    /// L-fold cross-validation over the subjects of the dataset.
    CrossValidation { folds: usize },
    /// Fit on the whole dataset and predict these validation rows.
    Validation(&'a PredictorBlock),
}

/// Seed of the fold partition used by imputation `k`.
pub fn partition_seed(master: u64, k: usize) -> u64 {
    seed::derive(master, &[tag::PARTITION, k as u64])
}

/// Seed of the single imputation for imputation index `k` in fold `fold`.
pub fn imputation_seed(master: u64, k: usize, fold: usize) -> u64 {
    seed::derive(master, &[tag::IMPUTE, k as u64, fold as u64])
}

/// Seed of naive imputation `k` on the full data.
pub fn naive_seed(master: u64, k: usize) -> u64 {
    seed::derive(master, &[tag::NAIVE, k as u64])
}

/// Per-imputation model and approach 1 predictions.
pub fn run_approach1(
    data: &SurvivalDataset,
    protocol: Protocol<'_>,
    settings: &RunSettings,
) -> Result<PredictionSet> {
    run_methods(data, protocol, &[Method::Ap1], settings).map(single)
}

/// Rubin-pooled model with a fixed fold partition.
pub fn run_approach2(
    data: &SurvivalDataset,
    protocol: Protocol<'_>,
    variant: PoolVariant,
    settings: &RunSettings,
) -> Result<PredictionSet> {
    let method = match variant {
        PoolVariant::AverageBaseline => Method::Ap2A,
        PoolVariant::BreslowOnMeanData => Method::Ap2B,
    };
    run_methods(data, protocol, &[method], settings).map(single)
}

/// Naive protocol: imputations are drawn once on the full data, outcomes
/// included, before cross-validation. `variant = None` selects approach 1.
pub fn run_naive(
    data: &SurvivalDataset,
    folds: usize,
    variant: Option<PoolVariant>,
    settings: &RunSettings,
) -> Result<PredictionSet> {
    let method = match variant {
        None => Method::Nv1,
        Some(PoolVariant::AverageBaseline) => Method::Nv2A,
        Some(PoolVariant::BreslowOnMeanData) => Method::Nv2B,
    };
    run_methods(data, Protocol::CrossValidation { folds }, &[method], settings).map(single)
}

/// Imputes the whole dataset `K` times (outcomes included, as in the
/// calibration step of a validation run) and returns the pooled model with
/// the design spec needed to encode new rows.
pub fn fit_pooled(
    data: &SurvivalDataset,
    variant: PoolVariant,
    settings: &RunSettings,
) -> Result<(DesignSpec, PooledCoxModel<f64>)> {
    settings.validate()?;
    let empty = PredictorBlock::empty(data.p());
    let ctx = Context::new(data, Protocol::Validation(&empty), settings)?;
    let split = ctx.splits(None)?.pop().expect("one split");
    let imputed: Vec<Imputed> = (0..settings.k)
        .into_par_iter()
        .map(|k| {
            ctx.impute_and_fit(&split, imputation_seed(settings.seed, k, 0))
                .map_err(|e| e.context(format!("fit, imputation k={k}")))
        })
        .collect::<Result<_>>()?;
    let fits: Vec<CoxFit<f64>> = imputed.iter().map(|i| i.fit.clone()).collect();
    let mean = match variant {
        PoolVariant::BreslowOnMeanData => {
            let designs: Vec<&DesignMatrix<f64>> = imputed.iter().map(|i| &i.calibration).collect();
            Some(mean_design(&designs)?)
        }
        PoolVariant::AverageBaseline => None,
    };
    let model = pool_rubin(&fits, variant, mean.as_ref(), data.time(), data.status())?;
    Ok((ctx.spec, model))
}

fn single(mut v: Vec<(Method, PredictionSet)>) -> PredictionSet {
    v.pop().expect("one method requested").1
}

/// Runs several methods, sharing imputations and fits between methods that
/// use the same seed paths. Results follow the order of `methods`.
pub fn run_methods(
    data: &SurvivalDataset,
    protocol: Protocol<'_>,
    methods: &[Method],
    settings: &RunSettings,
) -> Result<Vec<(Method, PredictionSet)>> {
    settings.validate()?;
    if methods.iter().any(|m| m.is_naive()) && matches!(protocol, Protocol::Validation(_)) {
        return Err(Error::Parameter(
            "naive methods are only defined under cross-validation".into(),
        ));
    }
    let ctx = Context::new(data, protocol, settings)?;
    let mut out: Vec<Option<PredictionSet>> = vec![None; methods.len()];

    let want = |m: Method| methods.contains(&m);
    if want(Method::Ap1) {
        let set = ctx.approach1()?;
        place(&mut out, methods, Method::Ap1, set);
    }
    let full_variants: Vec<PoolVariant> = [Method::Ap2A, Method::Ap2B]
        .into_iter()
        .filter(|m| want(*m))
        .filter_map(Method::pool_variant)
        .collect();
    if !full_variants.is_empty() {
        for (v, set) in full_variants.iter().zip(ctx.approach2(&full_variants)?) {
            let m = if *v == PoolVariant::AverageBaseline { Method::Ap2A } else { Method::Ap2B };
            place(&mut out, methods, m, set);
        }
    }
    let naive: Vec<Method> = [Method::Nv1, Method::Nv2A, Method::Nv2B]
        .into_iter()
        .filter(|m| want(*m))
        .collect();
    if !naive.is_empty() {
        for (m, set) in naive.iter().zip(ctx.naive(&naive)?) {
            place(&mut out, methods, *m, set);
        }
    }
    Ok(methods
        .iter()
        .zip(out)
        .map(|(m, s)| (*m, s.expect("every method computed")))
        .collect())
}

fn place(out: &mut [Option<PredictionSet>], methods: &[Method], m: Method, set: PredictionSet) {
    for (slot, _) in out.iter_mut().zip(methods).filter(|(_, mm)| **mm == m) {
        *slot = Some(set.clone());
    }
}

/// One calibration/validation split.
struct Split {
    calibration: SurvivalDataset,
    validation: PredictorBlock,
    /// Output positions of the validation rows.
    targets: Vec<usize>,
}

/// Imputed designs and the Cox fit for one split and one imputation.
struct Imputed {
    calibration: DesignMatrix<f64>,
    validation: DesignMatrix<f64>,
    fit: CoxFit<f64>,
    diagnostics: Diagnostics,
}

struct Context<'a> {
    data: &'a SurvivalDataset,
    protocol: Protocol<'a>,
    settings: &'a RunSettings,
    spec: DesignSpec,
    n_out: usize,
    had_missing: Vec<bool>,
}

/// Predictions for the `targets` of one split; `[horizon][target][k]`.
type Block = Vec<Vec<Vec<f64>>>;

impl<'a> Context<'a> {
    fn new(data: &'a SurvivalDataset, protocol: Protocol<'a>, settings: &'a RunSettings) -> Result<Self> {
        let (spec, n_out, had_missing) = match protocol {
            Protocol::CrossValidation { folds } => {
                if folds < 2 || folds > data.n() {
                    return Err(Error::Parameter(format!(
                        "fold count must satisfy 2 <= L <= n (L = {folds}, n = {})",
                        data.n()
                    )));
                }
                (DesignSpec::from_dataset(data), data.n(), data.row_has_missing())
            }
            Protocol::Validation(block) => {
                if block.values.ncols() != data.p() {
                    return Err(Error::Shape(format!(
                        "validation rows have {} columns, calibration data {}",
                        block.values.ncols(),
                        data.p()
                    )));
                }
                let values = ndarray::concatenate![ndarray::Axis(0), *data.predictors(), block.values];
                let missing = ndarray::concatenate![ndarray::Axis(0), *data.missing(), block.missing];
                let had = block.missing.rows().into_iter().map(|r| r.iter().any(|&m| m)).collect();
                (DesignSpec::from_parts(data.kinds(), &values, &missing), block.nrows(), had)
            }
        };
        Ok(Self {
            data,
            protocol,
            settings,
            spec,
            n_out,
            had_missing,
        })
    }

    fn horizons(&self) -> usize {
        self.settings.horizons.len()
    }

    fn partition(&self, k: usize) -> Result<FoldPartition> {
        let Protocol::CrossValidation { folds } = self.protocol else {
            unreachable!("partition requested outside cross-validation")
        };
        make_folds(self.data.n(), folds, partition_seed(self.settings.seed, k))
    }

    /// The splits of one pass: the folds of `partition`, or the single
    /// calibration/validation split.
    fn splits(&self, partition: Option<&FoldPartition>) -> Result<Vec<Split>> {
        match (self.protocol, partition) {
            (Protocol::Validation(block), _) => Ok(vec![Split {
                calibration: self.data.clone(),
                validation: block.clone(),
                targets: (0..block.nrows()).collect(),
            }]),
            (Protocol::CrossValidation { .. }, Some(p)) => (0..p.len())
                .map(|f| {
                    Ok(Split {
                        calibration: self.data.subset(&p.complement(f))?,
                        validation: PredictorBlock::from_rows(self.data, &p.folds()[f]),
                        targets: p.folds()[f].clone(),
                    })
                })
                .collect(),
            (Protocol::CrossValidation { .. }, None) => unreachable!("missing partition"),
        }
    }

    fn impute_and_fit(&self, split: &Split, seed: u64) -> Result<Imputed> {
        let aug = build_augmented(&split.calibration, &split.validation)?;
        let (completed, diagnostics) = impute_single(&aug, seed, &self.settings.imputation)?;
        let design = self.spec.encode::<f64>(&completed)?;
        let n_cal = aug.n_calibration();
        let calibration = design.select_rows(&(0..n_cal).collect::<Vec<_>>());
        let validation = design.select_rows(&(n_cal..aug.n()).collect::<Vec<_>>());
        let fit = fit_cox(&calibration, split.calibration.time(), split.calibration.status())?;
        Ok(Imputed {
            calibration,
            validation,
            fit,
            diagnostics,
        })
    }

    fn predict_rows<M: SurvivalModel<f64>>(&self, model: &M, design: &DesignMatrix<f64>) -> Result<Vec<Vec<f64>>> {
        design
            .values()
            .rows()
            .into_iter()
            .map(|r| model.predict_survival(r.as_slice().expect("standard layout"), &self.settings.horizons))
            .collect()
    }

    /// Builds a prediction set from per-k columns `[k][horizon][subject]`.
    fn assemble_columns(&self, columns: Vec<Vec<Vec<f64>>>, tainted: Vec<bool>, diagnostics: Diagnostics) -> Result<PredictionSet> {
        let k = columns.len();
        let mut mats = vec![Array2::<f64>::zeros((self.n_out, k)); self.horizons()];
        for (kk, col) in columns.into_iter().enumerate() {
            for (h, values) in col.into_iter().enumerate() {
                for (i, v) in values.into_iter().enumerate() {
                    mats[h][[i, kk]] = v;
                }
            }
        }
        PredictionSet::new(
            self.settings.horizons.clone(),
            mats,
            self.had_missing.clone(),
            tainted,
            self.settings.combine,
        )
        .map(|s| s.with_diagnostics(diagnostics))
    }

    /// Builds a prediction set from per-split blocks.
    fn assemble_blocks(&self, blocks: Vec<(Vec<usize>, Block)>, tainted: Vec<bool>, diagnostics: Diagnostics) -> Result<PredictionSet> {
        let k = self.settings.k;
        let mut mats = vec![Array2::<f64>::zeros((self.n_out, k)); self.horizons()];
        for (targets, block) in blocks {
            for (h, rows) in block.into_iter().enumerate() {
                for (&i, preds) in targets.iter().zip(rows) {
                    for (kk, v) in preds.into_iter().enumerate() {
                        mats[h][[i, kk]] = v;
                    }
                }
            }
        }
        PredictionSet::new(
            self.settings.horizons.clone(),
            mats,
            self.had_missing.clone(),
            tainted,
            self.settings.combine,
        )
        .map(|s| s.with_diagnostics(diagnostics))
    }

    /// Approach 1: a fresh partition and one imputation per (k, fold).
    fn approach1(&self) -> Result<PredictionSet> {
        let master = self.settings.seed;
        let per_k: Vec<(Vec<Vec<f64>>, Vec<bool>, Diagnostics)> = (0..self.settings.k)
            .into_par_iter()
            .map(|k| {
                let partition = match self.protocol {
                    Protocol::CrossValidation { .. } => Some(self.partition(k)?),
                    Protocol::Validation(_) => None,
                };
                let splits = self.splits(partition.as_ref())?;
                let mut col = vec![vec![0.0; self.n_out]; self.horizons()];
                let mut tainted = vec![false; self.n_out];
                let mut diag = Diagnostics::default();
                for (f, split) in splits.iter().enumerate() {
                    let imp = self
                        .impute_and_fit(split, imputation_seed(master, k, f))
                        .map_err(|e| e.context(format!("approach ap1, imputation k={k}, fold {f}")))?;
                    diag.merge(imp.diagnostics);
                    let preds = self.predict_rows(&imp.fit, &imp.validation)?;
                    for (&i, p) in split.targets.iter().zip(preds) {
                        for (h, v) in p.into_iter().enumerate() {
                            col[h][i] = v;
                        }
                    }
                    mark_taint(&mut tainted, self.protocol, partition.as_ref(), f, &split.targets);
                }
                Ok((col, tainted, diag))
            })
            .collect::<Result<_>>()?;
        let mut tainted = vec![false; self.n_out];
        let mut diag = Diagnostics::default();
        let mut columns = Vec::with_capacity(per_k.len());
        for (col, t, d) in per_k {
            columns.push(col);
            tainted.iter_mut().zip(t).for_each(|(a, b)| *a |= b);
            diag.merge(d);
        }
        self.assemble_columns(columns, tainted, diag)
    }

    /// Approach 2: fixed partition, K imputations per fold, pooled per variant.
    fn approach2(&self, variants: &[PoolVariant]) -> Result<Vec<PredictionSet>> {
        let master = self.settings.seed;
        let partition = match self.protocol {
            Protocol::CrossValidation { .. } => Some(self.partition(0)?),
            Protocol::Validation(_) => None,
        };
        let splits = self.splits(partition.as_ref())?;
        let per_fold: Vec<(Vec<Block>, Diagnostics)> = splits
            .par_iter()
            .enumerate()
            .map(|(f, split)| {
                let imputed: Vec<Imputed> = (0..self.settings.k)
                    .into_par_iter()
                    .map(|k| {
                        self.impute_and_fit(split, imputation_seed(master, k, f))
                            .map_err(|e| e.context(format!("approach ap2, imputation k={k}, fold {f}")))
                    })
                    .collect::<Result<_>>()?;
                let mut diag = Diagnostics::default();
                imputed.iter().for_each(|i| diag.merge(i.diagnostics));
                let blocks = variants
                    .iter()
                    .map(|&v| {
                        self.pooled_block(&imputed, v, split)
                            .map_err(|e| e.context(format!("pooling fold {f}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((blocks, diag))
            })
            .collect::<Result<_>>()?;
        self.assemble_pooled(variants.len(), &splits, per_fold, partition.as_ref())
    }

    fn pooled_block(&self, imputed: &[Imputed], variant: PoolVariant, split: &Split) -> Result<Block> {
        let fits: Vec<CoxFit<f64>> = imputed.iter().map(|i| i.fit.clone()).collect();
        let mean = match variant {
            PoolVariant::BreslowOnMeanData => {
                let designs: Vec<&DesignMatrix<f64>> = imputed.iter().map(|i| &i.calibration).collect();
                Some(mean_design(&designs)?)
            }
            PoolVariant::AverageBaseline => None,
        };
        let model = pool_rubin(
            &fits,
            variant,
            mean.as_ref(),
            split.calibration.time(),
            split.calibration.status(),
        )?;
        let per_k: Vec<Vec<Vec<f64>>> = imputed
            .iter()
            .map(|i| self.predict_rows(&model, &i.validation))
            .collect::<Result<_>>()?;
        Ok(to_block(per_k, split.targets.len(), self.horizons()))
    }

    fn assemble_pooled(
        &self,
        n_variants: usize,
        splits: &[Split],
        per_fold: Vec<(Vec<Block>, Diagnostics)>,
        partition: Option<&FoldPartition>,
    ) -> Result<Vec<PredictionSet>> {
        let mut tainted = vec![false; self.n_out];
        let mut diag = Diagnostics::default();
        let mut by_variant: Vec<Vec<(Vec<usize>, Block)>> = vec![Vec::new(); n_variants];
        for (f, ((blocks, d), split)) in per_fold.into_iter().zip(splits).enumerate() {
            diag.merge(d);
            mark_taint(&mut tainted, self.protocol, partition, f, &split.targets);
            for (v, block) in blocks.into_iter().enumerate() {
                by_variant[v].push((split.targets.clone(), block));
            }
        }
        by_variant
            .into_iter()
            .map(|blocks| self.assemble_blocks(blocks, tainted.clone(), diag))
            .collect()
    }

    /// Naive protocol: K imputations of the full data with every outcome
    /// visible, then cross-validated fitting on the completed copies.
    fn naive(&self, methods: &[Method]) -> Result<Vec<PredictionSet>> {
        let data = self.data;
        let aug = build_augmented(data, &PredictorBlock::empty(data.p()))?;
        let copies: Vec<(DesignMatrix<f64>, Diagnostics)> = (0..self.settings.k)
            .into_par_iter()
            .map(|k| {
                let (completed, d) = impute_single(&aug, naive_seed(self.settings.seed, k), &self.settings.imputation)
                    .map_err(|e| e.context(format!("naive imputation k={k}")))?;
                Ok((self.spec.encode::<f64>(&completed)?, d))
            })
            .collect::<Result<_>>()?;
        let mut diag = Diagnostics::default();
        copies.iter().for_each(|(_, d)| diag.merge(*d));
        // every outcome fed the imputation models
        let tainted = vec![true; self.n_out];

        let fit_fold = |design: &DesignMatrix<f64>, p: &FoldPartition, f: usize| -> Result<CoxFit<f64>> {
            let cal = p.complement(f);
            let time: Vec<f64> = cal.iter().map(|&i| data.time()[i]).collect();
            let status: Vec<bool> = cal.iter().map(|&i| data.status()[i]).collect();
            fit_cox(&design.select_rows(&cal), &time, &status)
        };

        let mut out = Vec::with_capacity(methods.len());
        for &m in methods {
            let set = match m.pool_variant() {
                None => {
                    let columns: Vec<Vec<Vec<f64>>> = copies
                        .par_iter()
                        .enumerate()
                        .map(|(k, (design, _))| {
                            let p = self.partition(k)?;
                            let mut col = vec![vec![0.0; self.n_out]; self.horizons()];
                            for f in 0..p.len() {
                                let fit = fit_fold(design, &p, f)
                                    .map_err(|e| e.context(format!("approach nv1, imputation k={k}, fold {f}")))?;
                                let rows = &p.folds()[f];
                                let preds = self.predict_rows(&fit, &design.select_rows(rows))?;
                                for (&i, pr) in rows.iter().zip(preds) {
                                    for (h, v) in pr.into_iter().enumerate() {
                                        col[h][i] = v;
                                    }
                                }
                            }
                            Ok(col)
                        })
                        .collect::<Result<_>>()?;
                    self.assemble_columns(columns, tainted.clone(), diag)?
                }
                Some(variant) => {
                    let p = self.partition(0)?;
                    let blocks: Vec<(Vec<usize>, Block)> = (0..p.len())
                        .into_par_iter()
                        .map(|f| {
                            let tag = format!("approach {m}, fold {f}");
                            let cal = p.complement(f);
                            let rows = &p.folds()[f];
                            let fits: Vec<CoxFit<f64>> = copies
                                .iter()
                                .enumerate()
                                .map(|(k, (d, _))| {
                                    fit_fold(d, &p, f).map_err(|e| e.context(format!("{tag}, imputation k={k}")))
                                })
                                .collect::<Result<_>>()?;
                            let mean = match variant {
                                PoolVariant::BreslowOnMeanData => {
                                    let designs: Vec<DesignMatrix<f64>> =
                                        copies.iter().map(|(d, _)| d.select_rows(&cal)).collect();
                                    Some(mean_design(&designs.iter().collect::<Vec<_>>())?)
                                }
                                PoolVariant::AverageBaseline => None,
                            };
                            let time: Vec<f64> = cal.iter().map(|&i| data.time()[i]).collect();
                            let status: Vec<bool> = cal.iter().map(|&i| data.status()[i]).collect();
                            let model = pool_rubin(&fits, variant, mean.as_ref(), &time, &status)
                                .map_err(|e| e.context(tag.clone()))?;
                            let per_k: Vec<Vec<Vec<f64>>> = copies
                                .iter()
                                .map(|(d, _)| self.predict_rows(&model, &d.select_rows(rows)))
                                .collect::<Result<_>>()?;
                            Ok((rows.clone(), to_block(per_k, rows.len(), self.horizons())))
                        })
                        .collect::<Result<_>>()?;
                    self.assemble_blocks(blocks, tainted.clone(), diag)?
                }
            };
            out.push(set);
        }
        Ok(out)
    }
}

/// `[k][row][horizon]` to `[horizon][row][k]`.
fn to_block(per_k: Vec<Vec<Vec<f64>>>, rows: usize, horizons: usize) -> Block {
    let k = per_k.len();
    let mut block = vec![vec![vec![0.0; k]; rows]; horizons];
    for (kk, preds) in per_k.into_iter().enumerate() {
        for (r, p) in preds.into_iter().enumerate() {
            for (h, v) in p.into_iter().enumerate() {
                block[h][r][kk] = v;
            }
        }
    }
    block
}

/// Flags targets whose own outcome was part of the calibration rows of
/// their split. Under cross-validation the calibration rows are the
/// complement of the fold; under direct validation they are other subjects.
fn mark_taint(
    tainted: &mut [bool],
    protocol: Protocol<'_>,
    partition: Option<&FoldPartition>,
    fold: usize,
    targets: &[usize],
) {
    if let (Protocol::CrossValidation { .. }, Some(p)) = (protocol, partition) {
        for &i in targets {
            tainted[i] |= p.fold_of(i) != fold;
        }
    }
}
