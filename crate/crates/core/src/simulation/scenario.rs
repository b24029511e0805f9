//! Nested simulations × replicates × methods runner.

use ndarray::Array2;
use rayon::prelude::*;

use crate::assessment::{
    bias_summary_rows, brier_ipcw_with, mean, sample_sd, simulation_r, variation_r_rows,
    AssessmentReport, Metric, SimulationPredictions, Stratum, TruthFilter,
};
use crate::error::{Error, Result};
use crate::imputation::{Diagnostics, ImputationOptions};
use crate::pipelines::{run_methods, Method, Protocol, RunSettings};
use crate::seed::{self, tag};
use crate::simulation::amputation::{induce_mar, induce_mcar};
use crate::simulation::config::{Mechanism, ScenarioConfig};
use crate::simulation::generate::{gen_dataset, SimulatedDataset};
use crate::survival::data::SurvivalDataset;
use crate::survival::estimators::kaplan_meier_censoring;

/// Seed of simulated dataset `s`.
pub fn dataset_seed(master: u64, s: usize) -> u64 {
    seed::derive(master, &[tag::DATA, s as u64])
}

/// Seed of the amputation applied to dataset `s`.
pub fn amputation_seed(master: u64, s: usize) -> u64 {
    seed::derive(master, &[tag::AMPUTE, s as u64])
}

/// Master seed of replicate analysis `r` on dataset `s`; every method of the
/// replicate runs under it.
pub fn replicate_seed(master: u64, s: usize, r: usize) -> u64 {
    seed::derive(master, &[tag::REPLICATE, s as u64, r as u64])
}

/// Generates and amputes simulated dataset `s`.
pub fn simulate_dataset(cfg: &ScenarioConfig, s: usize) -> Result<SimulatedDataset> {
    let mut sim = gen_dataset(cfg, dataset_seed(cfg.seed, s))?;
    let ampute_seed = amputation_seed(cfg.seed, s);
    sim.dataset = match cfg.mechanism {
        Mechanism::Mcar => induce_mcar(&sim.dataset, cfg.missing_fraction, ampute_seed)?,
        Mechanism::Mar => induce_mar(&sim.dataset, cfg.missing_fraction, ampute_seed)?,
    };
    Ok(sim)
}

/// Per-replicate results of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub simulation: usize,
    pub replicate: usize,
    pub method: Method,
    /// Combined predictions, `[horizon][subject]`.
    pub combined: Vec<Vec<f64>>,
    /// Brier score per horizon, indexed like [`Stratum::ALL`].
    pub brier: Vec<[Option<f64>; 3]>,
    /// R(t) across the K constituents, indexed like [`Stratum::ALL`].
    pub r_individual: Vec<[Option<f64>; 3]>,
}

/// Per-dataset facts needed for bias and replicate variation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub simulation: usize,
    pub had_missing: Vec<bool>,
    /// True survival, `[horizon][subject]`.
    pub truth: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub report: AssessmentReport,
    pub simulations: Vec<SimulationRecord>,
    /// Ordered by simulation, replicate, then method.
    pub replicates: Vec<ReplicateOutcome>,
    pub diagnostics: Diagnostics,
}

/// Runs the scenario and returns the aggregated report.
pub fn run_scenario(cfg: &ScenarioConfig, methods: &[Method], horizons: &[f64]) -> Result<AssessmentReport> {
    run_scenario_detailed(cfg, methods, horizons).map(|o| o.report)
}

/// [`run_scenario`] keeping the per-replicate predictions and scores.
pub fn run_scenario_detailed(
    cfg: &ScenarioConfig,
    methods: &[Method],
    horizons: &[f64],
) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::Parameter("no methods requested".into()));
    }
    let per_sim: Vec<(SimulationRecord, Vec<ReplicateOutcome>, Diagnostics)> = (0..cfg.simulations)
        .into_par_iter()
        .map(|s| run_simulation(cfg, methods, horizons, s))
        .collect::<Result<_>>()?;

    let mut simulations = Vec::with_capacity(per_sim.len());
    let mut replicates = Vec::new();
    let mut diagnostics = Diagnostics::default();
    for (rec, reps, d) in per_sim {
        simulations.push(rec);
        replicates.extend(reps);
        diagnostics.merge(d);
    }
    let report = aggregate(cfg, methods, horizons, &simulations, &replicates)?;
    Ok(ScenarioOutcome {
        report,
        simulations,
        replicates,
        diagnostics,
    })
}

fn run_simulation(
    cfg: &ScenarioConfig,
    methods: &[Method],
    horizons: &[f64],
    s: usize,
) -> Result<(SimulationRecord, Vec<ReplicateOutcome>, Diagnostics)> {
    let sim = simulate_dataset(cfg, s).map_err(|e| e.context(format!("simulation {s}")))?;
    let data = &sim.dataset;
    let had_missing = data.row_has_missing();
    let truth: Vec<Vec<f64>> = horizons.iter().map(|&t| sim.true_survival(t)).collect();
    let per_rep: Vec<(Vec<ReplicateOutcome>, Diagnostics)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, data, &had_missing, methods, horizons, s, r))
        .collect::<Result<_>>()?;
    let mut reps = Vec::new();
    let mut diag = Diagnostics::default();
    for (outcomes, d) in per_rep {
        reps.extend(outcomes);
        diag.merge(d);
    }
    Ok((
        SimulationRecord {
            simulation: s,
            had_missing,
            truth,
        },
        reps,
        diag,
    ))
}

fn run_replicate(
    cfg: &ScenarioConfig,
    data: &SurvivalDataset,
    had_missing: &[bool],
    methods: &[Method],
    horizons: &[f64],
    s: usize,
    r: usize,
) -> Result<(Vec<ReplicateOutcome>, Diagnostics)> {
    let settings = RunSettings {
        k: cfg.k,
        seed: replicate_seed(cfg.seed, s, r),
        horizons: horizons.to_vec(),
        combine: cfg.combine,
        imputation: ImputationOptions::default(),
    };
    let sets = run_methods(data, Protocol::CrossValidation { folds: cfg.folds }, methods, &settings)
        .map_err(|e| e.context(format!("simulation {s}, replicate {r}")))?;
    let censoring = kaplan_meier_censoring(data.time(), data.status());
    let masks: Vec<Vec<bool>> = Stratum::ALL.iter().map(|st| st.mask(had_missing)).collect();
    let mut diag = Diagnostics::default();
    let mut out = Vec::with_capacity(sets.len());
    for (method, set) in sets {
        diag.merge(set.diagnostics());
        let mut brier = Vec::with_capacity(horizons.len());
        let mut r_individual = Vec::with_capacity(horizons.len());
        for (h, &t) in horizons.iter().enumerate() {
            let mut b = [None; 3];
            let mut ri = [None; 3];
            for (si, mask) in masks.iter().enumerate() {
                b[si] = absent_if_empty(brier_ipcw_with(
                    set.combined(h),
                    data.time(),
                    data.status(),
                    t,
                    &censoring,
                    Some(mask),
                ))
                .map_err(|e| e.context(format!("simulation {s}, replicate {r}, method {method}")))?;
                if set.k() >= 2 {
                    ri[si] = absent_if_empty(variation_r_rows(set.constituents(h), Some(mask)))?;
                }
            }
            brier.push(b);
            r_individual.push(ri);
        }
        out.push(ReplicateOutcome {
            simulation: s,
            replicate: r,
            method,
            combined: (0..horizons.len()).map(|h| set.combined(h).to_vec()).collect(),
            brier,
            r_individual,
        });
    }
    Ok((out, diag))
}

fn absent_if_empty(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::EmptyFilter(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn aggregate(
    cfg: &ScenarioConfig,
    methods: &[Method],
    horizons: &[f64],
    simulations: &[SimulationRecord],
    replicates: &[ReplicateOutcome],
) -> Result<AssessmentReport> {
    let mut report = AssessmentReport::default();
    let n_rep = cfg.replicates;
    for &method in methods {
        // [simulation][replicate]
        let by_sim: Vec<Vec<&ReplicateOutcome>> = simulations
            .iter()
            .map(|rec| {
                replicates
                    .iter()
                    .filter(|o| o.simulation == rec.simulation && o.method == method)
                    .collect()
            })
            .collect();
        for (h, &t) in horizons.iter().enumerate() {
            for (si, stratum) in Stratum::ALL.iter().enumerate() {
                let all_brier: Vec<f64> = by_sim
                    .iter()
                    .flatten()
                    .filter_map(|o| o.brier[h][si])
                    .collect();
                let sds: Vec<f64> = by_sim
                    .iter()
                    .filter_map(|reps| {
                        let v: Vec<f64> = reps.iter().filter_map(|o| o.brier[h][si]).collect();
                        sample_sd(&v)
                    })
                    .collect();
                let r_ind: Vec<f64> = by_sim
                    .iter()
                    .flatten()
                    .filter_map(|o| o.r_individual[h][si])
                    .collect();

                let mut r_rep = Vec::new();
                let mut biases = Vec::new();
                for (rec, reps) in simulations.iter().zip(&by_sim) {
                    let mask = stratum.mask(&rec.had_missing);
                    let n = rec.had_missing.len();
                    let preds = Array2::from_shape_fn((n, reps.len()), |(i, r)| reps[r].combined[h][i]);
                    if n_rep >= 2 {
                        let sim = SimulationPredictions {
                            predictions: preds.view(),
                            truth: &rec.truth[h],
                            rows: Some(&mask),
                        };
                        if let Some(v) = absent_if_empty(simulation_r(&sim, TruthFilter::default()))? {
                            r_rep.push(v);
                        }
                    }
                    let means: Vec<f64> = preds.rows().into_iter().map(|row| row.mean().unwrap_or(0.0)).collect();
                    if let Some(v) = absent_if_empty(bias_summary_rows(&means, &rec.truth[h], Some(&mask)))? {
                        biases.push(v);
                    }
                }

                let label = method.as_str();
                report.push(label, cfg.k, t, *stratum, Metric::BrierMean, mean(&all_brier));
                report.push(label, cfg.k, t, *stratum, Metric::BrierSd, mean(&sds));
                report.push(label, cfg.k, t, *stratum, Metric::RReplicates, mean(&r_rep));
                report.push(label, cfg.k, t, *stratum, Metric::RIndividual, mean(&r_ind));
                report.push(label, cfg.k, t, *stratum, Metric::BiasMean, mean(&biases));
            }
        }
    }
    Ok(report)
}
