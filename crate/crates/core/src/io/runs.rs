//! Crossval and simulate commands as library calls.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;

use crate::assessment::{
    brier_ipcw_with, mean, sample_sd, variation_r_rows, AssessmentReport, Metric, Stratum,
};
use crate::error::{Error, Result, ResultExt};
use crate::io::config::{RunConfig, SimulateConfig};
use crate::io::data::{load_csv, DatasetSpec};
use crate::io::manifest::{file_digest, Manifest, SeedEntry, MANIFEST_FILE};
use crate::io::report::{write_predictions_csv, write_report_csv, write_report_json};
use crate::pipelines::{run_methods, Method, PredictionSet, Protocol, RunSettings};
use crate::seed::{self, tag};
use crate::simulation::{amputation_seed, dataset_seed, replicate_seed, run_scenario_detailed, ScenarioOutcome};
use crate::survival::data::SurvivalDataset;
use crate::survival::estimators::kaplan_meier_censoring;

/// Seed of cross-validation replicate `r`.
pub fn crossval_replicate_seed(master: u64, r: usize) -> u64 {
    seed::derive(master, &[tag::REPLICATE, r as u64])
}

pub struct CrossvalOutput {
    pub report: AssessmentReport,
    /// Per method, one prediction set per replicate.
    pub predictions: Vec<(Method, Vec<PredictionSet>)>,
}

/// Runs every configured method `replicates` times and scores the results.
pub fn run_crossval(data: &SurvivalDataset, cfg: &RunConfig) -> Result<CrossvalOutput> {
    cfg.validate()?;
    let mut per_method: Vec<(Method, Vec<PredictionSet>)> =
        cfg.methods.iter().map(|m| (*m, Vec::new())).collect();
    for r in 0..cfg.replicates {
        let started = Instant::now();
        let settings = RunSettings {
            k: cfg.k,
            seed: crossval_replicate_seed(cfg.seed, r),
            horizons: cfg.horizons.clone(),
            combine: cfg.combine,
            imputation: Default::default(),
        };
        let sets = run_methods(data, Protocol::CrossValidation { folds: cfg.folds }, &cfg.methods, &settings)
            .context_with(|| format!("replicate {r}"))?;
        for ((_, acc), (_, set)) in per_method.iter_mut().zip(sets) {
            let d = set.diagnostics();
            if d.fallback_draws > 0 {
                log::warn!("replicate {r}: {} imputation draws fell back to donor sampling", d.fallback_draws);
            }
            acc.push(set);
        }
        log::info!("replicate {r} finished in {:.2?}", started.elapsed());
    }
    let mut report = AssessmentReport::default();
    for (m, sets) in &per_method {
        report.extend(assess_replicates(data, m.as_str(), cfg.k, sets)?);
    }
    Ok(CrossvalOutput {
        report,
        predictions: per_method,
    })
}

/// Brier mean and SD across replicates, R(t) across the K constituents and,
/// with several replicates, R(t) across replicate combined predictions.
pub fn assess_replicates(
    data: &SurvivalDataset,
    method: &str,
    k: usize,
    replicates: &[PredictionSet],
) -> Result<AssessmentReport> {
    let first = replicates
        .first()
        .ok_or_else(|| Error::Parameter("no prediction sets to assess".into()))?;
    if replicates.iter().any(|s| s.n() != data.n()) {
        return Err(Error::Shape("predictions do not cover the dataset".into()));
    }
    let censoring = kaplan_meier_censoring(data.time(), data.status());
    let mut report = AssessmentReport::default();
    for (h, &t) in first.horizons().iter().enumerate() {
        for stratum in Stratum::ALL {
            let mask = stratum.mask(first.had_missing());
            let mut briers = Vec::new();
            let mut r_ind = Vec::new();
            for set in replicates {
                match brier_ipcw_with(set.combined(h), data.time(), data.status(), t, &censoring, Some(&mask)) {
                    Ok(b) => briers.push(b),
                    Err(Error::EmptyFilter(_)) => {}
                    Err(e) => return Err(e.context(format!("Brier score at {t}"))),
                }
                if set.k() >= 2 {
                    match variation_r_rows(set.constituents(h), Some(&mask)) {
                        Ok(v) => r_ind.push(v),
                        Err(Error::EmptyFilter(_)) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
            let r_rep = if replicates.len() >= 2 {
                let m = Array2::from_shape_fn((data.n(), replicates.len()), |(i, r)| replicates[r].combined(h)[i]);
                match variation_r_rows(m.view(), Some(&mask)) {
                    Ok(v) => Some(v),
                    Err(Error::EmptyFilter(_)) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            report.push(method, k, t, stratum, Metric::BrierMean, mean(&briers));
            report.push(method, k, t, stratum, Metric::BrierSd, sample_sd(&briers));
            report.push(method, k, t, stratum, Metric::RReplicates, r_rep);
            report.push(method, k, t, stratum, Metric::RIndividual, mean(&r_ind));
        }
    }
    Ok(report)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    let path = dir.join(name);
    std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))
}

fn finish_manifest(mut manifest: Manifest, dir: &Path, files: &[String]) -> Result<Manifest> {
    for name in files {
        manifest.outputs.push(file_digest(&dir.join(name), name.clone())?);
    }
    manifest.save(&dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Loads the configured input, runs [`run_crossval`] and writes
/// `report.csv`, `report.json`, `predictions_<method>.csv` and the manifest
/// into `out_dir`.
pub fn cmd_crossval(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::Parameter("no input dataset configured".into()))?;
    let spec_path = cfg
        .spec
        .as_ref()
        .ok_or_else(|| Error::Parameter("no column spec configured".into()))?;
    let spec = DatasetSpec::load(spec_path)?;
    let data = load_csv(input, &spec)?;
    let out = run_crossval(&data, cfg)?;

    create_dir(out_dir)?;
    let mut files = vec!["report.csv".to_string(), "report.json".to_string()];
    write_file(out_dir, "report.csv", |b| write_report_csv(b, &out.report))?;
    write_file(out_dir, "report.json", |b| write_report_json(b, &out.report))?;
    for (m, sets) in &out.predictions {
        let name = format!("predictions_{}.csv", m.as_str());
        write_file(out_dir, &name, |b| write_predictions_csv(b, sets))?;
        files.push(name);
    }

    let recorded = RunConfig {
        output: None,
        ..cfg.clone()
    };
    let mut manifest = Manifest::new("crossval", &recorded, cfg.seed)?;
    manifest.seeds = (0..cfg.replicates)
        .map(|r| SeedEntry {
            label: format!("replicate {r}"),
            seed: crossval_replicate_seed(cfg.seed, r),
        })
        .collect();
    manifest.inputs = vec![
        file_digest(input, input.display().to_string())?,
        file_digest(spec_path, spec_path.display().to_string())?,
    ];
    finish_manifest(manifest, out_dir, &files)
}

pub fn run_simulate(cfg: &SimulateConfig) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let out = run_scenario_detailed(&cfg.scenario, &cfg.methods, &cfg.scenario.horizons)?;
    log::info!(
        "{} simulations x {} replicates finished in {:.2?}",
        cfg.scenario.simulations,
        cfg.scenario.replicates,
        started.elapsed()
    );
    if out.diagnostics.fallback_draws > 0 {
        log::warn!("{} imputation draws fell back to donor sampling", out.diagnostics.fallback_draws);
    }
    Ok(out)
}

/// Runs the scenario and writes `report.csv`, `report.json` and the manifest.
pub fn cmd_simulate(cfg: &SimulateConfig, out_dir: &Path) -> Result<Manifest> {
    let out = run_simulate(cfg)?;
    create_dir(out_dir)?;
    write_file(out_dir, "report.csv", |b| write_report_csv(b, &out.report))?;
    write_file(out_dir, "report.json", |b| write_report_json(b, &out.report))?;

    let sc = &cfg.scenario;
    let recorded = SimulateConfig {
        output: None,
        ..cfg.clone()
    };
    let mut manifest = Manifest::new("simulate", &recorded, sc.seed)?;
    for s in 0..sc.simulations {
        manifest.seeds.push(SeedEntry {
            label: format!("dataset {s}"),
            seed: dataset_seed(sc.seed, s),
        });
        manifest.seeds.push(SeedEntry {
            label: format!("amputation {s}"),
            seed: amputation_seed(sc.seed, s),
        });
        for r in 0..sc.replicates {
            manifest.seeds.push(SeedEntry {
                label: format!("replicate {s}/{r}"),
                seed: replicate_seed(sc.seed, s, r),
            });
        }
    }
    finish_manifest(manifest, out_dir, &["report.csv".into(), "report.json".into()])
}

/// Re-runs the command recorded in `manifest_path` into `out_dir`.
pub fn rerun_manifest(manifest_path: &Path, out_dir: &Path) -> Result<Manifest> {
    let manifest = Manifest::load(manifest_path)?;
    match manifest.command.as_str() {
        "crossval" => cmd_crossval(&manifest.config_as::<RunConfig>()?, out_dir),
        "simulate" => cmd_simulate(&manifest.config_as::<SimulateConfig>()?, out_dir),
        other => Err(Error::Parameter(format!("manifest records unknown command `{other}`"))),
    }
}

/// Default output directory when none is configured.
pub fn default_output(command: &str) -> PathBuf {
    PathBuf::from(format!("coxmi-{command}"))
}
