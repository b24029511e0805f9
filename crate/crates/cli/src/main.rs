//! `coxmi` command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coxmi::io::{
    assess_replicates, cmd_crossval, cmd_simulate, default_output, load_csv, load_predictors_csv,
    overlay, read_predictions_csv, read_table, rerun_manifest, save_csv, write_predictions_csv,
    write_report_csv, write_report_json, write_survival_csv, DatasetSpec, RunConfig, SavedModel,
    SimulateConfig,
};
use coxmi::pipelines::{run_methods, Combine, Method, Protocol, RunSettings};
use coxmi::simulation::{simulate_dataset, Mechanism, ScenarioConfig};

#[derive(Parser)]
#[command(name = "coxmi", version, about = "Cox prediction rules with multiply imputed predictors")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "COXMI_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a pooled model (ap2A or ap2B) on a dataset and save it as JSON.
    Fit(FitArgs),
    /// Predict survival for new subjects.
    Predict(PredictArgs),
    /// Cross-validate one or more methods on a dataset.
    Crossval(CrossvalArgs),
    /// Run a simulation scenario.
    Simulate(SimulateArgs),
    /// Assess a predictions file written by `crossval` or `predict`.
    Assess(AssessArgs),
}

/// Flags shared by the commands that read a RunConfig.
#[derive(Args)]
struct RunFlags {
    /// Methods, comma separated (ap1, ap2A, ap2B, nv1, nv2A, nv2B).
    #[arg(long = "method", value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Number of imputations K.
    #[arg(long)]
    k: Option<usize>,
    /// Prediction horizons, comma separated.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    /// How the K predictions are combined (mean, median, logit_mean).
    #[arg(long)]
    combine: Option<Combine>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file; its keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunFlags {
    fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig, CliError> {
        if let Some(m) = &self.methods {
            cfg.methods = m.clone();
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(h) = &self.horizons {
            cfg.horizons = h.clone();
        }
        if let Some(c) = self.combine {
            cfg.combine = c;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(path) = &self.config {
            cfg = overlay(&cfg, &read_table(path).map_err(CliError::Usage)?).map_err(CliError::Usage)?;
        }
        cfg.validate().map_err(CliError::Usage)?;
        Ok(cfg)
    }

    fn settings(cfg: &RunConfig) -> RunSettings {
        let mut s = RunSettings::new(cfg.k, cfg.seed, cfg.horizons.clone());
        s.combine = cfg.combine;
        s
    }
}

#[derive(Args)]
struct FitArgs {
    /// Dataset CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Column spec TOML.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
    /// Model file to write.
    #[arg(long, short, default_value = "model.json")]
    output: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Predictor CSV of the new subjects; outcome columns are ignored.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    /// Saved model from `fit`; new rows must be fully observed.
    #[arg(long, conflicts_with = "calibration", required_unless_present = "calibration")]
    model: Option<PathBuf>,
    /// Calibration dataset; new rows are imputed jointly with it.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
    /// Output file (with --model) or directory (with --calibration).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CrossvalArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
    /// Number of folds L.
    #[arg(long)]
    folds: Option<usize>,
    /// Independent repetitions of the whole cross-validation.
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Re-run the command recorded in a manifest.
    #[arg(long, conflicts_with_all = ["input", "config"])]
    manifest: Option<PathBuf>,
}

#[derive(Clone, Copy)]
enum ScenarioId {
    One(u8),
    All,
}

fn parse_scenario(s: &str) -> Result<ScenarioId, String> {
    match s {
        "all" => Ok(ScenarioId::All),
        _ => match s.parse::<u8>() {
            Ok(n @ 1..=4) => Ok(ScenarioId::One(n)),
            _ => Err(format!("`{s}` is not a scenario; use 1, 2, 3, 4 or all")),
        },
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario 1-4, or `all` for the full grid.
    #[arg(long, value_parser = parse_scenario, default_value = "1")]
    scenario: ScenarioId,
    /// Missingness mechanism; with `--scenario all` both are run unless given.
    #[arg(long)]
    mechanism: Option<Mechanism>,
    /// Reduced sizes: n = 500, 20 datasets, 5 replicates, K = 10.
    #[arg(long)]
    desk: bool,
    #[arg(long = "method", value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    simulations: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file; its keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write simulated dataset 0 as data.csv and spec.toml into this
    /// directory instead of running the scenario.
    #[arg(long)]
    export_dataset: Option<PathBuf>,
    /// Re-run the command recorded in a manifest.
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct AssessArgs {
    /// Predictions CSV from `crossval`.
    #[arg(long)]
    predictions: PathBuf,
    /// Dataset the predictions were made for.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    /// Method label written into the report.
    #[arg(long, default_value = "ap1")]
    method: String,
    #[arg(long, default_value = "mean")]
    combine: Combine,
    /// Directory for report.csv and report.json; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

enum CliError {
    Usage(coxmi::Error),
    Domain(coxmi::Error),
}

impl From<coxmi::Error> for CliError {
    fn from(e: coxmi::Error) -> Self {
        CliError::Domain(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Crossval(a) => crossval(a),
        Command::Simulate(a) => simulate(a),
        Command::Assess(a) => assess(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn required(path: Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    path.ok_or_else(|| CliError::Usage(coxmi::Error::Parameter(format!("no {what} given"))))
}

fn fit(a: FitArgs) -> Result<(), CliError> {
    let cfg = a.run.apply(RunConfig {
        methods: vec![Method::Ap2A],
        input: a.input,
        spec: a.spec,
        ..RunConfig::default()
    })?;
    let spec = DatasetSpec::load(&required(cfg.spec.clone(), "--spec")?)?;
    let data = load_csv(&required(cfg.input.clone(), "--input")?, &spec)?;
    let [method] = cfg.methods[..] else {
        return Err(CliError::Usage(coxmi::Error::Parameter("fit takes exactly one method".into())));
    };
    let model = SavedModel::fit(&data, method, &RunFlags::settings(&cfg))?;
    model.save(&a.output)?;
    log::info!("wrote {}", a.output.display());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<(), CliError> {
    let cfg = a.run.apply(RunConfig::default())?;
    let spec = DatasetSpec::load(&a.spec)?;
    let block = load_predictors_csv(&a.input, &spec)?;
    if let Some(path) = a.model {
        let model = SavedModel::load(&path)?;
        let survival = model.predict(&block, &cfg.horizons)?;
        match a.output {
            Some(out) => {
                let file = std::fs::File::create(&out).map_err(|e| coxmi::Error::io(&out, e))?;
                write_survival_csv(file, &cfg.horizons, &survival)?;
            }
            None => write_survival_csv(std::io::stdout().lock(), &cfg.horizons, &survival)?,
        }
        return Ok(());
    }
    let calibration = load_csv(&required(a.calibration, "--calibration")?, &spec)?;
    let out_dir = a.output.unwrap_or_else(|| default_output("predict"));
    let sets = run_methods(&calibration, Protocol::Validation(&block), &cfg.methods, &RunFlags::settings(&cfg))?;
    std::fs::create_dir_all(&out_dir).map_err(|e| coxmi::Error::io(&out_dir, e))?;
    for (m, set) in sets {
        let path = out_dir.join(format!("predictions_{}.csv", m.as_str()));
        let file = std::fs::File::create(&path).map_err(|e| coxmi::Error::io(&path, e))?;
        write_predictions_csv(file, std::slice::from_ref(&set))?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn crossval(a: CrossvalArgs) -> Result<(), CliError> {
    if let Some(manifest) = a.manifest {
        let out = a.output.unwrap_or_else(|| default_output("crossval"));
        rerun_manifest(&manifest, &out)?;
        log::info!("re-ran {} into {}", manifest.display(), out.display());
        return Ok(());
    }
    let mut base = RunConfig {
        input: a.input,
        spec: a.spec,
        output: a.output,
        ..RunConfig::default()
    };
    if let Some(l) = a.folds {
        base.folds = l;
    }
    if let Some(r) = a.replicates {
        base.replicates = r;
    }
    let cfg = a.run.apply(base)?;
    let out = cfg.output.clone().unwrap_or_else(|| default_output("crossval"));
    cmd_crossval(&cfg, &out)?;
    log::info!("wrote {}", out.display());
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    if let Some(manifest) = &a.manifest {
        let out = a.output.clone().unwrap_or_else(|| default_output("simulate"));
        rerun_manifest(manifest, &out)?;
        log::info!("re-ran {} into {}", manifest.display(), out.display());
        return Ok(());
    }
    let cells: Vec<(u8, Mechanism)> = match a.scenario {
        ScenarioId::One(s) => vec![(s, a.mechanism.unwrap_or(Mechanism::Mcar))],
        ScenarioId::All => (1..=4)
            .flat_map(|s| {
                a.mechanism
                    .map_or(vec![Mechanism::Mcar, Mechanism::Mar], |m| vec![m])
                    .into_iter()
                    .map(move |m| (s, m))
            })
            .collect(),
    };
    let file = a.config.as_deref().map(read_table).transpose().map_err(CliError::Usage)?;
    let root = a.output.clone().unwrap_or_else(|| default_output("simulate"));
    let grid = cells.len() > 1;
    for (s, mechanism) in cells {
        let cfg = simulate_config(&a, s, mechanism, file.as_ref())?;
        if let Some(dir) = &a.export_dataset {
            return export_dataset(&cfg.scenario, dir);
        }
        let out = if grid {
            root.join(format!("scenario{s}_{}", mechanism.as_str()))
        } else {
            root.clone()
        };
        log::info!("scenario {s} ({}) -> {}", mechanism.as_str(), out.display());
        cmd_simulate(&cfg, &out)?;
    }
    Ok(())
}

fn simulate_config(
    a: &SimulateArgs,
    scenario: u8,
    mechanism: Mechanism,
    file: Option<&toml::Table>,
) -> Result<SimulateConfig, CliError> {
    let mut sc = ScenarioConfig::preset(scenario, mechanism).map_err(CliError::Usage)?;
    if a.desk {
        sc = sc.desk();
    }
    let fields = [
        (a.n, &mut sc.n),
        (a.simulations, &mut sc.simulations),
        (a.replicates, &mut sc.replicates),
        (a.k, &mut sc.k),
        (a.folds, &mut sc.folds),
    ];
    for (flag, field) in fields {
        if let Some(v) = flag {
            *field = v;
        }
    }
    if let Some(seed) = a.seed {
        sc.seed = seed;
    }
    let mut cfg = SimulateConfig {
        scenario: sc,
        ..SimulateConfig::default()
    };
    if let Some(m) = &a.methods {
        cfg.methods = m.clone();
    }
    if let Some(table) = file {
        cfg = overlay(&cfg, table).map_err(CliError::Usage)?;
    }
    cfg.validate().map_err(CliError::Usage)?;
    Ok(cfg)
}

fn export_dataset(cfg: &ScenarioConfig, dir: &Path) -> Result<(), CliError> {
    let sim = simulate_dataset(cfg, 0)?;
    let spec = DatasetSpec::for_dataset(&sim.dataset);
    std::fs::create_dir_all(dir).map_err(|e| coxmi::Error::io(dir, e))?;
    save_csv(&dir.join("data.csv"), &sim.dataset, &spec)?;
    let text = toml::to_string(&spec).map_err(|e| coxmi::Error::Serialization(e.to_string()))?;
    let path = dir.join("spec.toml");
    std::fs::write(&path, text).map_err(|e| coxmi::Error::io(&path, e))?;
    log::info!("wrote {} subjects to {}", sim.dataset.n(), dir.display());
    Ok(())
}

fn assess(a: AssessArgs) -> Result<(), CliError> {
    let spec = DatasetSpec::load(&a.spec)?;
    let data = load_csv(&a.input, &spec)?;
    let file = std::fs::File::open(&a.predictions).map_err(|e| coxmi::Error::io(&a.predictions, e))?;
    let sets = read_predictions_csv(file, a.combine)?;
    let k = sets.first().map_or(0, |s| s.k());
    let report = assess_replicates(&data, &a.method, k, &sets)?;
    match a.output {
        Some(dir) => {
            std::fs::create_dir_all(&dir).map_err(|e| coxmi::Error::io(&dir, e))?;
            for (name, json) in [("report.csv", false), ("report.json", true)] {
                let path = dir.join(name);
                let file = std::fs::File::create(&path).map_err(|e| coxmi::Error::io(&path, e))?;
                if json {
                    write_report_json(file, &report)?;
                } else {
                    write_report_csv(file, &report)?;
                }
            }
        }
        None => write_report_csv(std::io::stdout().lock(), &report)?,
    }
    Ok(())
}
