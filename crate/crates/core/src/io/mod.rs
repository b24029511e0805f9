//! CSV data, configuration files, reports and run manifests.

pub mod config;
pub mod data;
pub mod manifest;
pub mod model;
pub mod report;
pub mod runs;

pub use config::{overlay, read_table, RunConfig, SimulateConfig};
pub use data::{
    load_csv, load_predictors_csv, read_csv, save_csv, write_csv, ColumnRole, ColumnSpec,
    DatasetSpec,
};
pub use manifest::{file_digest, sha256_hex, FileDigest, Manifest, SeedEntry, MANIFEST_FILE};
pub use model::{write_survival_csv, SavedModel};
pub use report::{
    read_predictions_csv, write_predictions_csv, write_report_csv, write_report_json,
    REPORT_HEADER,
};
pub use runs::{
    assess_replicates, cmd_crossval, cmd_simulate, crossval_replicate_seed, default_output,
    rerun_manifest, run_crossval, run_simulate, CrossvalOutput,
};
