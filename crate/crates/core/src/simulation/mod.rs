//! Simulated survival data with controlled missingness, and the scenario
//! runner that scores the calibration strategies on it.

pub mod amputation;
pub mod config;
pub mod generate;
pub mod scenario;

pub use amputation::{calibrate_mar_multiplier, induce_mar, induce_mcar, mar_probabilities};
pub use config::{default_covariance, Mechanism, ScenarioConfig};
pub use generate::{gen_dataset, true_survival, SimulatedDataset};
pub use scenario::{
    amputation_seed, dataset_seed, replicate_seed, run_scenario, run_scenario_detailed,
    simulate_dataset, ReplicateOutcome, ScenarioOutcome, SimulationRecord,
};
