use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Open01, StandardNormal};

use crate::error::Result;
use crate::linalg::lower_mul;
use crate::seed;
use crate::simulation::config::ScenarioConfig;
use crate::survival::data::SurvivalDataset;

/// A simulated dataset together with its generating model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDataset {
    pub dataset: SurvivalDataset,
    /// `x_i β` under the true coefficients, computed before amputation.
    pub linear_predictor: Vec<f64>,
    pub lambda: f64,
}

impl SimulatedDataset {
    /// `S(t | x_i) = exp(−λ t e^{x_i β})` for every subject.
    pub fn true_survival(&self, t: f64) -> Vec<f64> {
        self.linear_predictor
            .iter()
            .map(|&eta| true_survival(self.lambda, eta, t))
            .collect()
    }
}

pub fn true_survival(lambda: f64, eta: f64, t: f64) -> f64 {
    (-lambda * t * eta.exp()).exp()
}

/// Draws `cfg.n` subjects: correlated normal predictors, exponential event
/// times, uniform censoring and administrative censoring.
pub fn gen_dataset(cfg: &ScenarioConfig, seed: u64) -> Result<SimulatedDataset> {
    cfg.validate()?;
    let factor = cfg.covariance_factor()?;
    let beta = cfg.beta();
    let [c_lo, c_hi] = cfg.censor_interval;
    let mut rng = seed::rng(seed);

    let n = cfg.n;
    let mut x = Array2::<f64>::zeros((n, 4));
    let mut eta = Vec::with_capacity(n);
    let mut time = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    for i in 0..n {
        let z: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
        let row = lower_mul(&factor, &z);
        let lp: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
        for (j, v) in row.into_iter().enumerate() {
            x[[i, j]] = v;
        }
        let u: f64 = rng.sample(Open01);
        let event = -u.ln() / (cfg.lambda * lp.exp());
        let censor = rng.random_range(c_lo..=c_hi);
        let stop = censor.min(cfg.admin_censor);
        eta.push(lp);
        time.push(event.min(stop));
        status.push(event <= stop);
    }
    let dataset = SurvivalDataset::complete(time, status, x)?;
    Ok(SimulatedDataset {
        dataset,
        linear_predictor: eta,
        lambda: cfg.lambda,
    })
}
