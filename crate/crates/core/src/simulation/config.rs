use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::pipelines::Combine;

const COVARIANCE_STANDIN: &str = include_str!("../../data/covariance_standin.csv");

/// Missing-data mechanism applied to the first predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Mcar,
    Mar,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
        }
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcar" => Ok(Mechanism::Mcar),
            "mar" => Ok(Mechanism::Mar),
            other => Err(Error::Parameter(format!("unknown mechanism `{other}`"))),
        }
    }
}

/// The built-in 4×4 covariance of the generator.
pub fn default_covariance() -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    let rows = COVARIANCE_STANDIN
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    for (i, line) in rows.enumerate() {
        for (j, cell) in line.split(',').enumerate() {
            out[i][j] = cell.trim().parse().expect("bundled covariance is numeric");
        }
    }
    out
}

/// One cell of the simulation design plus run sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub beta1: f64,
    pub missing_fraction: f64,
    pub mechanism: Mechanism,
    pub n: usize,
    /// Simulated datasets S.
    pub simulations: usize,
    /// Replicate analyses R per dataset.
    pub replicates: usize,
    /// Imputations K.
    pub k: usize,
    /// Cross-validation folds L.
    pub folds: usize,
    /// Baseline hazard per month.
    pub lambda: f64,
    pub fixed_betas: [f64; 3],
    pub censor_interval: [f64; 2],
    pub admin_censor: f64,
    pub covariance: [[f64; 4]; 4],
    /// Prediction times in months.
    pub horizons: Vec<f64>,
    pub combine: Combine,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            beta1: 2f64.ln(),
            missing_fraction: 0.10,
            mechanism: Mechanism::Mcar,
            n: 1000,
            simulations: 100,
            replicates: 20,
            k: 10,
            folds: 10,
            lambda: 0.0073,
            fixed_betas: [1.2f64.ln(), 0.85f64.ln(), 0.75f64.ln()],
            censor_interval: [13.5, 167.5],
            admin_censor: 84.0,
            covariance: default_covariance(),
            horizons: vec![12.0, 60.0],
            combine: Combine::Mean,
            seed: 20_200_601,
        }
    }
}

impl ScenarioConfig {
    /// Scenario 1–4: low/high `beta1` crossed with 10%/50% missingness.
    pub fn preset(scenario: u8, mechanism: Mechanism) -> Result<Self> {
        let (beta1, fraction) = match scenario {
            1 => (1.1f64.ln(), 0.10),
            2 => (2f64.ln(), 0.10),
            3 => (1.1f64.ln(), 0.50),
            4 => (2f64.ln(), 0.50),
            other => {
                return Err(Error::Parameter(format!(
                    "unknown scenario {other}; expected 1, 2, 3 or 4"
                )))
            }
        };
        Ok(Self {
            beta1,
            missing_fraction: fraction,
            mechanism,
            ..Self::default()
        })
    }

    /// The eight scenario × mechanism cells.
    pub fn grid() -> Vec<(u8, Mechanism, Self)> {
        let mut out = Vec::with_capacity(8);
        for s in 1..=4 {
            for m in [Mechanism::Mcar, Mechanism::Mar] {
                out.push((s, m, Self::preset(s, m).expect("valid scenario id")));
            }
        }
        out
    }

    /// Reduced sizes for quick runs: n = 500, S = 20, R = 5, K = 10.
    pub fn desk(mut self) -> Self {
        self.n = 500;
        self.simulations = 20;
        self.replicates = 5;
        self.k = 10;
        self
    }

    pub fn beta(&self) -> [f64; 4] {
        let [b2, b3, b4] = self.fixed_betas;
        [self.beta1, b2, b3, b4]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !(self.missing_fraction > 0.0 && self.missing_fraction < 1.0) {
            return bad(format!("missing fraction {} not in (0, 1)", self.missing_fraction));
        }
        if self.n < 2 || self.simulations < 1 || self.replicates < 1 || self.k < 1 {
            return bad("n must be at least 2 and S, R, K at least 1".into());
        }
        if self.folds < 2 || self.folds > self.n {
            return bad(format!("fold count {} not in [2, n]", self.folds));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("baseline hazard {} must be positive", self.lambda));
        }
        let [lo, hi] = self.censor_interval;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return bad(format!("censoring interval [{lo}, {hi}] is not a positive range"));
        }
        if !(self.admin_censor > 0.0) {
            return bad("administrative censoring time must be positive".into());
        }
        if self.beta().iter().any(|b| !b.is_finite()) {
            return bad("coefficients must be finite".into());
        }
        if self.horizons.is_empty()
            || self.horizons.iter().any(|t| !(*t > 0.0 && t.is_finite()))
            || self.horizons.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("horizons must be positive and strictly increasing".into());
        }
        self.covariance_factor().map(|_| ())
    }

    /// Lower Cholesky factor of the covariance.
    pub fn covariance_factor(&self) -> Result<ndarray::Array2<f64>> {
        let c = &self.covariance;
        for i in 0..4 {
            for j in 0..i {
                if c[i][j] != c[j][i] {
                    return Err(Error::Parameter("covariance is not symmetric".into()));
                }
            }
        }
        let a = ndarray::Array2::from_shape_fn((4, 4), |(i, j)| c[i][j]);
        cholesky(&a, 1e-12).ok_or_else(|| Error::Parameter("covariance is not positive definite".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_covariance_is_spd() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.covariance[0][1], -0.40);
        cfg.validate().unwrap();
    }

    #[test]
    fn grid_has_eight_cells() {
        let grid = ScenarioConfig::grid();
        assert_eq!(grid.len(), 8);
        assert_eq!(grid[5].2.missing_fraction, 0.5);
        assert_eq!(grid[5].2.beta1, 1.1f64.ln());
        assert!(ScenarioConfig::preset(5, Mechanism::Mar).is_err());
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let mut cfg = ScenarioConfig::default();
        cfg.covariance[0][1] = 1.5;
        cfg.covariance[1][0] = 1.5;
        assert!(matches!(cfg.validate(), Err(Error::Parameter(_))));
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScenarioConfig::preset(3, Mechanism::Mar).unwrap().desk();
        let text = toml::to_string(&cfg).unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: ScenarioConfig = toml::from_str("n = 50\nmechanism = \"mar\"").unwrap();
        assert_eq!(partial.n, 50);
        assert_eq!(partial.mechanism, Mechanism::Mar);
    }
}
