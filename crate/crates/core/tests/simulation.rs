use coxmi::assessment::{Metric, Stratum};
use coxmi::pipelines::Method;
use coxmi::simulation::{
    calibrate_mar_multiplier, gen_dataset, induce_mar, induce_mcar, mar_probabilities,
    run_scenario, run_scenario_detailed, true_survival, Mechanism, ScenarioConfig,
};
use coxmi::survival::kaplan_meier;
use coxmi::{Error, SurvivalDataset};
use ndarray::Array2;

fn cfg(n: usize) -> ScenarioConfig {
    ScenarioConfig {
        n,
        ..ScenarioConfig::default()
    }
}

#[test]
fn null_model_survival_at_84_months() {
    // exp(-0.0073 * 84) = exp(-0.6132)
    let expected = (-0.6132f64).exp();
    assert!((expected - 0.5416).abs() < 5e-5);
    assert_eq!(true_survival(0.0073, 0.0, 84.0), expected);
    let mut c = cfg(50);
    c.beta1 = 0.0;
    c.fixed_betas = [0.0; 3];
    let sim = gen_dataset(&c, 3).unwrap();
    assert!(sim.true_survival(84.0).iter().all(|s| (*s - expected).abs() < 1e-15));
}

#[test]
fn generated_outcomes_follow_the_censoring_rules() {
    let c = cfg(2000);
    let sim = gen_dataset(&c, 11).unwrap();
    let d = &sim.dataset;
    assert!(d.time().iter().all(|&t| t > 0.0 && t <= 84.0));
    // administratively censored subjects sit exactly at 84 and are never events
    for (t, s) in d.time().iter().zip(d.status()) {
        if *t == 84.0 {
            assert!(!s);
        }
    }
    assert_eq!(gen_dataset(&c, 11).unwrap(), sim);
    assert_ne!(gen_dataset(&c, 12).unwrap(), sim);
}

/// Independent event-fraction oracle: 10^6 subjects drawn with a separate
/// generator and the closed-form Cholesky factor.
fn event_fraction_oracle(c: &ScenarioConfig, draws: usize) -> f64 {
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    let l = c.covariance_factor().unwrap();
    let beta = c.beta();
    let mut events = 0usize;
    for _ in 0..draws {
        let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let mut eta = 0.0;
        for i in 0..4 {
            let xi: f64 = (0..=i).map(|j| l[[i, j]] * z[j]).sum();
            eta += xi * beta[i];
        }
        let u: f64 = rng.random();
        let t = -(1.0 - u).ln() / (c.lambda * eta.exp());
        let cens = 13.5 + rng.random::<f64>() * 154.0;
        if t <= cens.min(84.0) {
            events += 1;
        }
    }
    events as f64 / draws as f64
}

#[test]
fn event_fraction_matches_monte_carlo_oracle() {
    let c = cfg(20_000);
    let oracle_draws = 1_000_000;
    let p = event_fraction_oracle(&c, oracle_draws);
    let sim = gen_dataset(&c, 5).unwrap();
    let observed = sim.dataset.status().iter().filter(|s| **s).count() as f64 / c.n as f64;
    let se = (p * (1.0 - p) * (1.0 / c.n as f64 + 1.0 / oracle_draws as f64)).sqrt();
    assert!((observed - p).abs() <= 2.0 * se, "observed {observed}, oracle {p}, se {se}");
}

#[test]
fn true_survival_matches_uncensored_kaplan_meier() {
    let mut c = cfg(100_000);
    c.censor_interval = [1e6, 2e6];
    c.admin_censor = 1e7;
    let sim = gen_dataset(&c, 21).unwrap();
    let km = kaplan_meier(sim.dataset.time(), sim.dataset.status());
    for t in [12.0, 60.0, 84.0] {
        let truth: f64 = sim.true_survival(t).iter().sum::<f64>() / c.n as f64;
        let est = km.eval(t);
        assert!((est - truth).abs() / truth < 0.01, "t={t}: km {est}, truth {truth}");
    }
}

#[test]
fn mcar_count_and_independence() {
    let base = gen_dataset(&cfg(1000), 1).unwrap().dataset;
    // 99% binomial interval for Binomial(1000, 0.5): 500 +- 2.576 * sqrt(250)
    let half_width = 2.576 * 250f64.sqrt();
    let mut corrs = Vec::new();
    for seed in 0..100u64 {
        let d = induce_mcar(&base, 0.5, seed).unwrap();
        let miss = d.missing_count(0) as f64;
        if seed < 20 {
            assert!((miss - 500.0).abs() <= half_width, "seed {seed}: {miss}");
        }
        let ind: Vec<f64> = (0..1000).map(|i| d.is_missing(i, 0) as u8 as f64).collect();
        corrs.push(correlation(&ind, &base.predictors().column(1).to_vec()));
    }
    let bound = 3.0 / 1000f64.sqrt();
    let outside = corrs.iter().filter(|r| r.abs() > bound).count();
    // a 3-sigma band leaves ~0.3% outside under independence
    assert!(outside <= 2, "{outside} of 100 correlations beyond {bound}");
}

#[test]
fn amputation_touches_only_the_first_column() {
    let base = gen_dataset(&cfg(300), 2).unwrap().dataset;
    for d in [induce_mcar(&base, 0.3, 1).unwrap(), induce_mar(&base, 0.3, 1).unwrap()] {
        assert_eq!(d.time(), base.time());
        assert_eq!(d.status(), base.status());
        for j in 1..4 {
            assert_eq!(d.predictors().column(j), base.predictors().column(j));
            assert_eq!(d.missing_count(j), 0);
        }
        for i in 0..300 {
            if !d.is_missing(i, 0) {
                assert_eq!(d.predictors()[[i, 0]].to_bits(), base.predictors()[[i, 0]].to_bits());
            }
        }
    }
}

#[test]
fn mar_calibration_and_direction() {
    let base = gen_dataset(&cfg(1000), 3).unwrap().dataset;
    // without clipping the multiplier equals the expected fraction
    let m = calibrate_mar_multiplier(&base, 0.1).unwrap();
    let p = mar_probabilities(&base, m).unwrap();
    if p.iter().all(|&q| q < 1.0) {
        assert!((m - 0.1).abs() < 1e-9);
    }
    for target in [0.1, 0.5] {
        let m = calibrate_mar_multiplier(&base, target).unwrap();
        let p = mar_probabilities(&base, m).unwrap();
        let expected = p.iter().sum::<f64>() / p.len() as f64;
        assert!((expected - target).abs() < 0.005);
    }
    // the subject at the minimum of X2 is never deleted
    let x2 = base.predictors().column(1);
    let argmin = (0..1000).min_by(|&a, &b| x2[a].total_cmp(&x2[b])).unwrap();
    let d = induce_mar(&base, 0.5, 7).unwrap();
    assert!(!d.is_missing(argmin, 0));
    // deletion is positively associated with X2
    let ind: Vec<f64> = (0..1000).map(|i| d.is_missing(i, 0) as u8 as f64).collect();
    let r = correlation(&ind, &x2.to_vec());
    // one-sided 99% critical value for n = 1000
    assert!(r > 2.326 / 1000f64.sqrt(), "point-biserial {r}");
    // realized fraction close to target
    let frac = d.missing_count(0) as f64 / 1000.0;
    assert!((frac - 0.5).abs() < 2.576 * (0.25f64 / 1000.0).sqrt());
}

#[test]
fn mar_rejects_constant_driver() {
    let mut x = Array2::<f64>::zeros((5, 4));
    x.column_mut(0).assign(&ndarray::array![1.0, 2.0, 3.0, 4.0, 5.0]);
    let d = SurvivalDataset::complete(vec![1.0; 5], vec![true; 5], x).unwrap();
    assert!(matches!(induce_mar(&d, 0.5, 1), Err(Error::Degenerate(_))));
    assert!(matches!(induce_mcar(&d, 1.0, 1), Err(Error::Parameter(_))));
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn degenerate_counts_report_absent_variation() {
    let mut c = ScenarioConfig::preset(2, Mechanism::Mcar).unwrap();
    c.n = 200;
    c.simulations = 1;
    c.replicates = 1;
    c.k = 1;
    let report = run_scenario(&c, &[Method::Ap1], &[60.0]).unwrap();
    let get = |m| report.get("ap1", 1, 60.0, Stratum::All, m);
    assert!(get(Metric::BrierMean).is_some());
    assert!(get(Metric::BiasMean).is_some());
    assert!(get(Metric::RReplicates).is_none());
    assert!(get(Metric::RIndividual).is_none());
    assert!(get(Metric::BrierSd).is_none());
}

#[test]
fn scenario_runs_are_reproducible() {
    let mut c = ScenarioConfig::preset(4, Mechanism::Mar).unwrap();
    c.n = 150;
    c.simulations = 2;
    c.replicates = 2;
    c.k = 2;
    c.folds = 5;
    let methods = [Method::Ap1, Method::Ap2B, Method::Nv1];
    let a = run_scenario_detailed(&c, &methods, &[12.0, 60.0]).unwrap();
    let b = run_scenario_detailed(&c, &methods, &[12.0, 60.0]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.replicates.len(), 2 * 2 * 3);
    assert_eq!(a.report.rows.len(), 3 * 2 * 3 * 5);
    // strata partition the subjects
    for rec in &a.simulations {
        let missing = rec.had_missing.iter().filter(|m| **m).count();
        assert!(missing > 0 && missing < rec.had_missing.len());
    }
}
