use coxmi::imputation::{
    build_augmented, impute_chained, impute_single, ImputationOptions, PredictorBlock,
};
use coxmi::simulation::{gen_dataset, induce_mcar, ScenarioConfig};
use coxmi::survival::{ColumnKind, SurvivalDataset};
use coxmi::Error;
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn simulated(n: usize, fraction: f64, seed: u64) -> (SurvivalDataset, SurvivalDataset) {
    let mut cfg = ScenarioConfig::default();
    cfg.n = n;
    cfg.covariance = [
        [1.0, 0.7, 0.5, 0.0],
        [0.7, 1.0, 0.4, 0.0],
        [0.5, 0.4, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];
    let full = gen_dataset(&cfg, seed).unwrap().dataset;
    let amputed = induce_mcar(&full, fraction, seed + 1).unwrap();
    (full, amputed)
}

#[test]
fn complete_data_gives_identical_copies() {
    let (full, _) = simulated(80, 0.3, 1);
    let aug = build_augmented(&full, &PredictorBlock::empty(4)).unwrap();
    let stack = impute_chained(&aug, 4, 5, 9).unwrap();
    for c in stack.copies() {
        assert_eq!(&c.predictors, full.predictors());
    }
}

#[test]
fn observed_cells_survive_and_imputed_values_come_from_donors() {
    let (_, data) = simulated(120, 0.4, 2);
    let aug = build_augmented(&data, &PredictorBlock::empty(4)).unwrap();
    let stack = impute_chained(&aug, 3, 5, 3).unwrap();
    let observed: Vec<f64> = (0..data.n())
        .filter(|&i| !data.is_missing(i, 0))
        .map(|i| data.predictors()[[i, 0]])
        .collect();
    for c in stack.copies() {
        for ((i, j), v) in c.predictors.indexed_iter() {
            if data.is_missing(i, j) {
                assert!(observed.iter().any(|o| o.to_bits() == v.to_bits()));
            } else {
                assert_eq!(v.to_bits(), data.predictors()[[i, j]].to_bits());
            }
        }
    }
    assert_ne!(stack.copy(0), stack.copy(1));
}

#[test]
fn fixed_seed_is_reproducible() {
    let (_, data) = simulated(100, 0.3, 4);
    let aug = build_augmented(&data, &PredictorBlock::empty(4)).unwrap();
    let opts = ImputationOptions::default();
    assert_eq!(impute_single(&aug, 77, &opts).unwrap(), impute_single(&aug, 77, &opts).unwrap());
    assert_ne!(impute_single(&aug, 77, &opts).unwrap().0, impute_single(&aug, 78, &opts).unwrap().0);
}

#[test]
fn parameter_errors() {
    let (_, data) = simulated(50, 0.3, 5);
    let aug = build_augmented(&data, &PredictorBlock::empty(4)).unwrap();
    assert!(matches!(impute_chained(&aug, 0, 5, 1), Err(Error::Parameter(_))));

    let all_missing = data.with_missing((0..data.n()).map(|i| (i, 2)));
    let aug = build_augmented(&all_missing, &PredictorBlock::empty(4)).unwrap();
    assert!(matches!(
        impute_chained(&aug, 2, 5, 1),
        Err(Error::UnusableColumn { column: 2 })
    ));
}

#[test]
fn mcar_gaussian_mean_is_recovered() {
    let (full, data) = simulated(500, 0.5, 6);
    let truth = full.predictors().column(0).mean().unwrap();
    let aug = build_augmented(&data, &PredictorBlock::empty(4)).unwrap();
    let k = 20;
    let stack = impute_chained(&aug, k, 5, 11).unwrap();
    let n = data.n() as f64;
    let (means, within): (Vec<f64>, Vec<f64>) = stack
        .copies()
        .iter()
        .map(|c| {
            let col = c.predictors.column(0);
            let m = col.mean().unwrap();
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
            (m, var / n)
        })
        .unzip();
    let kf = k as f64;
    let q = means.iter().sum::<f64>() / kf;
    let w = within.iter().sum::<f64>() / kf;
    let b = means.iter().map(|m| (m - q).powi(2)).sum::<f64>() / (kf - 1.0);
    let se = (w + (1.0 + 1.0 / kf) * b).sqrt();
    assert!((q - truth).abs() < 3.0 * se, "pooled {q}, truth {truth}, se {se}");
}

#[test]
fn validation_rows_are_imputed_without_outcomes() {
    let (_, data) = simulated(90, 0.3, 7);
    let cal: Vec<usize> = (0..70).collect();
    let val: Vec<usize> = (70..90).collect();
    let calibration = data.subset(&cal).unwrap();
    let block = PredictorBlock::from_rows(&data, &val);
    let aug = build_augmented(&calibration, &block).unwrap();
    let (completed, _) = impute_single(&aug, 5, &ImputationOptions::default()).unwrap();
    assert_eq!(completed.dim(), (90, 4));
    assert!(completed.iter().all(|v| v.is_finite()));

    // flipping validation outcomes leaves the completed matrix unchanged
    let mut time = data.time().to_vec();
    let mut status = data.status().to_vec();
    for i in 70..90 {
        time[i] *= 3.0;
        status[i] = !status[i];
    }
    let altered = SurvivalDataset::new(
        time,
        status,
        data.predictors().clone(),
        data.missing().clone(),
        data.kinds().to_vec(),
    )
    .unwrap();
    let aug2 = build_augmented(
        &altered.subset(&cal).unwrap(),
        &PredictorBlock::from_rows(&altered, &val),
    )
    .unwrap();
    let (completed2, _) = impute_single(&aug2, 5, &ImputationOptions::default()).unwrap();
    assert_eq!(completed, completed2);
}

fn mixed_dataset(n: usize, seed: u64) -> SurvivalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::<f64>::zeros((n, 3));
    let mut time = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    for i in 0..n {
        let z: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let b = if rng.random::<f64>() < 0.4 + 0.3 * z { 1.0 } else { 0.0 };
        let c = ((z + 1.0) * 1.5).floor().min(2.0);
        x[[i, 0]] = z;
        x[[i, 1]] = b;
        x[[i, 2]] = c;
        time.push(1.0 + rng.random::<f64>() * 10.0);
        status.push(rng.random::<f64>() < 0.7);
    }
    let missing = Array2::from_elem((n, 3), false);
    SurvivalDataset::new(
        time,
        status,
        x,
        missing,
        vec![
            ColumnKind::Continuous,
            ColumnKind::Binary,
            ColumnKind::Categorical { levels: 3 },
        ],
    )
    .unwrap()
}

#[test]
fn binary_and_categorical_columns_get_valid_levels() {
    let data = mixed_dataset(150, 3);
    let holes: Vec<(usize, usize)> = (0..150)
        .filter(|i| i % 4 == 0)
        .map(|i| (i, 1))
        .chain((0..150).filter(|i| i % 5 == 1).map(|i| (i, 2)))
        .collect();
    let data = data.with_missing(holes);
    let aug = build_augmented(&data, &PredictorBlock::empty(3)).unwrap();
    let stack = impute_chained(&aug, 5, 5, 8).unwrap();
    for c in stack.copies() {
        assert!(c.predictors.column(1).iter().all(|v| *v == 0.0 || *v == 1.0));
        assert!(c.predictors.column(2).iter().all(|v| [0.0, 1.0, 2.0].contains(v)));
    }
    assert_eq!(stack.diagnostics().fallback_draws, 0);
}

#[test]
fn single_observed_level_fills_with_it() {
    let data = SurvivalDataset::new(
        vec![1.0, 2.0, 3.0, 4.0],
        vec![true, false, true, true],
        array![[0.1, 1.0], [0.5, 1.0], [0.2, 0.0], [0.9, 1.0]],
        array![[false, false], [false, false], [false, true], [false, false]],
        vec![ColumnKind::Continuous, ColumnKind::Binary],
    )
    .unwrap();
    let aug = build_augmented(&data, &PredictorBlock::empty(2)).unwrap();
    let (completed, diag) = impute_single(&aug, 1, &ImputationOptions::default()).unwrap();
    assert_eq!(completed[[2, 1]], 1.0);
    assert!(diag.single_level_fills > 0);
}
