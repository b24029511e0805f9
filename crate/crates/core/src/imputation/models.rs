//! Conditional imputation models used inside the chained-equations sweep.
//!
//! Each draw first samples model parameters from an approximate posterior and
//! then imputes the missing entries given those parameters.

use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::linalg;
use crate::seed::Rng;

const CHOL_TOL: f64 = 1e-14;
/// Penalty on logistic / multinomial coefficients; keeps the fit finite
/// under separation.
const GLM_DECAY: f64 = 1e-4;
const GLM_MAX_ITER: usize = 25;

fn standard_normals(rng: &mut Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| StandardNormal.sample(rng)).collect()
}

/// `mean + chol(cov) z` for one standard normal vector `z`.
fn perturb(mean: &Array1<f64>, cov: &Array2<f64>, scale: f64, rng: &mut Rng) -> Option<Array1<f64>> {
    let l = linalg::cholesky(cov, CHOL_TOL)?;
    let z = standard_normals(rng, mean.len());
    let lz = linalg::lower_mul(&l, &z);
    Some(mean + &(Array1::from(lz) * scale))
}

/// Bayesian linear regression draw: returns the least-squares coefficients
/// and one posterior draw of them.
///
/// `XᵀX` gets a relative ridge of `ridge` on its diagonal; the residual scale
/// is drawn as `σ* = sqrt(RSS / χ²_df)`.
pub fn norm_draw(
    x: &Array2<f64>,
    y: &Array1<f64>,
    ridge: f64,
    rng: &mut Rng,
) -> Option<(Array1<f64>, Array1<f64>)> {
    let m = x.ncols();
    let mut xtx = x.t().dot(x);
    for d in 0..m {
        let pen = ridge * xtx[[d, d]];
        xtx[[d, d]] += if pen > 0.0 { pen } else { ridge };
    }
    let l = linalg::cholesky(&xtx, CHOL_TOL)?;
    let v = linalg::cholesky_inverse(&l);
    let coef = linalg::cholesky_solve(&l, &x.t().dot(y));
    let resid = y - &x.dot(&coef);
    let rss = resid.dot(&resid);
    let df = (x.nrows() as f64 - m as f64).max(1.0);
    let chi: f64 = ChiSquared::new(df).ok()?.sample(rng);
    let sigma = (rss / chi).sqrt();
    let beta_star = perturb(&coef, &v, sigma, rng)?;
    Some((coef, beta_star))
}

/// Predictive mean matching: observed rows are scored with the least-squares
/// fit, missing rows with the posterior draw, and each missing entry takes
/// the observed value of a donor picked uniformly from its `donors` nearest
/// scores.
pub fn pmm_draw(
    x_obs: &Array2<f64>,
    y_obs: &Array1<f64>,
    x_mis: &Array2<f64>,
    donors: usize,
    ridge: f64,
    rng: &mut Rng,
) -> Option<Vec<f64>> {
    if y_obs.is_empty() {
        return None;
    }
    let (coef, beta_star) = norm_draw(x_obs, y_obs, ridge, rng)?;
    let yhat_obs = x_obs.dot(&coef);
    let yhat_mis = x_mis.dot(&beta_star);
    let mut ranked: Vec<(f64, usize)> = yhat_obs.iter().copied().zip(0..).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let k = donors.max(1).min(ranked.len());
    let mut out = Vec::with_capacity(yhat_mis.len());
    for &target in yhat_mis.iter() {
        let pick = rng.random_range(0..k);
        // walk outwards from the insertion point collecting the k nearest
        let mut hi = ranked.partition_point(|r| r.0 < target);
        let mut lo = hi;
        let mut chosen = None;
        for step in 0..k {
            let take_low = if lo == 0 {
                false
            } else if hi == ranked.len() {
                true
            } else {
                (target - ranked[lo - 1].0) <= (ranked[hi].0 - target)
            };
            let idx = if take_low {
                lo -= 1;
                lo
            } else {
                hi += 1;
                hi - 1
            };
            if step == pick {
                chosen = Some(ranked[idx].1);
                break;
            }
        }
        out.push(y_obs[chosen?]);
    }
    Some(out)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Penalized logistic regression by IRLS; returns coefficients and their
/// approximate covariance (inverse penalized information).
pub fn logistic_fit(x: &Array2<f64>, y: &[f64]) -> Option<(Array1<f64>, Array2<f64>)> {
    let (n, m) = x.dim();
    let mut beta = Array1::<f64>::zeros(m);
    let mut info = Array2::<f64>::zeros((m, m));
    let mut prev = f64::INFINITY;
    for _ in 0..GLM_MAX_ITER {
        let eta = x.dot(&beta);
        let mut grad = Array1::<f64>::zeros(m);
        info.fill(0.0);
        let mut dev = 0.0;
        for i in 0..n {
            let p = sigmoid(eta[i]);
            let w = (p * (1.0 - p)).max(1e-12);
            let r = y[i] - p;
            dev -= if y[i] > 0.5 { p.max(1e-300).ln() } else { (1.0 - p).max(1e-300).ln() };
            let xi = x.row(i);
            for a in 0..m {
                grad[a] += xi[a] * r;
                let wa = w * xi[a];
                for b in 0..=a {
                    info[[a, b]] += wa * xi[b];
                }
            }
        }
        for a in 0..m {
            grad[a] -= GLM_DECAY * beta[a];
            info[[a, a]] += GLM_DECAY;
            for b in 0..a {
                info[[b, a]] = info[[a, b]];
            }
        }
        let l = linalg::cholesky(&info, CHOL_TOL)?;
        let step = linalg::cholesky_solve(&l, &grad);
        beta += &step;
        if (prev - dev).abs() < 1e-8 * (dev.abs() + 0.1) {
            break;
        }
        prev = dev;
    }
    let l = linalg::cholesky(&info, CHOL_TOL)?;
    Some((beta, linalg::cholesky_inverse(&l)))
}

/// Binary draw: perturbed logistic coefficients, then Bernoulli outcomes.
pub fn logistic_draw(
    x_obs: &Array2<f64>,
    y_obs: &[f64],
    x_mis: &Array2<f64>,
    rng: &mut Rng,
) -> Option<Vec<f64>> {
    let (coef, cov) = logistic_fit(x_obs, y_obs)?;
    let beta_star = perturb(&coef, &cov, 1.0, rng)?;
    let eta = x_mis.dot(&beta_star);
    Some(
        eta.iter()
            .map(|&e| {
                let u: f64 = rng.random();
                if u < sigmoid(e) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect(),
    )
}

/// Penalized multinomial logit with the first class as reference, fitted by
/// Newton's method. `y` holds class positions in `0..classes`.
/// Returns the stacked coefficients `(classes−1)·m` and their covariance.
pub fn multinomial_fit(
    x: &Array2<f64>,
    y: &[usize],
    classes: usize,
) -> Option<(Array1<f64>, Array2<f64>)> {
    let (n, m) = x.dim();
    let c1 = classes - 1;
    let dim = c1 * m;
    let mut beta = Array1::<f64>::zeros(dim);
    let mut info = Array2::<f64>::zeros((dim, dim));
    let mut probs = vec![0.0; classes];
    let mut prev = f64::INFINITY;
    for _ in 0..GLM_MAX_ITER {
        let mut grad = Array1::<f64>::zeros(dim);
        info.fill(0.0);
        let mut dev = 0.0;
        for i in 0..n {
            let xi = x.row(i);
            probs[0] = 0.0;
            for c in 1..classes {
                probs[c] = (0..m).map(|a| xi[a] * beta[(c - 1) * m + a]).sum();
            }
            let mx = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for p in probs.iter_mut() {
                *p = (*p - mx).exp();
                z += *p;
            }
            probs.iter_mut().for_each(|p| *p /= z);
            dev -= probs[y[i]].max(1e-300).ln();
            for c in 1..classes {
                let r = f64::from(u8::from(y[i] == c)) - probs[c];
                for a in 0..m {
                    grad[(c - 1) * m + a] += xi[a] * r;
                }
                for d in 1..classes {
                    let w = probs[c] * (f64::from(u8::from(c == d)) - probs[d]);
                    for a in 0..m {
                        for b in 0..m {
                            info[[(c - 1) * m + a, (d - 1) * m + b]] += w * xi[a] * xi[b];
                        }
                    }
                }
            }
        }
        for a in 0..dim {
            grad[a] -= GLM_DECAY * beta[a];
            info[[a, a]] += GLM_DECAY;
        }
        let l = linalg::cholesky(&info, CHOL_TOL)?;
        beta += &linalg::cholesky_solve(&l, &grad);
        if (prev - dev).abs() < 1e-8 * (dev.abs() + 0.1) {
            break;
        }
        prev = dev;
    }
    let l = linalg::cholesky(&info, CHOL_TOL)?;
    Some((beta, linalg::cholesky_inverse(&l)))
}

/// Categorical draw over `classes` (sorted level indices).
pub fn polytomous_draw(
    x_obs: &Array2<f64>,
    y_obs: &[usize],
    classes: &[usize],
    x_mis: &Array2<f64>,
    rng: &mut Rng,
) -> Option<Vec<f64>> {
    let positions: Vec<usize> = y_obs
        .iter()
        .map(|v| classes.iter().position(|c| c == v))
        .collect::<Option<_>>()?;
    let (coef, cov) = multinomial_fit(x_obs, &positions, classes.len())?;
    let beta_star = perturb(&coef, &cov, 1.0, rng)?;
    let m = x_mis.ncols();
    let mut probs = vec![0.0; classes.len()];
    Some(
        x_mis
            .outer_iter()
            .map(|xi| {
                probs[0] = 0.0;
                for c in 1..classes.len() {
                    probs[c] = (0..m).map(|a| xi[a] * beta_star[(c - 1) * m + a]).sum();
                }
                let mx = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = probs.iter().map(|p| (p - mx).exp()).sum();
                let u: f64 = rng.random::<f64>() * z;
                let mut acc = 0.0;
                let mut pick = classes.len() - 1;
                for (c, p) in probs.iter().enumerate() {
                    acc += (p - mx).exp();
                    if u < acc {
                        pick = c;
                        break;
                    }
                }
                classes[pick] as f64
            })
            .collect(),
    )
}
