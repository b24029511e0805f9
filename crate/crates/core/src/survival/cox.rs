//! Cox proportional-hazards regression by Newton-Raphson on the Breslow
//! partial likelihood, with the Breslow baseline cumulative hazard.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use crate::survival::design::{DesignMatrix, DesignSpec};
use crate::survival::estimators::{ascending_order, breslow};
use crate::survival::step::StepFunction;

#[derive(Debug, Clone, Copy)]
pub struct CoxOptions {
    pub max_iter: usize,
    /// Stop when `‖∇ℓ‖ / n` falls below this.
    pub grad_tol: f64,
    /// Stop when a Newton step changes the log partial likelihood by less than this.
    pub loglik_tol: f64,
    pub max_halvings: usize,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            grad_tol: 1e-8,
            loglik_tol: 1e-10,
            max_halvings: 30,
        }
    }
}

/// Fitted coefficients plus the Breslow baseline cumulative hazard at the
/// zero covariate vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit<T> {
    pub beta: Vec<T>,
    pub baseline_cumhaz: StepFunction<T>,
    pub design_spec: Option<DesignSpec>,
    pub loglik: T,
    pub iterations: usize,
}

/// Anything that predicts `S(t|x) = exp(-H_0(t) exp(x·β))`.
pub trait SurvivalModel<T: Real> {
    fn coefficients(&self) -> &[T];
    fn baseline(&self) -> &StepFunction<T>;

    fn linear_predictor(&self, x: &[T]) -> Result<T> {
        let beta = self.coefficients();
        if x.len() != beta.len() {
            return Err(Error::Shape(format!(
                "covariate vector has {} entries, model has {} coefficients",
                x.len(),
                beta.len()
            )));
        }
        Ok(x.iter().zip(beta).fold(T::zero(), |s, (a, b)| s + *a * *b))
    }

    fn predict_survival(&self, x: &[T], horizons: &[T]) -> Result<Vec<T>> {
        let risk = self.linear_predictor(x)?.exp();
        let base = self.baseline();
        Ok(horizons
            .iter()
            .map(|&t| {
                let s = (-(base.eval(t) * risk)).exp();
                s.max(T::zero()).min(T::one())
            })
            .collect())
    }
}

impl<T: Real> SurvivalModel<T> for CoxFit<T> {
    fn coefficients(&self) -> &[T] {
        &self.beta
    }

    fn baseline(&self) -> &StepFunction<T> {
        &self.baseline_cumhaz
    }
}

/// Survival probabilities at `horizons` for covariate vector `x`.
pub fn predict_survival<T: Real, M: SurvivalModel<T>>(
    model: &M,
    x: &[T],
    horizons: &[T],
) -> Result<Vec<T>> {
    model.predict_survival(x, horizons)
}

/// Log partial likelihood (Breslow ties), its gradient and observed information.
pub struct PartialLikelihood<'a, T> {
    x: &'a Array2<T>,
    status: &'a [bool],
    /// Subjects sorted by descending time, split into groups of tied times.
    order: Vec<usize>,
    group_ends: Vec<usize>,
}

pub struct Evaluation<T> {
    pub loglik: T,
    pub gradient: Array1<T>,
    pub information: Array2<T>,
}

impl<'a, T: Real> PartialLikelihood<'a, T> {
    pub fn new(design: &'a DesignMatrix<T>, time: &[T], status: &'a [bool]) -> Result<Self> {
        let n = time.len();
        if status.len() != n || design.nrows() != n {
            return Err(Error::Shape(format!(
                "design has {} rows, time {n}, status {}",
                design.nrows(),
                status.len()
            )));
        }
        let mut order = ascending_order(time);
        order.reverse();
        let mut group_ends = Vec::new();
        for pos in 1..=n {
            if pos == n || time[order[pos]] != time[order[pos - 1]] {
                group_ends.push(pos);
            }
        }
        Ok(Self {
            x: design.values(),
            status,
            order,
            group_ends,
        })
    }

    pub fn loglik(&self, beta: &[T]) -> T {
        self.evaluate_inner(beta, false).loglik
    }

    pub fn evaluate(&self, beta: &[T]) -> Evaluation<T> {
        self.evaluate_inner(beta, true)
    }

    fn evaluate_inner(&self, beta: &[T], derivatives: bool) -> Evaluation<T> {
        let q = beta.len();
        let n = self.order.len();
        let eta: Vec<T> = (0..n)
            .map(|i| {
                self.x
                    .row(i)
                    .iter()
                    .zip(beta)
                    .fold(T::zero(), |s, (a, b)| s + *a * *b)
            })
            .collect();
        let shift = eta
            .iter()
            .copied()
            .fold(T::neg_infinity(), |m, v| if v > m { v } else { m });
        let shift = if shift.is_finite() { shift } else { T::zero() };

        let mut loglik = T::zero();
        let mut gradient = Array1::<T>::zeros(q);
        let mut information = Array2::<T>::zeros((q, q));
        let mut s0 = T::zero();
        let mut s1 = vec![T::zero(); q];
        let mut s2 = vec![T::zero(); if derivatives { q * q } else { 0 }];
        let mut xsum = vec![T::zero(); q];

        let mut start = 0;
        for &end in &self.group_ends {
            let mut d = 0usize;
            xsum.iter_mut().for_each(|v| *v = T::zero());
            let mut eta_sum = T::zero();
            for &i in &self.order[start..end] {
                let w = (eta[i] - shift).exp();
                s0 = s0 + w;
                let xi = self.x.row(i);
                if derivatives {
                    for a in 0..q {
                        let wa = w * xi[a];
                        s1[a] = s1[a] + wa;
                        for b in 0..=a {
                            s2[a * q + b] = s2[a * q + b] + wa * xi[b];
                        }
                    }
                }
                if self.status[i] {
                    d += 1;
                    eta_sum = eta_sum + eta[i];
                    if derivatives {
                        for a in 0..q {
                            xsum[a] = xsum[a] + xi[a];
                        }
                    }
                }
            }
            if d > 0 {
                let dt = T::from_count(d);
                loglik = loglik + eta_sum - dt * (s0.ln() + shift);
                if derivatives {
                    for a in 0..q {
                        let ma = s1[a] / s0;
                        gradient[a] = gradient[a] + xsum[a] - dt * ma;
                        for b in 0..=a {
                            let v = dt * (s2[a * q + b] / s0 - ma * (s1[b] / s0));
                            information[[a, b]] = information[[a, b]] + v;
                        }
                    }
                }
            }
            start = end;
        }
        for a in 0..q {
            for b in 0..a {
                information[[b, a]] = information[[a, b]];
            }
        }
        Evaluation {
            loglik,
            gradient,
            information,
        }
    }
}

fn norm<T: Real>(v: &Array1<T>) -> T {
    v.iter().fold(T::zero(), |s, x| s + *x * *x).sqrt()
}

pub fn fit_cox<T: Real>(design: &DesignMatrix<T>, time: &[T], status: &[bool]) -> Result<CoxFit<T>> {
    fit_cox_with(design, time, status, &CoxOptions::default())
}

/// Newton-Raphson from `β = 0` with step halving whenever a step lowers the
/// partial likelihood.
pub fn fit_cox_with<T: Real>(
    design: &DesignMatrix<T>,
    time: &[T],
    status: &[bool],
    opts: &CoxOptions,
) -> Result<CoxFit<T>> {
    if !status.iter().any(|&s| s) {
        return Err(Error::NoEvents);
    }
    let lik = PartialLikelihood::new(design, time, status)?;
    let q = design.ncols();
    let n = T::from_count(time.len());
    let grad_tol = T::lit(opts.grad_tol);
    let ll_tol = T::lit(opts.loglik_tol);
    let half = T::lit(0.5);

    let mut beta = vec![T::zero(); q];
    let mut current = lik.evaluate(&beta);
    let mut converged = q == 0;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iter {
        if norm(&current.gradient) / n < grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let chol = linalg::cholesky(&current.information, T::lit(1e-13)).ok_or_else(|| {
            Error::Singular(format!(
                "information matrix not positive definite at iteration {iterations}"
            ))
        })?;
        let mut step = linalg::cholesky_solve(&chol, &current.gradient);
        let mut candidate: Vec<T> = beta.iter().zip(&step).map(|(b, s)| *b + *s).collect();
        let mut next = lik.evaluate(&candidate);
        let mut halvings = 0;
        while !(next.loglik >= current.loglik) && halvings < opts.max_halvings {
            step.mapv_inplace(|s| s * half);
            candidate = beta.iter().zip(&step).map(|(b, s)| *b + *s).collect();
            next = lik.evaluate(&candidate);
            halvings += 1;
        }
        if !(next.loglik >= current.loglik) {
            // no ascent direction left at machine precision
            converged = true;
            break;
        }
        let change = (next.loglik - current.loglik).abs();
        beta = candidate;
        current = next;
        if change < ll_tol {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::Convergence {
            iterations,
            beta: beta.iter().map(|b| b.to_f64().unwrap_or(f64::NAN)).collect(),
        });
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Convergence {
            iterations,
            beta: beta.iter().map(|b| b.to_f64().unwrap_or(f64::NAN)).collect(),
        });
    }
    let baseline_cumhaz = breslow(design, time, status, &beta)?;
    Ok(CoxFit {
        beta,
        baseline_cumhaz,
        design_spec: None,
        loglik: current.loglik,
        iterations,
    })
}

impl<T: Real> CoxFit<T> {
    pub fn with_design_spec(mut self, spec: DesignSpec) -> Self {
        self.design_spec = Some(spec);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::estimators::nelson_aalen;
    use ndarray::{array, Array2};

    #[test]
    fn null_design_gives_nelson_aalen() {
        let time = [2.0, 1.0, 4.0, 3.0, 3.0];
        let status = [true, true, false, true, false];
        let fit = fit_cox(&DesignMatrix::<f64>::empty(5), &time, &status).unwrap();
        assert!(fit.beta.is_empty());
        assert_eq!(fit.baseline_cumhaz, nelson_aalen(&time, &status));
    }

    #[test]
    fn identical_rows_give_zero_beta() {
        let time = [2.0, 1.0, 4.0, 3.0];
        let status = [true, true, false, true];
        let x = Array2::from_elem((4, 2), 1.0);
        let fit = fit_cox(&DesignMatrix::from_array(x).unwrap(), &time, &status).unwrap();
        assert_eq!(fit.beta, vec![0.0, 0.0]);
        assert_eq!(fit.baseline_cumhaz, nelson_aalen(&time, &status));
    }

    #[test]
    fn no_events_is_an_error() {
        let x = DesignMatrix::from_array(array![[1.0], [0.0]]).unwrap();
        assert!(matches!(
            fit_cox(&x, &[1.0, 2.0], &[false, false]),
            Err(Error::NoEvents)
        ));
    }

    #[test]
    fn collinear_columns_are_singular() {
        let x = DesignMatrix::from_array(array![
            [1.0, 2.0],
            [0.0, 0.0],
            [1.0, 2.0],
            [0.5, 1.0],
            [0.2, 0.4]
        ])
        .unwrap();
        let r = fit_cox(&x, &[1.0, 2.0, 3.0, 4.0, 5.0], &[true, true, false, true, true]);
        assert!(matches!(r, Err(Error::Singular(_))), "{r:?}");
    }

    #[test]
    fn prediction_identities() {
        let base = StepFunction::new(vec![1.0, 5.0], vec![0.1, 0.2]).unwrap();
        let fit = CoxFit {
            beta: vec![2f64.ln()],
            baseline_cumhaz: base.clone(),
            design_spec: None,
            loglik: 0.0,
            iterations: 0,
        };
        let s = fit.predict_survival(&[1.0], &[0.0, 5.0]).unwrap();
        assert_eq!(s[0], 1.0);
        assert!((s[1] - (-0.4f64).exp()).abs() < 1e-15);
        assert!((s[1] - 0.6703).abs() < 1e-4);
        assert!(matches!(fit.predict_survival(&[1.0, 2.0], &[1.0]), Err(Error::Shape(_))));

        let null = CoxFit { beta: vec![0.0], ..fit.clone() };
        let s = null.predict_survival(&[17.0], &[3.0]).unwrap();
        assert_eq!(s[0], (-0.1f64).exp());

        let flat = CoxFit { baseline_cumhaz: StepFunction::zero(), ..fit };
        assert_eq!(flat.predict_survival(&[3.0], &[1.0, 100.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn f32_agrees_with_f64() {
        let time = [5.0, 1.0, 3.0, 4.0, 2.0, 6.0, 7.0, 2.5];
        let status = [true, true, false, true, true, false, true, true];
        let xs = [0.5, -1.0, 0.3, 1.2, 0.0, -0.4, 0.8, -0.2];
        let x64 = Array2::from_shape_vec((8, 1), xs.to_vec()).unwrap();
        let x32 = x64.mapv(|v| v as f32);
        let t32: Vec<f32> = time.iter().map(|&t| t as f32).collect();
        let f64fit = fit_cox(&DesignMatrix::from_array(x64).unwrap(), &time, &status).unwrap();
        let f32fit = fit_cox(&DesignMatrix::from_array(x32).unwrap(), &t32, &status).unwrap();
        assert!((f64fit.beta[0] - f32fit.beta[0] as f64).abs() < 1e-3);
    }
}
