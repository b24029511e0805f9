//! Counting-process estimators: Nelson-Aalen, Breslow and the Kaplan-Meier
//! estimate of the censoring distribution.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::{Field, Real};
use crate::survival::design::DesignMatrix;
use crate::survival::step::{StepFunction, SurvivalCurve};

pub(crate) fn ascending_order<T: Field>(time: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..time.len()).collect();
    order.sort_by(|&a, &b| {
        time[a]
            .partial_cmp(&time[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Distinct times in descending order with (events, censorings, weighted risk set).
struct RiskGroup<T> {
    time: T,
    events: T,
    censored: T,
    risk: T,
}

fn risk_groups<T: Field>(
    time: &[T],
    status: &[bool],
    weight: impl Fn(usize) -> T,
) -> Vec<RiskGroup<T>> {
    let order = ascending_order(time);
    let mut groups = Vec::new();
    let mut risk = T::zero();
    let mut pos = order.len();
    while pos > 0 {
        let t = time[order[pos - 1]];
        let mut events = T::zero();
        let mut censored = T::zero();
        while pos > 0 && time[order[pos - 1]] == t {
            let i = order[pos - 1];
            risk = risk + weight(i);
            if status[i] {
                events = events + T::one();
            } else {
                censored = censored + T::one();
            }
            pos -= 1;
        }
        groups.push(RiskGroup {
            time: t,
            events,
            censored,
            risk,
        });
    }
    groups.reverse();
    groups
}

fn weighted_cumulative_hazard<T: Field>(
    time: &[T],
    status: &[bool],
    weight: impl Fn(usize) -> T,
) -> StepFunction<T> {
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut acc = T::zero();
    for g in risk_groups(time, status, weight) {
        if g.events != T::zero() {
            acc = acc + g.events / g.risk;
            knots.push(g.time);
            values.push(acc);
        }
    }
    StepFunction::from_parts_unchecked(knots, values)
}

/// Nelson-Aalen cumulative hazard `H(t) = Σ_{t_i <= t} d_i / n_i`.
///
/// Tied event times share one knot. All-censored input gives the zero function.
pub fn nelson_aalen<T: Field>(time: &[T], status: &[bool]) -> StepFunction<T> {
    assert_eq!(time.len(), status.len(), "time/status length mismatch");
    weighted_cumulative_hazard(time, status, |_| T::one())
}

/// Kaplan-Meier estimate `G(t)` of the censoring distribution (product-limit
/// with the roles of events and censorings swapped).
pub fn kaplan_meier_censoring<T: Field>(time: &[T], status: &[bool]) -> SurvivalCurve<T> {
    assert_eq!(time.len(), status.len(), "time/status length mismatch");
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut surv = T::one();
    for g in risk_groups(time, status, |_| T::one()) {
        if g.censored != T::zero() {
            surv = surv * (T::one() - g.censored / g.risk);
            knots.push(g.time);
            values.push(surv);
        }
    }
    SurvivalCurve::from_parts_unchecked(knots, values)
}

/// Product-limit survival estimate of the event-time distribution.
pub fn kaplan_meier<T: Field>(time: &[T], status: &[bool]) -> SurvivalCurve<T> {
    let flipped: Vec<bool> = status.iter().map(|s| !s).collect();
    kaplan_meier_censoring(time, &flipped)
}

/// Breslow baseline cumulative hazard for coefficients `beta`, referenced to
/// the zero covariate vector: `H_0(t) = Σ_{t_i <= t} d_i / Σ_{j ∈ R(t_i)} exp(x_j·β)`.
pub fn breslow<T: Real>(
    design: &DesignMatrix<T>,
    time: &[T],
    status: &[bool],
    beta: &[T],
) -> Result<StepFunction<T>> {
    let n = time.len();
    if status.len() != n || design.nrows() != n || design.ncols() != beta.len() {
        return Err(Error::Shape(format!(
            "design {}x{}, beta {}, time {n}, status {}",
            design.nrows(),
            design.ncols(),
            beta.len(),
            status.len()
        )));
    }
    let x = design.values();
    let weights: Vec<T> = (0..n)
        .map(|i| {
            x.row(i)
                .iter()
                .zip(beta)
                .fold(T::zero(), |s, (a, b)| s + *a * *b)
                .exp()
        })
        .collect();
    Ok(weighted_cumulative_hazard(time, status, |i| weights[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use num_rational::Rational64;

    fn r(a: i64, b: i64) -> Rational64 {
        Rational64::new(a, b)
    }

    fn ri(a: i64) -> Rational64 {
        Rational64::from_integer(a)
    }

    #[test]
    fn nelson_aalen_hand_values_exact() {
        let h = nelson_aalen(&[ri(1), ri(2), ri(3)], &[true, false, true]);
        assert_eq!(h.knots(), &[ri(1), ri(3)]);
        assert_eq!(h.values(), &[r(1, 3), r(4, 3)]);

        let tied = nelson_aalen(&[ri(1), ri(1), ri(2)], &[true, true, true]);
        assert_eq!(tied.knots(), &[ri(1), ri(2)]);
        assert_eq!(tied.values(), &[r(2, 3), r(5, 3)]);
    }

    #[test]
    fn nelson_aalen_all_censored_is_zero() {
        let h = nelson_aalen(&[1.0, 2.0, 5.0], &[false, false, false]);
        assert!(h.knots().is_empty());
        assert_eq!(h.eval(10.0), 0.0);
    }

    #[test]
    fn censoring_km_hand_values() {
        let g = kaplan_meier_censoring(&[ri(1), ri(2)], &[false, true]);
        assert_eq!(g.eval(ri(1)), r(1, 2));
        assert_eq!(g.eval_left(ri(1)), ri(1));

        let all = kaplan_meier_censoring(&[ri(1), ri(1)], &[false, false]);
        assert_eq!(all.eval(ri(1)), ri(0));

        let none = kaplan_meier_censoring(&[1.0, 2.0, 3.0], &[true, true, true]);
        for t in [0.5, 1.0, 2.5, 2.999] {
            assert_eq!(none.eval(t), 1.0);
        }
    }

    #[test]
    fn breslow_at_zero_beta_is_nelson_aalen() {
        let time = [3.0, 1.0, 2.0, 2.0, 5.0, 4.0];
        let status = [true, false, true, true, false, true];
        let x = Array2::from_shape_vec((6, 2), vec![0.3, 1.0, -1.0, 0.2, 0.5, 0.5, 1.1, 0.0, 0.0, 2.0, 1.0, 1.0])
            .unwrap();
        let design = DesignMatrix::from_array(x).unwrap();
        let b = breslow(&design, &time, &status, &[0.0, 0.0]).unwrap();
        assert_eq!(b, nelson_aalen(&time, &status));
    }

    #[test]
    fn km_event_curve() {
        let s = kaplan_meier(&[1.0, 2.0, 3.0, 4.0], &[true, false, true, false]);
        assert_eq!(s.eval(1.0), 0.75);
        assert_eq!(s.eval(3.0), 0.75 * 0.5);
    }
}
