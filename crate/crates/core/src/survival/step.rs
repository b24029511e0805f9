use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Field;

/// Right-continuous non-decreasing step function starting at zero, used for
/// cumulative hazards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction<T> {
    knots: Vec<T>,
    values: Vec<T>,
}

impl<T: Field> StepFunction<T> {
    pub fn new(knots: Vec<T>, values: Vec<T>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.first().is_some_and(|k| !(*k > T::zero())) {
            return Err(Error::Validation("knots must be positive".into()));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Validation("knots must be strictly increasing".into()));
        }
        if values.first().is_some_and(|v| *v < T::zero())
            || values.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::Validation(
                "values must be non-negative and non-decreasing".into(),
            ));
        }
        Ok(Self { knots, values })
    }

    pub fn zero() -> Self {
        Self {
            knots: Vec::new(),
            values: Vec::new(),
        }
    }

    pub(crate) fn from_parts_unchecked(knots: Vec<T>, values: Vec<T>) -> Self {
        Self { knots, values }
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == T::zero())
    }

    /// Value at the largest knot `<= t`, or zero before the first knot.
    pub fn eval(&self, t: T) -> T {
        let idx = self.knots.partition_point(|k| *k <= t);
        if idx == 0 {
            T::zero()
        } else {
            self.values[idx - 1]
        }
    }
}

/// Right-continuous non-increasing survival curve starting at one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve<T> {
    knots: Vec<T>,
    values: Vec<T>,
}

impl<T: Field> SurvivalCurve<T> {
    pub(crate) fn from_parts_unchecked(knots: Vec<T>, values: Vec<T>) -> Self {
        Self { knots, values }
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `G(t)`: value at the largest knot `<= t`, one before the first knot.
    pub fn eval(&self, t: T) -> T {
        let idx = self.knots.partition_point(|k| *k <= t);
        if idx == 0 {
            T::one()
        } else {
            self.values[idx - 1]
        }
    }

    /// Left limit `G(t-)`: value at the largest knot strictly below `t`.
    pub fn eval_left(&self, t: T) -> T {
        let idx = self.knots.partition_point(|k| *k < t);
        if idx == 0 {
            T::one()
        } else {
            self.values[idx - 1]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_continuous_evaluation() {
        let f = StepFunction::new(vec![1.0, 3.0], vec![0.5, 0.75]).unwrap();
        assert_eq!(f.eval(0.999), 0.0);
        assert_eq!(f.eval(1.0), 0.5);
        assert_eq!(f.eval(2.0), 0.5);
        assert_eq!(f.eval(3.0), 0.75);
        assert_eq!(f.eval(100.0), 0.75);
    }

    #[test]
    fn invariants_enforced() {
        assert!(StepFunction::new(vec![1.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(StepFunction::new(vec![1.0, 2.0], vec![1.0, 0.5]).is_err());
        assert!(StepFunction::new(vec![0.0], vec![1.0]).is_err());
        assert!(StepFunction::new(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn left_limit() {
        let g = SurvivalCurve::from_parts_unchecked(vec![1.0, 2.0], vec![0.5, 0.25]);
        assert_eq!(g.eval(1.0), 0.5);
        assert_eq!(g.eval_left(1.0), 1.0);
        assert_eq!(g.eval_left(2.0), 0.5);
        assert_eq!(g.eval_left(2.5), 0.25);
    }
}
