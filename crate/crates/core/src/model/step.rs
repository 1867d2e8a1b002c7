use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-continuous step function starting at 0, stored as jump locations and sizes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    jump_times: Vec<f64>,
    jump_sizes: Vec<f64>,
}

impl StepFunction {
    pub fn new(jump_times: Vec<f64>, jump_sizes: Vec<f64>) -> Result<Self> {
        if jump_times.len() != jump_sizes.len() {
            return Err(Error::Domain("jump times and sizes differ in length".into()));
        }
        if jump_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("jump times must be strictly increasing".into()));
        }
        if jump_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::Domain("jump times must be finite and non-negative".into()));
        }
        Ok(Self { jump_times, jump_sizes })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn jump_sizes(&self) -> &[f64] {
        &self.jump_sizes
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    /// Sum of jumps at times `<= t`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&s| s <= t);
        self.jump_sizes[..k].iter().sum()
    }

    /// `(t, value)` pairs at each jump, value taken after the jump.
    pub fn table(&self) -> Vec<(f64, f64)> {
        let mut acc = 0.0;
        self.jump_times
            .iter()
            .zip(&self.jump_sizes)
            .map(|(&t, &d)| {
                acc += d;
                (t, acc)
            })
            .collect()
    }
}

/// Product-integral survivor curve `prod_{T <= t} (1 - dLambda(T))`, returned as a
/// step function whose (negative) jumps are the survivor decrements.
///
/// A jump `>= 1` would drive the curve to zero or below; the curve is truncated
/// to zero at the first such jump and `warned` is set.
pub fn baseline_survivor(cumhaz: &StepFunction) -> (SurvivorCurve, bool) {
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut surv = 1.0;
    let mut warned = false;
    for (&t, &d) in cumhaz.jump_times().iter().zip(cumhaz.jump_sizes()) {
        if d >= 1.0 {
            warned = true;
            times.push(t);
            values.push(0.0);
            break;
        }
        surv *= 1.0 - d;
        times.push(t);
        values.push(surv);
    }
    (SurvivorCurve { times, values }, warned)
}

/// Right-continuous survivor step curve, 1 before the first jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivorCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SurvivorCurve {
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_is_right_continuous() {
        let f = StepFunction::new(vec![1.0, 2.0], vec![0.5, 0.25]).unwrap();
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(0.999), 0.0);
        assert_eq!(f.eval(1.0), 0.5);
        assert_eq!(f.eval(2.5), 0.75);
    }

    #[test]
    fn rejects_unsorted() {
        assert!(StepFunction::new(vec![2.0, 1.0], vec![0.1, 0.1]).is_err());
        assert!(StepFunction::new(vec![1.0, 1.0], vec![0.1, 0.1]).is_err());
    }

    #[test]
    fn survivor_single_jump() {
        let f = StepFunction::new(vec![1.0], vec![0.5]).unwrap();
        let (s, warned) = baseline_survivor(&f);
        assert!(!warned);
        assert_eq!(s.eval(0.5), 1.0);
        assert_eq!(s.eval(1.0), 0.5);
    }

    #[test]
    fn survivor_two_jumps() {
        let f = StepFunction::new(vec![1.0, 2.0], vec![0.25, 0.5]).unwrap();
        let (s, _) = baseline_survivor(&f);
        assert!((s.eval(2.0) - 0.375).abs() < 1e-15);
        assert!((s.eval(1.5) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn survivor_of_zero_is_one() {
        let (s, _) = baseline_survivor(&StepFunction::zero());
        assert_eq!(s.eval(10.0), 1.0);
    }

    #[test]
    fn survivor_truncates_large_jump() {
        let f = StepFunction::new(vec![1.0, 2.0, 3.0], vec![0.5, 1.5, 0.1]).unwrap();
        let (s, warned) = baseline_survivor(&f);
        assert!(warned);
        assert_eq!(s.eval(2.0), 0.0);
        assert_eq!(s.times.len(), 2);
    }
}
