use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::profile::ProfileValue;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Convergence threshold on the sup-norm of the score.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100, max_halvings: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    /// Objective at `x`, with score and information on the original scale.
    pub value: ProfileValue,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Score and information on the working scale, where coordinates flagged
/// `positive` are replaced by their logarithms.
fn working(v: &ProfileValue, x: &[f64], positive: &[bool]) -> (DVector<f64>, DMatrix<f64>) {
    let jac = DVector::from_iterator(x.len(), x.iter().zip(positive).map(|(&x, &p)| if p { x } else { 1.0 }));
    let score = v.score.component_mul(&jac);
    let mut info = DMatrix::from_fn(x.len(), x.len(), |i, j| v.info[(i, j)] * jac[i] * jac[j]);
    for (k, &p) in positive.iter().enumerate() {
        if p {
            info[(k, k)] -= score[k];
        }
    }
    (score, info)
}

fn spectrum(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn solve(info: &DMatrix<f64>, score: &DVector<f64>) -> Result<DVector<f64>> {
    let ev = spectrum(info);
    let big = ev.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if ev.iter().any(|e| e.abs() <= 1e-12 * big) || !(big > 0.0) {
        return Err(Error::Numerical(format!("singular information matrix, eigenvalues {ev:?}")));
    }
    if let Some(ch) = info.clone().cholesky() {
        return Ok(ch.solve(score));
    }
    info.clone()
        .lu()
        .solve(score)
        .filter(|d| d.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::Numerical(format!("singular information matrix, eigenvalues {:?}", spectrum(info))))
}

/// Maximizes an objective by Newton-Raphson with step-halving.
///
/// `f` returns the objective with its score and observed information.
/// Coordinates flagged in `positive` are optimized on the log scale.
/// Reaching `max_iter`, or failing to increase the objective after
/// `max_halvings` halvings, ends the search with `converged = false`.
pub fn newton_raphson<F>(f: F, init: &[f64], positive: &[bool], opts: &NewtonOptions) -> Result<NewtonOutcome>
where
    F: Fn(&[f64]) -> Result<ProfileValue>,
{
    if positive.len() != init.len() {
        return Err(Error::Domain("positivity mask and start differ in length".into()));
    }
    if init.iter().zip(positive).any(|(&x, &p)| p && !(x > 0.0)) {
        return Err(Error::Domain("start violates a positivity constraint".into()));
    }
    let mut x = init.to_vec();
    let mut v = f(&x)?;
    if !v.loglik.is_finite() {
        return Err(Error::Numerical(format!("objective is {} at the start", v.loglik)));
    }
    let mut iterations = 0;
    loop {
        let gn = sup_norm(&v.score);
        if gn < opts.tol || x.is_empty() {
            return Ok(NewtonOutcome { x, value: v, iterations, converged: true, gradient_norm: gn });
        }
        if iterations == opts.max_iter {
            return Ok(NewtonOutcome { x, value: v, iterations, converged: false, gradient_norm: gn });
        }
        iterations += 1;
        let (score, info) = working(&v, &x, positive);
        let step = solve(&info, &score)?;
        let slack = 1e-11 * (1.0 + v.loglik.abs());
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand: Vec<f64> = x
                .iter()
                .zip(positive)
                .zip(step.iter())
                .map(|((&x, &p), &d)| if p { x * (scale * d).exp() } else { x + scale * d })
                .collect();
            if let Ok(cv) = f(&cand) {
                if cv.loglik.is_finite() && cv.loglik >= v.loglik - slack {
                    accepted = Some((cand, cv));
                    break;
                }
            }
            scale *= 0.5;
        }
        match accepted {
            Some((cx, cv)) => {
                x = cx;
                v = cv;
            }
            None => {
                let gradient_norm = sup_norm(&v.score);
                return Ok(NewtonOutcome { x, value: v, iterations, converged: false, gradient_norm });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(x: &[f64]) -> Result<ProfileValue> {
        Ok(ProfileValue {
            loglik: -(x[0] - 3.0).powi(2) / 2.0,
            score: DVector::from_element(1, 3.0 - x[0]),
            info: DMatrix::from_element(1, 1, 1.0),
        })
    }

    #[test]
    fn quadratic_in_one_step() {
        let r = newton_raphson(quad, &[0.0], &[false], &NewtonOptions::default()).unwrap();
        assert_eq!(r.x, vec![3.0]);
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
    }

    #[test]
    fn empty_parameter_returns_at_once() {
        let f = |_: &[f64]| Ok(ProfileValue { loglik: -1.0, score: DVector::zeros(0), info: DMatrix::zeros(0, 0) });
        let r = newton_raphson(f, &[], &[], &NewtonOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn log_scale_positive_coordinate() {
        // l(a) = 2 ln a - a, maximized at a = 2
        let f = |x: &[f64]| {
            let a = x[0];
            Ok(ProfileValue {
                loglik: 2.0 * a.ln() - a,
                score: DVector::from_element(1, 2.0 / a - 1.0),
                info: DMatrix::from_element(1, 1, 2.0 / (a * a)),
            })
        };
        let r = newton_raphson(f, &[0.1], &[true], &NewtonOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn singular_information_reports_spectrum() {
        let f = |x: &[f64]| {
            Ok(ProfileValue {
                loglik: -(x[0] + x[1] - 1.0).powi(2),
                score: DVector::from_element(2, -2.0 * (x[0] + x[1] - 1.0)),
                info: DMatrix::from_element(2, 2, 2.0),
            })
        };
        let e = newton_raphson(f, &[0.0, 0.0], &[false, false], &NewtonOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Numerical(_)));
        assert!(e.to_string().contains("eigenvalues"));
    }

    #[test]
    fn unbounded_objective_is_flagged() {
        let f = |x: &[f64]| {
            Ok(ProfileValue {
                loglik: -(-x[0]).exp(),
                score: DVector::from_element(1, (-x[0]).exp()),
                info: DMatrix::from_element(1, 1, (-x[0]).exp()),
            })
        };
        let opts = NewtonOptions { max_iter: 10, ..Default::default() };
        let r = newton_raphson(f, &[0.0], &[false], &opts).unwrap();
        assert!(!r.converged);
    }
}
