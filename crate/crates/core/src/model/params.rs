use nalgebra::DMatrix;

use super::states::StateSpaces;
use super::step::StepFunction;
use crate::error::{Error, Result};

/// Baseline hazard of one recurrent event type, as a function of effective age.
#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    Constant {
        rate: f64,
    },
    Weibull {
        shape: f64,
        scale: f64,
    },
    /// Estimated cumulative hazard; has no density.
    Step(StepFunction),
}

impl Baseline {
    pub fn hazard(&self, t: f64) -> Result<f64> {
        match *self {
            Baseline::Constant { rate } => Ok(rate),
            Baseline::Weibull { shape, scale } => {
                if t <= 0.0 {
                    return Ok(if shape > 1.0 {
                        0.0
                    } else if shape == 1.0 {
                        1.0 / scale
                    } else {
                        f64::INFINITY
                    });
                }
                Ok(shape / scale * (t / scale).powf(shape - 1.0))
            }
            Baseline::Step(_) => Err(Error::Domain("a step baseline has no hazard density".into())),
        }
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        match self {
            Baseline::Constant { rate } => rate * t.max(0.0),
            Baseline::Weibull { shape, scale } => (t.max(0.0) / scale).powf(*shape),
            Baseline::Step(f) => f.eval(t),
        }
    }

    /// Constant hazard, if the baseline has one.
    pub fn constant_rate(&self) -> Option<f64> {
        match *self {
            Baseline::Constant { rate } => Some(rate),
            Baseline::Weibull { shape: 1.0, scale } => Some(1.0 / scale),
            _ => None,
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            Baseline::Constant { rate } => rate >= 0.0 && rate.is_finite(),
            Baseline::Weibull { shape, scale } => shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite(),
            Baseline::Step(ref f) => f.jump_sizes().iter().all(|d| *d >= 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid baseline {self:?}")))
        }
    }
}

/// All model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub baseline: Vec<Baseline>,
    pub alpha: Vec<f64>,
    /// Marker generator, `|W| x |W|`.
    pub eta: DMatrix<f64>,
    /// Health-status generator, `|V| x |V|`.
    pub xi: DMatrix<f64>,
    /// `(beta^R, gamma^R, kappa^R)`.
    pub theta_r: Vec<f64>,
    /// `(beta^W, gamma^W, nu^W)`.
    pub theta_w: Vec<f64>,
    /// `(beta^V, kappa^V, nu^V)`.
    pub theta_v: Vec<f64>,
}

const ROW_SUM_TOL: f64 = 1e-12;

/// Checks generator-matrix constraints; `absorbing[i]` rows must vanish.
pub fn check_generator(m: &DMatrix<f64>, absorbing: Option<&[bool]>, name: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Config(format!("{name} must be square")));
    }
    for i in 0..m.nrows() {
        let row = m.row(i);
        for j in 0..m.ncols() {
            if i != j && !(row[j] >= 0.0) {
                return Err(Error::Config(format!("{name}[{i},{j}] = {} is negative", row[j])));
            }
        }
        let sum: f64 = row.iter().sum();
        if sum.abs() > ROW_SUM_TOL {
            return Err(Error::Config(format!("{name} row {i} sums to {sum}, not 0")));
        }
        if absorbing.is_some_and(|a| a[i]) && row.iter().any(|&x| x != 0.0) {
            return Err(Error::Config(format!("{name} row {i} belongs to an absorbing state and must be zero")));
        }
    }
    Ok(())
}

/// Builds a generator from its off-diagonal rates, filling the diagonal.
pub fn generator_from_rates(rates: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rates.len();
    let mut m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rates[i][j] });
    for i in 0..n {
        let s: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = -s;
    }
    m
}

impl ModelParams {
    pub fn validate(&self, spaces: &StateSpaces, p: usize) -> Result<()> {
        let q = spaces.q();
        if self.baseline.len() != q || self.alpha.len() != q {
            return Err(Error::Config(format!("need {q} baselines and {q} alphas")));
        }
        for b in &self.baseline {
            b.check()?;
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0)) {
            return Err(Error::Config(format!("alpha must be positive, got {a}")));
        }
        if self.eta.nrows() != spaces.n_lm() {
            return Err(Error::Config("eta dimension does not match the LM states".into()));
        }
        if self.xi.nrows() != spaces.n_hs() {
            return Err(Error::Config("xi dimension does not match the HS states".into()));
        }
        check_generator(&self.eta, None, "eta")?;
        check_generator(&self.xi, Some(spaces.absorbing_flags()), "xi")?;
        let dims = [
            ("theta_R", self.theta_r.len(), spaces.dim_theta_r(p)),
            ("theta_W", self.theta_w.len(), spaces.dim_theta_w(p)),
            ("theta_V", self.theta_v.len(), spaces.dim_theta_v(p)),
        ];
        for (name, got, want) in dims {
            if got != want {
                return Err(Error::Config(format!("{name} has length {got}, expected {want}")));
            }
        }
        Ok(())
    }

    /// Parameters of the simulated illustration: three Weibull risks, a
    /// three-state marker and a three-state health status with state 1 absorbing,
    /// two covariates.
    pub fn illustration() -> Self {
        ModelParams {
            baseline: vec![
                Baseline::Weibull { shape: 2.0, scale: 0.9 },
                Baseline::Weibull { shape: 2.0, scale: 1.1 },
                Baseline::Weibull { shape: 3.0, scale: 1.0 },
            ],
            alpha: vec![1.5, 1.2, 2.0],
            eta: generator_from_rates(&[vec![0.0, 0.2, 0.1], vec![0.1, 0.0, 0.1], vec![0.1, 0.2, 0.0]]),
            xi: generator_from_rates(&[vec![0.0, 0.0, 0.0], vec![0.2, 0.0, 0.5], vec![0.05, 0.5, 0.0]]),
            theta_r: vec![1.0, -1.0, 1.0, 1.0, -1.0],
            theta_w: vec![1.0, -1.0, 1.0, 1.0, 1.0, -2.0],
            theta_v: vec![1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -2.0],
        }
    }

    /// True when the parameters describe independent Poisson processes and
    /// homogeneous Markov chains: constant baselines, unit rho, all regression
    /// coefficients zero.
    pub fn is_special_case(&self) -> bool {
        self.baseline.iter().all(|b| b.constant_rate().is_some())
            && self.alpha.iter().all(|&a| a == 1.0)
            && self.theta_r.iter().chain(&self.theta_w).chain(&self.theta_v).all(|&t| t == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weibull_hazard_value() {
        let b = Baseline::Weibull { shape: 2.0, scale: 0.9 };
        assert!((b.hazard(0.6).unwrap() - 1.481481481).abs() < 1e-8);
        assert!((b.cumulative(0.3) - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn weibull_cumulative_matches_quadrature() {
        for b in ModelParams::illustration().baseline {
            for &t in &[0.0, 0.5, 1.3, 3.0] {
                // composite Simpson with many panels
                let m = 20_000;
                let h = t / m as f64;
                let mut acc = 0.0;
                for k in 0..=m {
                    let w = if k == 0 || k == m {
                        1.0
                    } else if k % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    acc += w * b.hazard(k as f64 * h).unwrap();
                }
                let quad = acc * h / 3.0;
                assert!((quad - b.cumulative(t)).abs() < 1e-8, "{b:?} t={t}");
            }
        }
    }

    #[test]
    fn illustration_is_valid() {
        let s = StateSpaces::numbered(3, 3, &[0], 3).unwrap();
        ModelParams::illustration().validate(&s, 2).unwrap();
    }

    #[test]
    fn generator_checks() {
        let s = StateSpaces::numbered(3, 3, &[0], 3).unwrap();
        let mut p = ModelParams::illustration();
        p.xi[(0, 1)] = 0.1;
        p.xi[(0, 0)] = -0.1;
        assert!(p.validate(&s, 2).is_err());
        let mut p = ModelParams::illustration();
        p.eta[(1, 1)] = -0.25;
        assert!(p.validate(&s, 2).is_err());
    }
}
