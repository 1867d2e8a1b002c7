//! Closed-form estimation for the Poisson / homogeneous-Markov special case.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::processes::stays;
use crate::model::{StateSpaces, UnitHistory};
use crate::simulate::Cohort;

/// Event counts and exposures of a cohort.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExposureTally {
    pub rcr_counts: Vec<u64>,
    /// `sum_i tau*_i`.
    pub total_time: f64,
    /// `lm_counts[w1][w2]`.
    pub lm_counts: Vec<Vec<u64>>,
    pub lm_occupation: Vec<f64>,
    /// `hs_counts[v1][v]`; rows of absorbing states stay zero.
    pub hs_counts: Vec<Vec<u64>>,
    pub hs_occupation: Vec<f64>,
}

impl ExposureTally {
    fn zero(sp: &StateSpaces) -> Self {
        Self {
            rcr_counts: vec![0; sp.q()],
            total_time: 0.0,
            lm_counts: vec![vec![0; sp.n_lm()]; sp.n_lm()],
            lm_occupation: vec![0.0; sp.n_lm()],
            hs_counts: vec![vec![0; sp.n_hs()]; sp.n_hs()],
            hs_occupation: vec![0.0; sp.n_hs()],
        }
    }

    fn unit(sp: &StateSpaces, u: &UnitHistory) -> Self {
        let mut t = Self::zero(sp);
        for (q, n) in u.rcr_totals(sp.q()).into_iter().enumerate() {
            t.rcr_counts[q] = n as u64;
        }
        t.total_time = u.end_time;
        for (_, a, b) in u.lm_transitions() {
            t.lm_counts[a][b] += 1;
        }
        for (_, a, b) in u.hs_transitions() {
            t.hs_counts[a][b] += 1;
        }
        for (w, a, b) in stays(u.initial_lm, u.lm_transitions().map(|(s, _, to)| (s, to)), u.end_time) {
            t.lm_occupation[w] += b - a;
        }
        for (v, a, b) in stays(u.initial_hs, u.hs_transitions().map(|(s, _, to)| (s, to)), u.end_time) {
            t.hs_occupation[v] += b - a;
        }
        t
    }

    fn add(mut self, o: Self) -> Self {
        self.total_time += o.total_time;
        for (a, b) in self.rcr_counts.iter_mut().zip(o.rcr_counts) {
            *a += b;
        }
        for (ra, rb) in self.lm_counts.iter_mut().zip(o.lm_counts) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
        for (ra, rb) in self.hs_counts.iter_mut().zip(o.hs_counts) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
        for (a, b) in self.lm_occupation.iter_mut().zip(o.lm_occupation) {
            *a += b;
        }
        for (a, b) in self.hs_occupation.iter_mut().zip(o.hs_occupation) {
            *a += b;
        }
        self
    }
}

/// Counts and exposures by exact integration of the piecewise-constant paths.
pub fn tally(cohort: &Cohort, spaces: &StateSpaces) -> Result<ExposureTally> {
    for (i, u) in cohort.units.iter().enumerate() {
        u.validate(spaces).map_err(|e| Error::Validation(format!("unit {}: {e}", i + 1)))?;
    }
    // folded in unit order so the sums do not depend on the thread count
    Ok(cohort
        .units
        .par_iter()
        .map(|u| ExposureTally::unit(spaces, u))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(ExposureTally::zero(spaces), ExposureTally::add))
}

/// A named point estimate with its standard error; `se` is `None` where the
/// information is singular (no events in the channel).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    pub se: Option<f64>,
}

impl Estimate {
    pub fn new(name: impl Into<String>, value: f64, se: Option<f64>) -> Self {
        Self { name: name.into(), value, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParametricFit {
    pub tally: ExposureTally,
    pub lambda: Vec<Estimate>,
    /// Estimated generator matrices (diagonal filled in).
    pub eta: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    /// Off-diagonal rates in the order of `StateSpaces::lm_pairs` / `hs_pairs`.
    pub eta_estimates: Vec<Estimate>,
    pub xi_estimates: Vec<Estimate>,
}

fn rate(count: u64, exposure: f64) -> (f64, Option<f64>) {
    if count == 0 {
        return (0.0, None);
    }
    assert!(exposure > 0.0, "events observed with zero exposure");
    let r = count as f64 / exposure;
    (r, Some(r / (count as f64).sqrt()))
}

fn generator(pairs: &[(usize, usize)], n: usize, est: &[Estimate]) -> Vec<Vec<f64>> {
    let mut g = vec![vec![0.0; n]; n];
    for (&(a, b), e) in pairs.iter().zip(est) {
        g[a][b] = e.value;
        g[a][a] -= e.value;
    }
    g
}

/// Occurrence-exposure maximum likelihood estimates with observed-information
/// standard errors.
pub fn fit_special_case(cohort: &Cohort, spaces: &StateSpaces) -> Result<ParametricFit> {
    let t = tally(cohort, spaces)?;
    let lambda = (0..spaces.q())
        .map(|q| {
            let (v, se) = rate(t.rcr_counts[q], t.total_time);
            Estimate::new(format!("lambda_{}", q + 1), v, se)
        })
        .collect();
    let lm = spaces.lm_labels();
    let hs = spaces.hs_labels();
    let lm_pairs = spaces.lm_pairs();
    let hs_pairs = spaces.hs_pairs();
    let eta_estimates: Vec<Estimate> = lm_pairs
        .iter()
        .map(|&(a, b)| {
            let (v, se) = rate(t.lm_counts[a][b], t.lm_occupation[a]);
            Estimate::new(format!("eta({},{})", lm[a], lm[b]), v, se)
        })
        .collect();
    let xi_estimates: Vec<Estimate> = hs_pairs
        .iter()
        .map(|&(a, b)| {
            let (v, se) = rate(t.hs_counts[a][b], t.hs_occupation[a]);
            Estimate::new(format!("xi({},{})", hs[a], hs[b]), v, se)
        })
        .collect();
    Ok(ParametricFit {
        eta: generator(&lm_pairs, spaces.n_lm(), &eta_estimates),
        xi: generator(&hs_pairs, spaces.n_hs(), &xi_estimates),
        tally: t,
        lambda,
        eta_estimates,
        xi_estimates,
    })
}

/// Per-unit Fisher information for a constant RCR rate `lambda` when
/// monitoring ends at an `Exp(nu)` time and the health status starts from
/// `p0` over the transient states with transient generator block `gamma11`:
/// `(1 / (lambda nu)) p0' (I - gamma11 / nu)^{-1} 1`.
pub fn theoretical_info_rcr(lambda: f64, gamma11: &DMatrix<f64>, p0: &[f64], nu: f64) -> Result<f64> {
    if !(nu > 0.0) || !(lambda > 0.0) {
        return Err(Error::Domain(format!("need lambda > 0 and nu > 0, got {lambda} and {nu}")));
    }
    let k = gamma11.nrows();
    if gamma11.ncols() != k || p0.len() != k {
        return Err(Error::Domain("gamma11 must be square and match p0".into()));
    }
    let m = DMatrix::identity(k, k) - gamma11 / nu;
    let x = m.clone().lu().solve(&DVector::from_element(k, 1.0)).ok_or_else(|| {
        let sv = m.singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        Error::Numerical(format!(
            "I - Gamma11/nu is singular: singular values {:?}, condition number {}",
            sv.as_slice(),
            if lo > 0.0 { hi / lo } else { f64::INFINITY }
        ))
    })?;
    let v: f64 = p0.iter().zip(x.iter()).map(|(p, x)| p * x).sum();
    Ok(v / (lambda * nu))
}

/// Transient block of an HS generator.
pub fn transient_block(xi: &DMatrix<f64>, spaces: &StateSpaces) -> DMatrix<f64> {
    let t = spaces.transient();
    DMatrix::from_fn(t.len(), t.len(), |i, j| xi[(t[i], t[j])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EndReason, Event, EventKind};

    fn unit(rcr: &[f64], end: f64) -> UnitHistory {
        UnitHistory {
            covariates: vec![],
            initial_lm: 0,
            initial_hs: 1,
            events: rcr.iter().map(|&t| Event { time: t, kind: EventKind::Rcr(0) }).collect(),
            end_time: end,
            end_reason: EndReason::Censored,
        }
    }

    #[test]
    fn two_unit_closed_form() {
        let sp = StateSpaces::numbered(2, 2, &[0], 1).unwrap();
        let c = Cohort::new(vec![unit(&[0.5, 1.0, 1.5], 2.0), unit(&[0.3], 1.0)]);
        let f = fit_special_case(&c, &sp).unwrap();
        assert_eq!(f.lambda[0].value, 4.0 / 3.0);
        assert_eq!(f.lambda[0].se, Some(2.0 / 3.0));
    }

    #[test]
    fn no_events_flags_se() {
        let sp = StateSpaces::numbered(2, 2, &[0], 2).unwrap();
        let c = Cohort::new(vec![unit(&[0.5], 2.0)]);
        let f = fit_special_case(&c, &sp).unwrap();
        assert_eq!(f.lambda[1].value, 0.0);
        assert_eq!(f.lambda[1].se, None);
        assert_eq!(f.eta_estimates[0].se, None);
    }

    #[test]
    fn occupation_interval_arithmetic() {
        let sp = StateSpaces::numbered(2, 2, &[0], 1).unwrap();
        let mut u = unit(&[], 2.0);
        u.events = vec![
            Event { time: 0.5, kind: EventKind::Lm { from: 0, to: 1 } },
            Event { time: 1.2, kind: EventKind::Lm { from: 1, to: 0 } },
        ];
        let t = tally(&Cohort::new(vec![u]), &sp).unwrap();
        assert!((t.lm_occupation[0] - 1.3).abs() < 1e-12);
        assert!((t.lm_occupation.iter().sum::<f64>() - t.total_time).abs() < 1e-12);
        let f = fit_special_case(&Cohort::new(vec![unit(&[], 2.0)]), &sp).unwrap();
        assert_eq!(f.tally.lm_occupation[0], 2.0);
    }

    #[test]
    fn rejects_inconsistent_history() {
        let sp = StateSpaces::numbered(2, 2, &[0], 1).unwrap();
        let mut u = unit(&[], 2.0);
        u.events = vec![Event { time: 0.5, kind: EventKind::Lm { from: 1, to: 0 } }];
        assert!(tally(&Cohort::new(vec![u]), &sp).is_err());
    }

    #[test]
    fn resolvent_value() {
        let g = DMatrix::from_row_slice(2, 2, &[-0.7, 0.5, 0.5, -0.55]);
        let v = theoretical_info_rcr(1.0, &g, &[0.5, 0.5], 0.2).unwrap();
        // (I - G/nu) = [[4.5, -2.5], [-2.5, 3.75]], det 10.625
        let oracle = 0.5 * (6.25 + 7.0) / 10.625 / 0.2;
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 3.1176).abs() < 1e-4);
        let z = theoretical_info_rcr(2.0, &DMatrix::zeros(1, 1), &[1.0], 0.5).unwrap();
        assert!((z - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_resolvent_reports() {
        let g = DMatrix::from_row_slice(1, 1, &[0.5]);
        let e = theoretical_info_rcr(1.0, &g, &[1.0], 0.5).unwrap_err();
        assert!(matches!(e, Error::Numerical(_)));
        assert!(e.to_string().contains("condition"));
    }
}
