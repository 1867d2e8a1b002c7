use std::fmt;
use std::sync::Arc;

use super::age::EffectiveAgePolicy;
use super::history::{StateSnapshot, UnitHistory};
use super::params::ModelParams;
use super::rho::{LogCountPower, RhoFamily};
use super::states::StateSpaces;
use crate::error::{Error, Result};

/// One transition channel of the joint model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Rcr(usize),
    Lm(usize, usize),
    Hs(usize, usize),
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Rcr(q) => write!(f, "RCR {}", q + 1),
            Channel::Lm(a, b) => write!(f, "LM {}->{}", a + 1, b + 1),
            Channel::Hs(a, b) => write!(f, "HS {}->{}", a + 1, b + 1),
        }
    }
}

fn check_snapshot(spaces: &StateSpaces, snap: &StateSnapshot) -> Result<()> {
    if snap.rcr_counts.len() != spaces.q() {
        return Err(Error::Domain(format!("snapshot has {} counts, expected {}", snap.rcr_counts.len(), spaces.q())));
    }
    Ok(())
}

/// `B^R(s-) = [X, iota_V(V(s-)), iota_W(W(s-))]`.
pub fn design_row_r(spaces: &StateSpaces, snap: &StateSnapshot, x: &[f64]) -> Result<Vec<f64>> {
    check_snapshot(spaces, snap)?;
    let mut row = x.to_vec();
    row.extend(spaces.hs_dummy(snap.hs_state)?);
    row.extend(spaces.lm_dummy(snap.lm_state)?);
    Ok(row)
}

/// `B^W(s-) = [X, iota_V(V(s-)), N^R(s-)]`.
pub fn design_row_w(spaces: &StateSpaces, snap: &StateSnapshot, x: &[f64]) -> Result<Vec<f64>> {
    check_snapshot(spaces, snap)?;
    let mut row = x.to_vec();
    row.extend(spaces.hs_dummy(snap.hs_state)?);
    row.extend(snap.rcr_counts.iter().map(|&n| n as f64));
    Ok(row)
}

/// `B^V(s-) = [X, iota_W(W(s-)), N^R(s-)]`.
pub fn design_row_v(spaces: &StateSpaces, snap: &StateSnapshot, x: &[f64]) -> Result<Vec<f64>> {
    check_snapshot(spaces, snap)?;
    let mut row = x.to_vec();
    row.extend(spaces.lm_dummy(snap.lm_state)?);
    row.extend(snap.rcr_counts.iter().map(|&n| n as f64));
    Ok(row)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Linear predictors `B theta` for the three components, computed without
/// allocating. `hs` must be transient.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Predictors {
    pub r: f64,
    pub w: f64,
    pub v: f64,
}

impl Predictors {
    pub(crate) fn compute(
        spaces: &StateSpaces,
        params: &ModelParams,
        x: &[f64],
        lm: usize,
        hs: usize,
        counts: &[u32],
    ) -> Self {
        let p = x.len();
        let xr = dot(x, &params.theta_r[..p]);
        let xw = dot(x, &params.theta_w[..p]);
        let xv = dot(x, &params.theta_v[..p]);
        let nv = spaces.hs_dummy_len();
        let nw = spaces.lm_dummy_len();
        let hs_pos = spaces.transient().iter().position(|&t| t == hs).unwrap_or(0);
        let hs_r = if hs_pos > 0 { params.theta_r[p + hs_pos - 1] } else { 0.0 };
        let hs_w = if hs_pos > 0 { params.theta_w[p + hs_pos - 1] } else { 0.0 };
        let lm_r = if lm > 0 { params.theta_r[p + nv + lm - 1] } else { 0.0 };
        let lm_v = if lm > 0 { params.theta_v[p + lm - 1] } else { 0.0 };
        let nr: f64 = counts.iter().zip(&params.theta_w[p + nv..]).map(|(&n, t)| n as f64 * t).sum();
        let nrv: f64 = counts.iter().zip(&params.theta_v[p + nw..]).map(|(&n, t)| n as f64 * t).sum();
        Predictors { r: xr + hs_r + lm_r, w: xw + hs_w + nr, v: xv + lm_v + nrv }
    }
}

/// The joint model: state spaces, parameters, effective-age policy and rho family.
#[derive(Debug, Clone)]
pub struct JointModel {
    pub spaces: StateSpaces,
    pub params: ModelParams,
    pub age_policy: EffectiveAgePolicy,
    pub rho: Arc<dyn RhoFamily>,
}

impl JointModel {
    pub fn new(spaces: StateSpaces, params: ModelParams, age_policy: EffectiveAgePolicy, p: usize) -> Result<Self> {
        params.validate(&spaces, p)?;
        Ok(Self { spaces, params, age_policy, rho: Arc::new(LogCountPower::natural()) })
    }

    pub fn with_rho(mut self, rho: Arc<dyn RhoFamily>) -> Self {
        self.rho = rho;
        self
    }

    /// All channels of the model in a fixed order: RCR types, LM pairs, HS pairs.
    pub fn channels(&self) -> Vec<Channel> {
        let mut out: Vec<Channel> = (0..self.spaces.q()).map(Channel::Rcr).collect();
        out.extend(self.spaces.lm_pairs().into_iter().map(|(a, b)| Channel::Lm(a, b)));
        out.extend(self.spaces.hs_pairs().into_iter().map(|(a, b)| Channel::Hs(a, b)));
        out
    }

    /// Intensity of `channel` for `unit` at time `s`.
    pub fn intensity(&self, unit: &UnitHistory, s: f64, channel: Channel) -> Result<f64> {
        let sp = &self.spaces;
        match channel {
            Channel::Rcr(q) if q >= sp.q() => return Err(Error::Domain(format!("unknown channel {channel:?}"))),
            Channel::Lm(a, b) if a >= sp.n_lm() || b >= sp.n_lm() || a == b => {
                return Err(Error::Domain(format!("unknown channel {channel:?}")))
            }
            Channel::Hs(a, b) if a >= sp.n_hs() || b >= sp.n_hs() || a == b => {
                return Err(Error::Domain(format!("unknown channel {channel:?}")))
            }
            _ => {}
        }
        if !(s > 0.0) {
            return Err(Error::Domain(format!("intensity requires s > 0, got {s}")));
        }
        let snap = unit.snapshot(sp.q(), s);
        if !snap.at_risk || sp.is_absorbing(snap.hs_state) {
            return Ok(0.0);
        }
        let pr =
            Predictors::compute(sp, &self.params, &unit.covariates, snap.lm_state, snap.hs_state, &snap.rcr_counts);
        Ok(match channel {
            Channel::Rcr(q) => {
                let age = self.age_policy.age(unit, q, s)?;
                let rho = super::rho::rho(self.rho.as_ref(), q, &snap.rcr_counts, self.params.alpha[q])?;
                self.params.baseline[q].hazard(age)? * rho * pr.r.exp()
            }
            Channel::Lm(a, b) => {
                if snap.lm_state != a {
                    0.0
                } else {
                    self.params.eta[(a, b)] * pr.w.exp()
                }
            }
            Channel::Hs(a, b) => {
                if snap.hs_state != a {
                    0.0
                } else {
                    self.params.xi[(a, b)] * pr.v.exp()
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::history::{EndReason, Event, EventKind};
    use crate::model::params::Baseline;

    fn snap(lm: usize, hs: usize, counts: Vec<u32>) -> StateSnapshot {
        StateSnapshot { time: 1.0, lm_state: lm, hs_state: hs, rcr_counts: counts, at_risk: true }
    }

    #[test]
    fn design_rows_concatenate() {
        // HS states {0,1,2,3} with 0 absorbing, so the transient order is 1,2,3.
        let sp = StateSpaces::numbered(3, 4, &[0], 3).unwrap();
        let x = [1.0, -0.3];
        let r = design_row_r(&sp, &snap(2, 2, vec![0, 0, 0]), &x).unwrap();
        assert_eq!(r, vec![1.0, -0.3, 1.0, 0.0, 0.0, 1.0]);
        let w = design_row_w(&sp, &snap(0, 2, vec![2, 0, 1]), &x).unwrap();
        assert_eq!(w, vec![1.0, -0.3, 1.0, 0.0, 2.0, 0.0, 1.0]);
        let v = design_row_v(&sp, &snap(1, 1, vec![1, 1, 1]), &[0.0]).unwrap();
        assert_eq!(v, vec![0.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
        assert!(design_row_v(&sp, &snap(1, 1, vec![1]), &[0.0]).is_err());
    }

    #[test]
    fn predictors_match_design_rows() {
        let sp = StateSpaces::numbered(3, 3, &[0], 3).unwrap();
        let p = ModelParams::illustration();
        let x = [1.0, 0.4];
        for lm in 0..3 {
            for hs in 1..3 {
                let counts = vec![2, 0, 5];
                let s = snap(lm, hs, counts.clone());
                let pr = Predictors::compute(&sp, &p, &x, lm, hs, &counts);
                assert!((pr.r - dot(&design_row_r(&sp, &s, &x).unwrap(), &p.theta_r)).abs() < 1e-12);
                assert!((pr.w - dot(&design_row_w(&sp, &s, &x).unwrap(), &p.theta_w)).abs() < 1e-12);
                assert!((pr.v - dot(&design_row_v(&sp, &s, &x).unwrap(), &p.theta_v)).abs() < 1e-12);
            }
        }
    }

    fn unit() -> UnitHistory {
        UnitHistory {
            covariates: vec![0.0, 0.0],
            initial_lm: 0,
            initial_hs: 1,
            events: vec![Event { time: 1.0, kind: EventKind::Hs { from: 1, to: 0 } }],
            end_time: 1.0,
            end_reason: EndReason::Absorbed,
        }
    }

    #[test]
    fn intensity_cases() {
        let sp = StateSpaces::numbered(3, 3, &[0], 3).unwrap();
        let mut p = ModelParams::illustration();
        let m = JointModel::new(sp.clone(), p.clone(), EffectiveAgePolicy::MinimalRepair, 2).unwrap();
        // Weibull(2, 0.9) at age 0.6, first states, X = 0: exp factor is 1
        let v = m.intensity(&unit(), 0.6, Channel::Rcr(0)).unwrap();
        assert!((v - 1.481481481481).abs() < 1e-9);
        for c in m.channels() {
            assert_eq!(m.intensity(&unit(), 1.5, c).unwrap(), 0.0);
        }
        assert!(m.intensity(&unit(), 0.5, Channel::Lm(0, 0)).is_err());
        assert!(m.intensity(&unit(), 0.5, Channel::Rcr(3)).is_err());

        p.baseline = vec![Baseline::Constant { rate: 0.7 }; 3];
        p.alpha = vec![1.0; 3];
        p.theta_r = vec![0.0; 5];
        let m = JointModel::new(sp, p, EffectiveAgePolicy::MinimalRepair, 2).unwrap();
        assert_eq!(m.intensity(&unit(), 0.3, Channel::Rcr(1)).unwrap(), 0.7);
        assert_eq!(m.intensity(&unit(), 0.3, Channel::Hs(1, 2)).unwrap(), 0.5);
        assert_eq!(m.intensity(&unit(), 0.3, Channel::Hs(2, 1)).unwrap(), 0.0);
    }
}
