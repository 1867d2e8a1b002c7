//! Risk sets, Breslow-type baselines, occurrence-exposure rates and the three
//! profile log-likelihoods with analytic scores and observed informations.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::grid::{in_window, tol, EventGrid, Segment};
use crate::error::{Error, Result};
use crate::model::intensity::dot;
use crate::model::{EventKind, RhoFamily, StepFunction};

/// Log-likelihood value with its gradient and observed information
/// (negative Hessian).
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileValue {
    pub loglik: f64,
    pub score: DVector<f64>,
    pub info: DMatrix<f64>,
}

impl ProfileValue {
    fn zero(d: usize) -> Self {
        Self { loglik: 0.0, score: DVector::zeros(d), info: DMatrix::zeros(d, d) }
    }

    fn add(mut self, o: Self) -> Self {
        self.loglik += o.loglik;
        self.score += o.score;
        self.info += o.info;
        self
    }
}

/// A weighted risk set `S0` with its gradient `S1` and Hessian `S2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSet {
    pub s0: f64,
    pub s1: DVector<f64>,
    pub s2: DMatrix<f64>,
}

impl RiskSet {
    fn zero(d: usize) -> Self {
        Self { s0: 0.0, s1: DVector::zeros(d), s2: DMatrix::zeros(d, d) }
    }

    /// Adds a term of weight `w` whose log-weight has gradient `v`.
    fn push(&mut self, w: f64, v: &DVector<f64>) {
        self.s0 += w;
        self.s1.axpy(w, v, 1.0);
        self.s2.ger(w, v, v, 1.0);
    }

    /// `S2/S0 - (S1/S0)^{x2}`.
    fn centred_second(&self) -> DMatrix<f64> {
        let m = &self.s1 / self.s0;
        &self.s2 / self.s0 - &m * m.transpose()
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Domain(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

/// Per-segment type-`q` weight `rho * psi^R` with `d log rho / d alpha` and
/// `d^2 log rho / d alpha^2`.
struct RWeights {
    w: Vec<f64>,
    g: Vec<f64>,
    g2: Vec<f64>,
}

fn r_weights(grid: &EventGrid, rho: &dyn RhoFamily, q: usize, alpha: f64, theta: &[f64]) -> RWeights {
    let n = grid.segments.len();
    let (mut w, mut g, mut g2) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for s in &grid.segments {
        w.push((rho.log_rho(q, &s.counts, alpha) + dot(&s.br, theta)).exp());
        g.push(rho.d_log_rho(q, &s.counts, alpha));
        g2.push(rho.d2_log_rho(q, &s.counts, alpha));
    }
    RWeights { w, g, g2 }
}

/// `(d log rho/d alpha, B^R)` of a segment.
fn r_direction(s: &Segment, g: f64) -> DVector<f64> {
    let mut v = DVector::zeros(1 + s.br.len());
    v[0] = g;
    v.rows_mut(1, s.br.len()).copy_from_slice(&s.br);
    v
}

fn r_risk_set(grid: &EventGrid, q: usize, t: f64, wt: &RWeights) -> RiskSet {
    let d = 1 + grid.spaces.dim_theta_r(grid.p);
    let mut rs = RiskSet::zero(d);
    for (k, s) in grid.segments.iter().enumerate() {
        let (a, b) = s.age_window(q);
        if in_window(a, b, t) {
            let w = wt.w[k];
            rs.push(w, &r_direction(s, wt.g[k]));
            rs.s2[(0, 0)] += w * wt.g2[k];
        }
    }
    rs
}

/// `S_q^{0R}(t | alpha_q, theta^R)` with gradient and Hessian in `(alpha_q, theta^R)`.
pub fn risk_set_r(
    grid: &EventGrid,
    rho: &dyn RhoFamily,
    q: usize,
    t: f64,
    alpha: f64,
    theta_r: &[f64],
) -> Result<RiskSet> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("risk set requires t >= 0, got {t}")));
    }
    if q >= grid.spaces.q() {
        return Err(Error::Domain(format!("event type {q} out of range")));
    }
    check_alpha(alpha)?;
    check_len("theta_R", theta_r.len(), grid.spaces.dim_theta_r(grid.p))?;
    Ok(r_risk_set(grid, q, t, &r_weights(grid, rho, q, alpha, theta_r)))
}

/// Risk sets at every distinct type-`q` event age not beyond `t_star`:
/// `(T_l, dN(T_l), S(T_l))`.
pub(crate) fn r_groups(
    grid: &EventGrid,
    rho: &dyn RhoFamily,
    q: usize,
    alpha: f64,
    theta_r: &[f64],
    t_star: Option<f64>,
) -> Vec<(f64, usize, RiskSet)> {
    let wt = r_weights(grid, rho, q, alpha, theta_r);
    grid.rcr_groups[q]
        .par_iter()
        .filter(|g| t_star.is_none_or(|ts| g.age <= ts + tol(ts)))
        .map(|g| (g.age, g.segments.len(), r_risk_set(grid, q, g.age, &wt)))
        .collect()
}

/// Breslow-type NPMLE of `Lambda_0q` given `(alpha_q, theta^R)`.
pub fn breslow_lambda(
    grid: &EventGrid,
    rho: &dyn RhoFamily,
    q: usize,
    alpha: f64,
    theta_r: &[f64],
    t_star: Option<f64>,
) -> Result<StepFunction> {
    check_alpha(alpha)?;
    check_len("theta_R", theta_r.len(), grid.spaces.dim_theta_r(grid.p))?;
    let groups = r_groups(grid, rho, q, alpha, theta_r, t_star);
    let (times, sizes) =
        groups.iter().map(|(t, d, rs)| (*t, if rs.s0 > 0.0 { *d as f64 / rs.s0 } else { 0.0 })).unzip();
    StepFunction::new(times, sizes)
}

/// `l^R_pl` over `(alpha_1..alpha_Q, theta^R)` with score and information.
pub fn profile_r(
    grid: &EventGrid,
    rho: &dyn RhoFamily,
    alpha: &[f64],
    theta_r: &[f64],
    t_star: Option<f64>,
) -> Result<ProfileValue> {
    let qn = grid.spaces.q();
    let d = grid.spaces.dim_theta_r(grid.p);
    check_len("alpha", alpha.len(), qn)?;
    check_len("theta_R", theta_r.len(), d)?;
    for &a in alpha {
        check_alpha(a)?;
    }
    let mut out = ProfileValue::zero(qn + d);
    for q in 0..qn {
        let wt = r_weights(grid, rho, q, alpha[q], theta_r);
        // summed in group order so the result does not depend on the thread count
        let part = grid.rcr_groups[q]
            .par_iter()
            .filter(|g| t_star.is_none_or(|ts| g.age <= ts + tol(ts)))
            .map(|g| {
                let rs = r_risk_set(grid, q, g.age, &wt);
                assert!(rs.s0 > 0.0, "event at age {} outside its own risk set", g.age);
                let mut pv = ProfileValue::zero(1 + d);
                let m = &rs.s1 / rs.s0;
                let c = rs.centred_second();
                for &k in &g.segments {
                    let s = &grid.segments[k];
                    pv.loglik += rho.log_rho(q, &s.counts, alpha[q]) + dot(&s.br, theta_r) - rs.s0.ln();
                    pv.score += r_direction(s, wt.g[k]) - &m;
                    pv.info += &c;
                    pv.info[(0, 0)] -= wt.g2[k];
                }
                pv
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(ProfileValue::zero(1 + d), ProfileValue::add);
        let idx: Vec<usize> = std::iter::once(q).chain(qn..qn + d).collect();
        out.loglik += part.loglik;
        for (a, &i) in idx.iter().enumerate() {
            out.score[i] += part.score[a];
            for (b, &j) in idx.iter().enumerate() {
                out.info[(i, j)] += part.info[(a, b)];
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy)]
pub(crate) enum Marker {
    Lm,
    Hs,
}

impl Marker {
    fn row<'a>(&self, s: &'a Segment) -> &'a [f64] {
        match self {
            Marker::Lm => &s.bw,
            Marker::Hs => &s.bv,
        }
    }

    fn state(&self, s: &Segment) -> usize {
        match self {
            Marker::Lm => s.lm,
            Marker::Hs => s.hs,
        }
    }

    fn transition(&self, s: &Segment) -> Option<(usize, usize)> {
        match (self, s.event) {
            (Marker::Lm, Some(EventKind::Lm { from, to })) => Some((from, to)),
            (Marker::Hs, Some(EventKind::Hs { from, to })) => Some((from, to)),
            _ => None,
        }
    }

    fn n_states(&self, grid: &EventGrid) -> usize {
        match self {
            Marker::Lm => grid.spaces.n_lm(),
            Marker::Hs => grid.spaces.n_hs(),
        }
    }

    fn dim(&self, grid: &EventGrid) -> usize {
        match self {
            Marker::Lm => grid.spaces.dim_theta_w(grid.p),
            Marker::Hs => grid.spaces.dim_theta_v(grid.p),
        }
    }
}

/// Exposure `S^0(state | theta) = sum over segments of length * psi` per
/// origin state, with derivatives.
pub(crate) fn exposures(grid: &EventGrid, m: Marker, theta: &[f64]) -> Vec<RiskSet> {
    let d = m.dim(grid);
    let ns = m.n_states(grid);
    let mut acc = vec![RiskSet::zero(d); ns];
    for s in &grid.segments {
        let row = m.row(s);
        let w = s.len() * dot(row, theta).exp();
        acc[m.state(s)].push(w, &DVector::from_column_slice(row));
    }
    acc
}

/// Transition counts `n[from][to]`.
pub(crate) fn transition_counts(grid: &EventGrid, m: Marker) -> Vec<Vec<u64>> {
    let ns = m.n_states(grid);
    let mut n = vec![vec![0u64; ns]; ns];
    for s in &grid.segments {
        if let Some((a, b)) = m.transition(s) {
            n[a][b] += 1;
        }
    }
    n
}

fn profile_marker(grid: &EventGrid, m: Marker, theta: &[f64]) -> Result<ProfileValue> {
    let d = m.dim(grid);
    check_len(
        match m {
            Marker::Lm => "theta_W",
            Marker::Hs => "theta_V",
        },
        theta.len(),
        d,
    )?;
    let ex = exposures(grid, m, theta);
    let mut out = ProfileValue::zero(d);
    let mut leaving = vec![0u64; m.n_states(grid)];
    for s in &grid.segments {
        if let Some((a, _)) = m.transition(s) {
            let row = m.row(s);
            out.loglik += dot(row, theta);
            out.score += DVector::from_column_slice(row);
            leaving[a] += 1;
        }
    }
    for (rs, &n) in ex.iter().zip(&leaving) {
        if n == 0 {
            continue;
        }
        assert!(rs.s0 > 0.0, "transitions out of a state with no exposure");
        let n = n as f64;
        out.loglik -= n * rs.s0.ln();
        out.score -= &rs.s1 * (n / rs.s0);
        out.info += rs.centred_second() * n;
    }
    Ok(out)
}

/// `l^W_pl(theta^W)` with score and information.
pub fn profile_w(grid: &EventGrid, theta_w: &[f64]) -> Result<ProfileValue> {
    profile_marker(grid, Marker::Lm, theta_w)
}

/// `l^V_pl(theta^V)` with score and information.
pub fn profile_v(grid: &EventGrid, theta_v: &[f64]) -> Result<ProfileValue> {
    profile_marker(grid, Marker::Hs, theta_v)
}

fn rates(grid: &EventGrid, m: Marker, theta: &[f64]) -> DMatrix<f64> {
    let ex = exposures(grid, m, theta);
    let n = transition_counts(grid, m);
    let ns = m.n_states(grid);
    let mut g = DMatrix::zeros(ns, ns);
    for a in 0..ns {
        for b in 0..ns {
            if a != b && n[a][b] > 0 {
                g[(a, b)] = n[a][b] as f64 / ex[a].s0;
                g[(a, a)] -= g[(a, b)];
            }
        }
    }
    g
}

/// Occurrence-exposure generators `eta(.|theta^W)` and `xi(.|theta^V)`, with
/// `0/0 = 0` for states never left.
pub fn eta_xi_given_theta(grid: &EventGrid, theta_w: &[f64], theta_v: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_len("theta_W", theta_w.len(), grid.spaces.dim_theta_w(grid.p))?;
    check_len("theta_V", theta_v.len(), grid.spaces.dim_theta_v(grid.p))?;
    Ok((rates(grid, Marker::Lm, theta_w), rates(grid, Marker::Hs, theta_v)))
}

/// Full log-likelihood at arbitrary parameter values, with each `Lambda_0q`
/// a step function (absolutely continuous parts contribute nothing to the
/// event terms and are not representable here).
#[allow(clippy::too_many_arguments)]
pub fn full_loglik(
    grid: &EventGrid,
    rho: &dyn RhoFamily,
    alpha: &[f64],
    theta_r: &[f64],
    lambda: &[StepFunction],
    eta: &DMatrix<f64>,
    xi: &DMatrix<f64>,
    theta_w: &[f64],
    theta_v: &[f64],
) -> Result<f64> {
    let qn = grid.spaces.q();
    check_len("alpha", alpha.len(), qn)?;
    check_len("lambda", lambda.len(), qn)?;
    check_len("theta_R", theta_r.len(), grid.spaces.dim_theta_r(grid.p))?;
    let mut l = 0.0;
    for q in 0..qn {
        check_alpha(alpha[q])?;
        let wt = r_weights(grid, rho, q, alpha[q], theta_r);
        let jt = lambda[q].jump_times();
        let js = lambda[q].jump_sizes();
        for (&t, &dl) in jt.iter().zip(js) {
            l -= r_risk_set(grid, q, t, &wt).s0 * dl;
        }
        for g in &grid.rcr_groups[q] {
            let k = jt.partition_point(|&t| t < g.age - tol(g.age));
            let dl = if k < jt.len() && (jt[k] - g.age).abs() <= tol(g.age) { js[k] } else { 0.0 };
            for &s in &g.segments {
                l += dl.ln() + wt.w[s].ln();
            }
        }
    }
    for (m, gen, theta) in [(Marker::Lm, eta, theta_w), (Marker::Hs, xi, theta_v)] {
        check_len("theta", theta.len(), m.dim(grid))?;
        let ex = exposures(grid, m, theta);
        let ns = m.n_states(grid);
        for a in 0..ns {
            for b in 0..ns {
                if a != b {
                    l -= gen[(a, b)] * ex[a].s0;
                }
            }
        }
        for s in &grid.segments {
            if let Some((a, b)) = m.transition(s) {
                l += gen[(a, b)].ln() + dot(m.row(s), theta);
            }
        }
    }
    Ok(l)
}
