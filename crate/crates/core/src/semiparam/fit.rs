use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::grid::{build_grid, EventGrid};
use super::newton::{newton_raphson, NewtonOptions, NewtonOutcome};
use super::profile::{exposures, profile_r, profile_v, profile_w, r_groups, transition_counts, Marker, ProfileValue};
use crate::error::{Error, Result};
use crate::model::{EffectiveAgePolicy, LogCountPower, RhoFamily, StateSpaces, StepFunction};
use crate::parametric::Estimate;
use crate::simulate::Cohort;

pub const DEFAULT_LAMBDA_TIMES: [f64; 4] = [0.3, 0.6, 0.9, 1.2];

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub rho: Arc<dyn RhoFamily>,
    /// Use only data observed over `[0, s_star]`.
    pub s_star: Option<f64>,
    /// Use only recurrent events at effective ages `<= t_star` in the RCR profile.
    pub t_star: Option<f64>,
    /// Ages at which `Lambda_0q` and its standard errors are reported.
    pub lambda_times: Vec<f64>,
    pub newton: NewtonOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            rho: Arc::new(LogCountPower::natural()),
            s_star: None,
            t_star: None,
            lambda_times: DEFAULT_LAMBDA_TIMES.to_vec(),
            newton: NewtonOptions::default(),
        }
    }
}

/// Optimizer report for one of the three profile likelihoods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    pub block: String,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub loglik: f64,
    /// Smallest eigenvalue of the observed information at the optimum.
    pub min_info_eigenvalue: Option<f64>,
    /// Parameters held at their no-effect values for lack of events.
    pub dropped: Vec<String>,
}

/// A transition rate with its plug-in standard error (accounting for the
/// estimated regression coefficients) and the plain occurrence-exposure one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub name: String,
    pub value: f64,
    pub se: Option<f64>,
    pub se_naive: Option<f64>,
}

/// `Lambda_0q(t)` with the first-term and the full plug-in standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPoint {
    pub risk: usize,
    pub t: f64,
    pub value: f64,
    pub se_naive: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub alpha: Vec<f64>,
    pub theta_r: Vec<f64>,
    pub theta_w: Vec<f64>,
    pub theta_v: Vec<f64>,
    pub lambda: Vec<StepFunction>,
    pub eta: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    /// Finite-dimensional parameters: `alpha_q`, then `theta^R`, `theta^W`, `theta^V`.
    pub estimates: Vec<Estimate>,
    pub eta_estimates: Vec<RateEstimate>,
    pub xi_estimates: Vec<RateEstimate>,
    pub lambda_points: Vec<LambdaPoint>,
    pub blocks: Vec<BlockDiagnostics>,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.blocks.iter().all(|b| b.converged)
    }

    pub fn estimate(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.name == name)
    }
}

fn sub(v: &ProfileValue, idx: &[usize]) -> ProfileValue {
    ProfileValue {
        loglik: v.loglik,
        score: DVector::from_iterator(idx.len(), idx.iter().map(|&i| v.score[i])),
        info: DMatrix::from_fn(idx.len(), idx.len(), |a, b| v.info[(idx[a], idx[b])]),
    }
}

fn invert(info: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if info.nrows() == 0 {
        return Some(info.clone());
    }
    info.clone().cholesky().map(|c| c.inverse()).or_else(|| info.clone().try_inverse())
}

fn min_eigen(info: &DMatrix<f64>) -> Option<f64> {
    (info.nrows() > 0).then(|| {
        let sym = (info + info.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    })
}

struct Block {
    /// Full-length parameter vector with maximizers in the free coordinates.
    x: Vec<f64>,
    free: Vec<usize>,
    cov: Option<DMatrix<f64>>,
    diag: BlockDiagnostics,
}

impl Block {
    fn se(&self, i: usize) -> Option<f64> {
        let k = self.free.iter().position(|&f| f == i)?;
        let c = self.cov.as_ref()?;
        (c[(k, k)] >= 0.0).then(|| c[(k, k)].sqrt())
    }
}

/// Maximizes `f` over the coordinates in `free`, holding the rest of `start`.
fn optimize<F>(
    name: &str,
    f: F,
    start: Vec<f64>,
    free: Vec<usize>,
    positive: &[bool],
    names: &[String],
    opts: &NewtonOptions,
) -> Result<Block>
where
    F: Fn(&[f64]) -> Result<ProfileValue>,
{
    let dropped = (0..start.len()).filter(|i| !free.contains(i)).map(|i| names[i].clone()).collect();
    let embed = |y: &[f64]| {
        let mut x = start.clone();
        for (&i, &v) in free.iter().zip(y) {
            x[i] = v;
        }
        x
    };
    let init: Vec<f64> = free.iter().map(|&i| start[i]).collect();
    let pos: Vec<bool> = free.iter().map(|&i| positive[i]).collect();
    let NewtonOutcome { x, value, iterations, converged, gradient_norm } =
        newton_raphson(|y| f(&embed(y)).map(|v| sub(&v, &free)), &init, &pos, opts).map_err(|e| match e {
            Error::Numerical(m) => Error::Numerical(format!("{name} profile: {m}")),
            other => other,
        })?;
    let cov = invert(&value.info);
    Ok(Block {
        x: embed(&x),
        diag: BlockDiagnostics {
            block: name.into(),
            iterations,
            converged,
            gradient_norm,
            loglik: value.loglik,
            min_info_eigenvalue: min_eigen(&value.info),
            dropped,
        },
        free,
        cov,
    })
}

fn rate_estimates(
    grid: &EventGrid,
    m: Marker,
    theta: &Block,
    labels: &[String],
    sym: &str,
) -> (Vec<Vec<f64>>, Vec<RateEstimate>) {
    let ex = exposures(grid, m, &theta.x);
    let n = transition_counts(grid, m);
    let ns = n.len();
    let mut g = vec![vec![0.0; ns]; ns];
    let mut est = Vec::new();
    for a in 0..ns {
        for b in 0..ns {
            if a == b || (matches!(m, Marker::Hs) && grid.spaces.is_absorbing(a)) {
                continue;
            }
            let name = format!("{sym}({},{})", labels[a], labels[b]);
            if n[a][b] == 0 {
                est.push(RateEstimate { name, value: 0.0, se: None, se_naive: None });
                continue;
            }
            let s0 = ex[a].s0;
            let v = n[a][b] as f64 / s0;
            g[a][b] = v;
            g[a][a] -= v;
            let naive = v / s0;
            let extra = match &theta.cov {
                Some(c) => {
                    let s1 = DVector::from_iterator(theta.free.len(), theta.free.iter().map(|&i| ex[a].s1[i]));
                    (v / s0).powi(2) * (s1.transpose() * c * &s1)[(0, 0)]
                }
                None => f64::NAN,
            };
            est.push(RateEstimate {
                name,
                value: v,
                se: extra.is_finite().then(|| (naive + extra).sqrt()),
                se_naive: Some(naive.sqrt()),
            });
        }
    }
    (g, est)
}

/// Semi-parametric fit: maximizes the three profile likelihoods separately and
/// plugs the maximizers into the Breslow-type and occurrence-exposure
/// estimators.
pub fn fit_semiparametric(
    cohort: &Cohort,
    spaces: &StateSpaces,
    age_policy: EffectiveAgePolicy,
    opts: &FitOptions,
) -> Result<FitResult> {
    if opts.lambda_times.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::Config("lambda times must be non-negative".into()));
    }
    let mut grid = build_grid(cohort, spaces, age_policy)?;
    if let Some(s) = opts.s_star {
        if !(s > 0.0) {
            return Err(Error::Config(format!("s* must be positive, got {s}")));
        }
        grid = grid.truncated(s);
    }
    fit_grid(&grid, opts)
}

/// Semi-parametric fit on a prebuilt grid.
pub fn fit_grid(grid: &EventGrid, opts: &FitOptions) -> Result<FitResult> {
    let sp = &grid.spaces;
    let qn = sp.q();
    let p = grid.p;
    let rho = opts.rho.as_ref();
    let [names_r, names_w, names_v] = sp.theta_names(p);
    let dr = names_r.len();

    // RCR block over (alpha_1..alpha_Q, theta^R)
    let t_star = opts.t_star;
    let has_events: Vec<bool> =
        (0..qn).map(|q| grid.rcr_groups[q].iter().any(|g| t_star.is_none_or(|ts| g.age <= ts))).collect();
    let mut free_r: Vec<usize> = (0..qn).filter(|&q| has_events[q]).collect();
    if !free_r.is_empty() {
        free_r.extend(qn..qn + dr);
    }
    let mut all_r: Vec<String> = (1..=qn).map(|q| format!("alpha_{q}")).collect();
    all_r.extend(names_r.iter().cloned());
    let positive_r: Vec<bool> = (0..qn + dr).map(|i| i < qn).collect();
    let start_r: Vec<f64> = (0..qn + dr).map(|i| if i < qn { 1.0 } else { 0.0 }).collect();
    let r = optimize(
        "RCR",
        |x| profile_r(grid, rho, &x[..qn], &x[qn..], t_star),
        start_r,
        free_r,
        &positive_r,
        &all_r,
        &opts.newton,
    )?;
    let alpha = r.x[..qn].to_vec();
    let theta_r = r.x[qn..].to_vec();

    // marker and health-status blocks
    let marker_block = |m: Marker, name: &str, names: &[String]| -> Result<Block> {
        let d = names.len();
        let any = transition_counts(grid, m).iter().flatten().any(|&c| c > 0);
        let free = if any { (0..d).collect() } else { vec![] };
        let f = |x: &[f64]| match m {
            Marker::Lm => profile_w(grid, x),
            Marker::Hs => profile_v(grid, x),
        };
        optimize(name, f, vec![0.0; d], free, &vec![false; d], names, &opts.newton)
    };
    let w = marker_block(Marker::Lm, "LM", &names_w)?;
    let v = marker_block(Marker::Hs, "HS", &names_v)?;

    let mut estimates = Vec::new();
    for (i, n) in all_r.iter().enumerate() {
        estimates.push(Estimate::new(n.clone(), r.x[i], r.se(i)));
    }
    for (b, names) in [(&w, &names_w), (&v, &names_v)] {
        for (i, n) in names.iter().enumerate() {
            estimates.push(Estimate::new(n.clone(), b.x[i], b.se(i)));
        }
    }

    // baselines and their pointwise standard errors
    let mut lambda = Vec::with_capacity(qn);
    let mut lambda_points = Vec::new();
    for q in 0..qn {
        let groups = r_groups(grid, rho, q, alpha[q], &theta_r, t_star);
        let (times, sizes): (Vec<f64>, Vec<f64>) =
            groups.iter().map(|(t, d, rs)| (*t, if rs.s0 > 0.0 { *d as f64 / rs.s0 } else { 0.0 })).unzip();
        let step = StepFunction::new(times, sizes)?;
        // coordinates of (alpha_q, theta^R) among the free RCR parameters
        let zmap: Vec<Option<usize>> =
            std::iter::once(q).chain(qn..qn + dr).map(|i| r.free.iter().position(|&f| f == i)).collect();
        for &t in &opts.lambda_times {
            let mut naive = 0.0;
            let mut b = DVector::zeros(r.free.len());
            for (_, d, rs) in groups.iter().take_while(|(age, _, _)| *age <= t) {
                let d = *d as f64;
                naive += d / (rs.s0 * rs.s0);
                for (z, k) in zmap.iter().enumerate() {
                    if let Some(k) = k {
                        b[*k] -= d * rs.s1[z] / (rs.s0 * rs.s0);
                    }
                }
            }
            let se = r.cov.as_ref().map(|c| (naive + (b.transpose() * c * &b)[(0, 0)]).max(0.0).sqrt());
            lambda_points.push(LambdaPoint { risk: q, t, value: step.eval(t), se_naive: naive.sqrt(), se });
        }
        lambda.push(step);
    }

    let (eta, eta_estimates) = rate_estimates(grid, Marker::Lm, &w, sp.lm_labels(), "eta");
    let (xi, xi_estimates) = rate_estimates(grid, Marker::Hs, &v, sp.hs_labels(), "xi");
    Ok(FitResult {
        alpha,
        theta_r,
        theta_w: w.x.clone(),
        theta_v: v.x.clone(),
        lambda,
        eta,
        xi,
        estimates,
        eta_estimates,
        xi_estimates,
        lambda_points,
        blocks: vec![r.diag, w.diag, v.diag],
    })
}
