#![allow(dead_code)]

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::DMatrix;

use rcrjoint::model::LogCountPower;
use rcrjoint::model::{
    generator_from_rates, Baseline, EffectiveAgePolicy, EndReason, Event, EventKind, JointModel, ModelParams,
    StateSpaces, UnitHistory,
};
use rcrjoint::semiparam::{
    breslow_lambda, build_grid, eta_xi_given_theta, fit_grid, full_loglik, EventGrid, FitOptions, ProfileValue,
};
use rcrjoint::simulate::{
    simulate_cohort_with, CensoringLaw, Cohort, CovariateDist, Generator, InitialLaw, Overflow, Scenario,
};

pub fn unit(x: &[f64], lm: usize, hs: usize, events: &[(f64, EventKind)], end: f64, absorbed: bool) -> UnitHistory {
    UnitHistory {
        covariates: x.to_vec(),
        initial_lm: lm,
        initial_hs: hs,
        events: events.iter().map(|&(time, kind)| Event { time, kind }).collect(),
        end_time: end,
        end_reason: if absorbed { EndReason::Absorbed } else { EndReason::Censored },
    }
}

/// The illustration with short follow-up, so that cohorts of a few units
/// stay small.
pub fn short_illustration(mean_tau: f64) -> Scenario {
    let mut sc = Scenario::illustration().with_ds(0.005).with_overflow(Overflow::Clip);
    sc.censoring = CensoringLaw::Exponential { mean: mean_tau };
    sc
}

pub fn illustration_cohort(seed: u64, n: usize, mean_tau: f64) -> Cohort {
    simulate_cohort_with(&short_illustration(mean_tau), n, seed, Generator::Grid).unwrap()
}

/// One Weibull risk, two marker states, health states {1, 2} with 1
/// absorbing, one normal covariate. `theta^R = (beta_R1, kappa_R1)`.
pub fn one_risk_scenario() -> Scenario {
    let spaces = StateSpaces::numbered(2, 2, &[0], 1).unwrap();
    let params = ModelParams {
        baseline: vec![Baseline::Weibull { shape: 1.5, scale: 0.6 }],
        alpha: vec![1.5],
        eta: generator_from_rates(&[vec![0.0, 0.6], vec![0.6, 0.0]]),
        xi: generator_from_rates(&[vec![0.0, 0.0], vec![0.3, 0.0]]),
        theta_r: vec![0.5, -0.5],
        theta_w: vec![0.3, 0.2],
        theta_v: vec![0.3, -0.3, 0.1],
    };
    let model = JointModel::new(spaces, params, EffectiveAgePolicy::PerfectRepairOwnType, 1).unwrap();
    let sc = Scenario::new(
        model,
        vec![CovariateDist::Normal { mean: 0.0, sd: 1.0 }],
        CensoringLaw::Fixed(1.2),
        InitialLaw::Uniform,
    )
    .unwrap();
    sc.with_ds(0.002)
}

pub fn rcr_events(c: &Cohort) -> usize {
    c.units.iter().flat_map(|u| &u.events).filter(|e| matches!(e.kind, EventKind::Rcr(_))).count()
}

/// `|a - b| <= tol * max(1, scale)`.
pub fn close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * scale.max(1.0)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Time of the first event of any kind, or the end of follow-up.
pub fn first_sojourn(u: &UnitHistory) -> f64 {
    u.events.first().map_or(u.end_time, |e| e.time)
}

/// Largest relative discrepancy between the analytic score and central
/// differences of the log-likelihood, and between the information and
/// central differences of the negated score. Relative to `max(1, |analytic|)`.
pub fn fd_error(f: impl Fn(&[f64]) -> ProfileValue, x: &[f64]) -> f64 {
    let v = f(x);
    let mut worst = 0.0f64;
    let mut note = |a: f64, b: f64| worst = worst.max((a - b).abs() / a.abs().max(1.0));
    for j in 0..x.len() {
        let h = 1e-5 * x[j].abs().max(1.0);
        let mut up = x.to_vec();
        let mut dn = x.to_vec();
        up[j] += h;
        dn[j] -= h;
        let (fu, fl) = (f(&up), f(&dn));
        note(v.score[j], (fu.loglik - fl.loglik) / (2.0 * h));
        for i in 0..x.len() {
            note(v.info[(i, j)], -(fu.score[i] - fl.score[i]) / (2.0 * h));
        }
    }
    worst
}

#[derive(Clone)]
struct Profiled<'a> {
    grid: &'a EventGrid,
    eta: DMatrix<f64>,
    xi: DMatrix<f64>,
}

impl CostFunction for Profiled<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    // (log alpha, theta^R), with Lambda replaced by its Breslow maximizer
    fn cost(&self, x: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        let rho = LogCountPower::natural();
        let alpha = [x[0].exp()];
        let lam = breslow_lambda(self.grid, &rho, 0, alpha[0], &x[1..], None)?;
        let l = full_loglik(self.grid, &rho, &alpha, &x[1..], &[lam], &self.eta, &self.xi, &[0.0; 2], &[0.0; 3])?;
        Ok(-l)
    }
}

fn nelder_mead(p: &Profiled, start: &[f64], step: f64) -> Vec<f64> {
    let mut simplex = vec![start.to_vec()];
    for j in 0..start.len() {
        let mut v = start.to_vec();
        v[j] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-15).unwrap();
    let res = Executor::new(p.clone(), solver).configure(|s| s.max_iters(20_000)).run().unwrap();
    res.state().get_best_param().unwrap().clone()
}

/// `(alpha, beta_R1, kappa_R1)` maximizing the full likelihood of a
/// `one_risk_scenario` grid by Nelder-Mead, with Lambda profiled out.
pub fn brute_force_rcr(grid: &EventGrid) -> [f64; 3] {
    let (eta, xi) = eta_xi_given_theta(grid, &[0.0; 2], &[0.0; 3]).unwrap();
    let p = Profiled { grid, eta, xi };
    let x = nelder_mead(&p, &[0.0, 0.0, 0.0], 0.5);
    let x = nelder_mead(&p, &x, 0.01);
    [x[0].exp(), x[1], x[2]]
}

pub struct TinyCase {
    pub seed: u64,
    pub grid: EventGrid,
    /// `(alpha, beta_R1, kappa_R1)` from the profile Newton fit.
    pub newton: [f64; 3],
}

/// Cohorts of 4 to 6 units with 5 to 10 recurrent events whose RCR profile
/// fit converges to a finite point.
pub fn tiny_cases(count: usize) -> Vec<TinyCase> {
    let sc = one_risk_scenario();
    let own = EffectiveAgePolicy::PerfectRepairOwnType;
    let mut opts = FitOptions::default();
    opts.newton.tol = 1e-11;
    let mut out = vec![];
    for seed in 0..1000u64 {
        let c = simulate_cohort_with(&sc, 4 + (seed % 3) as usize, seed, Generator::Grid).unwrap();
        if !(5..=10).contains(&rcr_events(&c)) {
            continue;
        }
        let grid = build_grid(&c, sc.spaces(), own).unwrap();
        let Ok(fit) = fit_grid(&grid, &opts) else { continue };
        let b = &fit.blocks[0];
        let bounded = fit.alpha[0] > 0.05 && fit.alpha[0] < 20.0 && fit.theta_r.iter().all(|t| t.abs() < 8.0);
        if b.converged && b.dropped.is_empty() && bounded {
            out.push(TinyCase { seed, grid, newton: [fit.alpha[0], fit.theta_r[0], fit.theta_r[1]] });
            if out.len() == count {
                break;
            }
        }
    }
    out
}
