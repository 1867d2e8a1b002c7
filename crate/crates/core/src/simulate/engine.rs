use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::scenario::{Overflow, Scenario};
use crate::error::{Error, Result};
use crate::model::intensity::Predictors;
use crate::model::{Channel, EndReason, Event, EventKind, UnitHistory};

/// A simulated or parsed sample of unit histories.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub units: Vec<UnitHistory>,
    /// Fingerprint of the generating scenario (empty for external data).
    pub fingerprint: String,
}

impl Cohort {
    pub fn new(units: Vec<UnitHistory>) -> Self {
        Self { units, fingerprint: String::new() }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }
}

/// Generator for unit `j` of a cohort drawn with `seed`: every unit owns its
/// own ChaCha stream, so the schedule of workers cannot change the output.
pub fn unit_rng(seed: u64, j: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j);
    rng
}

/// Seed of replication `r` of a study with `master` seed.
pub fn derive_seed(master: u64, r: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(r.wrapping_add(1 << 63));
    rng.next_u64()
}

struct WalkState {
    init: (usize, usize),
    lm: usize,
    hs: usize,
    counts: Vec<u32>,
    last_reset: Vec<f64>,
    events: Vec<Event>,
}

impl WalkState {
    fn apply(&mut self, scenario: &Scenario, time: f64, kind: EventKind) {
        match kind {
            EventKind::Rcr(q) => self.counts[q] += 1,
            EventKind::Lm { to, .. } => self.lm = to,
            EventKind::Hs { to, .. } => self.hs = to,
        }
        let policy = scenario.model.age_policy;
        for (q, r) in self.last_reset.iter_mut().enumerate() {
            if policy.resets(q, &kind) {
                *r = time;
            }
        }
        self.events.push(Event { time, kind });
    }
}

fn start<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> (Vec<f64>, f64, WalkState) {
    let x = scenario.sample_covariates(rng);
    let tau = scenario.sample_tau(rng);
    let (lm, hs) = scenario.sample_initial(rng);
    let q = scenario.spaces().q();
    (x, tau, WalkState { init: (lm, hs), lm, hs, counts: vec![0; q], last_reset: vec![0.0; q], events: Vec::new() })
}

/// Bernoulli-grid generator.
///
/// On each interval `[s, s + h)` of the grid (`h = ds`, shorter in the final
/// interval) every channel fires independently with probability equal to its
/// intensity integrated over the interval with the state held at its value at
/// `s`. Several successes are resolved by a uniform draw among them. An event
/// is stamped at the right end of its interval. A probability of 1 or more is
/// an error unless the scenario asks for clipping. The walk stops at `tau`, at
/// absorption, or at `s_max` (recorded as censoring).
pub fn simulate_unit_grid<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<UnitHistory> {
    let (x, tau, mut st) = start(scenario, rng);
    let sp = scenario.spaces();
    let params = scenario.params();
    let rho = scenario.model.rho.as_ref();
    let end = tau.min(scenario.s_max);
    let ds = scenario.ds;
    let nq = sp.q();
    let nw = sp.n_lm();
    let nv = sp.n_hs();
    let mut fired: Vec<EventKind> = Vec::with_capacity(nq + nw + nv);
    let mut k: u64 = 0;
    loop {
        let s = k as f64 * ds;
        if s >= end {
            break;
        }
        let right = ((k + 1) as f64 * ds).min(end);
        let h = right - s;
        let pr = Predictors::compute(sp, params, &x, st.lm, st.hs, &st.counts);
        let (er, ew, ev) = (pr.r.exp(), pr.w.exp(), pr.v.exp());
        fired.clear();
        let clip = scenario.overflow == Overflow::Clip;
        let mut check = |p: f64, ch: Channel| -> Result<bool> {
            if !(p < 1.0) && !(clip && p.is_finite()) {
                return Err(Error::Config(format!(
                    "probability {p} of channel {ch} on [{s}, {right}) is not below 1; reduce ds"
                )));
            }
            Ok(p > 0.0 && rng.random::<f64>() < p)
        };
        for q in 0..nq {
            let a0 = s - st.last_reset[q];
            let dl = params.baseline[q].cumulative(a0 + h) - params.baseline[q].cumulative(a0);
            let p = dl * rho.rho(q, &st.counts, params.alpha[q]) * er;
            if check(p, Channel::Rcr(q))? {
                fired.push(EventKind::Rcr(q));
            }
        }
        for to in (0..nw).filter(|&b| b != st.lm) {
            let p = params.eta[(st.lm, to)] * ew * h;
            if check(p, Channel::Lm(st.lm, to))? {
                fired.push(EventKind::Lm { from: st.lm, to });
            }
        }
        for to in (0..nv).filter(|&b| b != st.hs) {
            let p = params.xi[(st.hs, to)] * ev * h;
            if check(p, Channel::Hs(st.hs, to))? {
                fired.push(EventKind::Hs { from: st.hs, to });
            }
        }
        if !fired.is_empty() {
            let kind = fired[if fired.len() == 1 { 0 } else { rng.random_range(0..fired.len()) }];
            st.apply(scenario, right, kind);
            if sp.is_absorbing(st.hs) {
                return Ok(UnitHistory {
                    covariates: x,
                    initial_lm: st.init.0,
                    initial_hs: st.init.1,
                    events: st.events,
                    end_time: right,
                    end_reason: EndReason::Absorbed,
                });
            }
        }
        k += 1;
    }
    Ok(UnitHistory {
        covariates: x,
        initial_lm: st.init.0,
        initial_hs: st.init.1,
        events: st.events,
        end_time: end,
        end_reason: EndReason::Censored,
    })
}

/// Exact generator for the Poisson/Markov special case: exponential sojourns
/// with rate `C = sum_q lambda_q - eta(w, w) - xi(v, v)` and a multinomial mark.
pub fn simulate_unit_exact_special<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<UnitHistory> {
    let params = scenario.params();
    if !params.is_special_case() {
        return Err(Error::Config(
            "exact simulation needs constant baselines, unit rho and zero regression coefficients".into(),
        ));
    }
    let sp = scenario.spaces();
    let lambda: Vec<f64> = params.baseline.iter().map(|b| b.constant_rate().expect("special case")).collect();
    let lam_tot: f64 = lambda.iter().sum();
    let (x, tau, mut st) = start(scenario, rng);
    let end = tau.min(scenario.s_max);
    let mut s = 0.0;
    loop {
        let c = lam_tot - params.eta[(st.lm, st.lm)] - params.xi[(st.hs, st.hs)];
        let next = if c > 0.0 { s + Exp::new(c).expect("positive rate").sample(rng) } else { f64::INFINITY };
        if next >= end {
            break;
        }
        s = next;
        let mut u = rng.random::<f64>() * c;
        let mut kind = None;
        for (q, &l) in lambda.iter().enumerate() {
            if u < l {
                kind = Some(EventKind::Rcr(q));
                break;
            }
            u -= l;
        }
        if kind.is_none() {
            for to in (0..sp.n_lm()).filter(|&b| b != st.lm) {
                let r = params.eta[(st.lm, to)];
                if u < r {
                    kind = Some(EventKind::Lm { from: st.lm, to });
                    break;
                }
                u -= r;
            }
        }
        if kind.is_none() {
            // last positive HS rate absorbs any rounding residue
            let to = (0..sp.n_hs())
                .filter(|&b| b != st.hs)
                .find(|&b| {
                    let r = params.xi[(st.hs, b)];
                    let hit = u < r;
                    u -= r;
                    hit
                })
                .or_else(|| (0..sp.n_hs()).rev().find(|&b| b != st.hs && params.xi[(st.hs, b)] > 0.0));
            kind = to.map(|to| EventKind::Hs { from: st.hs, to });
        }
        let Some(kind) = kind else { continue };
        st.apply(scenario, s, kind);
        if sp.is_absorbing(st.hs) {
            return Ok(UnitHistory {
                covariates: x,
                initial_lm: st.init.0,
                initial_hs: st.init.1,
                events: st.events,
                end_time: s,
                end_reason: EndReason::Absorbed,
            });
        }
    }
    Ok(UnitHistory {
        covariates: x,
        initial_lm: st.init.0,
        initial_hs: st.init.1,
        events: st.events,
        end_time: end,
        end_reason: EndReason::Censored,
    })
}

/// Which generator a cohort is drawn with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Grid,
    ExactSpecial,
}

/// Draws `n` independent units with the scenario's seed.
pub fn simulate_cohort(scenario: &Scenario, n: usize) -> Result<Cohort> {
    simulate_cohort_with(scenario, n, scenario.seed, Generator::Grid)
}

/// Draws `n` units with an explicit seed and generator. Unit `j` uses stream `j`.
pub fn simulate_cohort_with(scenario: &Scenario, n: usize, seed: u64, generator: Generator) -> Result<Cohort> {
    if n == 0 {
        return Err(Error::Config("cohort size must be at least 1".into()));
    }
    scenario.validate()?;
    let units = (0..n as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = unit_rng(seed, j);
            match generator {
                Generator::Grid => simulate_unit_grid(scenario, &mut rng),
                Generator::ExactSpecial => simulate_unit_exact_special(scenario, &mut rng),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut h = Sha256::new();
    h.update(scenario.fingerprint().as_bytes());
    h.update(seed.to_le_bytes());
    h.update((n as u64).to_le_bytes());
    h.update([generator as u8]);
    Ok(Cohort { units, fingerprint: hex::encode(h.finalize()) })
}
