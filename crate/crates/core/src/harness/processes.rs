use serde::Serialize;

use crate::model::{EventKind, StateSpaces, UnitHistory};
use crate::simulate::Cohort;

/// Mean and standard deviation of a sample; `sd` is `None` below two values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: Option<f64>,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Moments { mean: f64::NAN, sd: None };
        }
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Moments { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskStats {
    /// 1-based recurrent type.
    pub risk: usize,
    /// Events per unit.
    pub count: Moments,
    /// Total at-risk time divided by the total number of events of this risk.
    pub time_per_event: f64,
    /// Mean time of the first event among units that have one.
    pub first_event_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateStats {
    /// State index; `label` is its name in the state space.
    pub state: usize,
    pub label: String,
    /// Transitions into the state per unit.
    pub transitions_in: Moments,
    /// Visits per unit: transitions in plus an initial stay.
    pub visits: Moments,
    /// Time spent in the state per unit.
    pub occupation: Moments,
    /// Length of individual stays, censored stays included.
    pub sojourn: Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessSummary {
    pub units: usize,
    pub absorbed: usize,
    pub rcr: Vec<RiskStats>,
    /// Transient HS states only.
    pub hs: Vec<StateStats>,
    pub lm: Vec<StateStats>,
}

/// Stays `(state, start, end)` of a piecewise-constant path.
pub fn stays(initial: usize, jumps: impl Iterator<Item = (f64, usize)>, end: f64) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    let (mut cur, mut from) = (initial, 0.0);
    for (t, to) in jumps {
        out.push((cur, from, t));
        cur = to;
        from = t;
    }
    if end > from {
        out.push((cur, from, end));
    }
    out
}

fn lm_stays(u: &UnitHistory) -> Vec<(usize, f64, f64)> {
    stays(u.initial_lm, u.lm_transitions().map(|(t, _, to)| (t, to)), u.end_time)
}

fn hs_stays(u: &UnitHistory) -> Vec<(usize, f64, f64)> {
    stays(u.initial_hs, u.hs_transitions().map(|(t, _, to)| (t, to)), u.end_time)
}

fn state_stats(
    units: &[&UnitHistory],
    states: impl Iterator<Item = usize>,
    initial: impl Fn(&UnitHistory) -> usize,
    path: impl Fn(&UnitHistory) -> Vec<(usize, f64, f64)>,
    into: impl Fn(&EventKind) -> Option<usize>,
) -> Vec<StateStats> {
    states
        .map(|s| {
            let mut tin = Vec::with_capacity(units.len());
            let mut vis = Vec::with_capacity(units.len());
            let mut occ = Vec::with_capacity(units.len());
            let mut soj = Vec::new();
            for u in units {
                let n_in = u.events.iter().filter(|e| into(&e.kind) == Some(s)).count() as f64;
                tin.push(n_in);
                vis.push(n_in + (initial(u) == s) as u8 as f64);
                let mut o = 0.0;
                for (st, a, b) in path(u) {
                    if st == s {
                        o += b - a;
                        soj.push(b - a);
                    }
                }
                occ.push(o);
            }
            StateStats {
                state: s,
                label: String::new(),
                transitions_in: Moments::of(&tin),
                visits: Moments::of(&vis),
                occupation: Moments::of(&occ),
                sojourn: Moments::of(&soj),
            }
        })
        .collect()
}

/// Per-process descriptive statistics pooled over all units of all cohorts.
pub fn summarize_processes(cohorts: &[Cohort], spaces: &StateSpaces) -> ProcessSummary {
    let units: Vec<&UnitHistory> = cohorts.iter().flat_map(|c| &c.units).collect();
    let total_time: f64 = units.iter().map(|u| u.end_time).sum();
    let rcr = (0..spaces.q())
        .map(|q| {
            let counts: Vec<f64> = units.iter().map(|u| u.rcr_totals(spaces.q())[q] as f64).collect();
            let total: f64 = counts.iter().sum();
            let firsts: Vec<f64> = units.iter().filter_map(|u| u.rcr_times(q).first().copied()).collect();
            RiskStats {
                risk: q + 1,
                count: Moments::of(&counts),
                time_per_event: if total > 0.0 { total_time / total } else { f64::NAN },
                first_event_time: Moments::of(&firsts).mean,
            }
        })
        .collect();
    let mut hs = state_stats(
        &units,
        spaces.transient().iter().copied(),
        |u| u.initial_hs,
        hs_stays,
        |k| match k {
            EventKind::Hs { to, .. } => Some(*to),
            _ => None,
        },
    );
    let mut lm = state_stats(
        &units,
        0..spaces.n_lm(),
        |u| u.initial_lm,
        lm_stays,
        |k| match k {
            EventKind::Lm { to, .. } => Some(*to),
            _ => None,
        },
    );
    for h in &mut hs {
        h.label = spaces.hs_labels()[h.state].clone();
    }
    for l in &mut lm {
        l.label = spaces.lm_labels()[l.state].clone();
    }
    let absorbed = units.iter().filter(|u| u.end_reason == crate::model::EndReason::Absorbed).count();
    ProcessSummary { units: units.len(), absorbed, rcr, hs, lm }
}
