use serde::{Deserialize, Serialize};

use super::states::StateSpaces;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    /// Recurrent event of the given type (0-based).
    Rcr(usize),
    /// Marker transition `from -> to`.
    Lm { from: usize, to: usize },
    /// Health-status transition `from -> to`.
    Hs { from: usize, to: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndReason {
    Censored,
    Absorbed,
}

/// Everything observed for one unit over `[0, end_time]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitHistory {
    pub covariates: Vec<f64>,
    pub initial_lm: usize,
    pub initial_hs: usize,
    /// All events of the unit, merged and time-ordered.
    pub events: Vec<Event>,
    pub end_time: f64,
    pub end_reason: EndReason,
}

/// State of a unit just before time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshot {
    pub time: f64,
    pub lm_state: usize,
    pub hs_state: usize,
    pub rcr_counts: Vec<u32>,
    pub at_risk: bool,
}

impl UnitHistory {
    /// Occurrence times of recurrent events of type `q`.
    pub fn rcr_times(&self, q: usize) -> Vec<f64> {
        self.events.iter().filter(|e| e.kind == EventKind::Rcr(q)).map(|e| e.time).collect()
    }

    pub fn lm_transitions(&self) -> impl Iterator<Item = (f64, usize, usize)> + '_ {
        self.events.iter().filter_map(|e| match e.kind {
            EventKind::Lm { from, to } => Some((e.time, from, to)),
            _ => None,
        })
    }

    pub fn hs_transitions(&self) -> impl Iterator<Item = (f64, usize, usize)> + '_ {
        self.events.iter().filter_map(|e| match e.kind {
            EventKind::Hs { from, to } => Some((e.time, from, to)),
            _ => None,
        })
    }

    /// Counts of recurrent events at the end of observation.
    pub fn rcr_totals(&self, q_count: usize) -> Vec<u32> {
        let mut n = vec![0u32; q_count];
        for e in &self.events {
            if let EventKind::Rcr(q) = e.kind {
                n[q] += 1;
            }
        }
        n
    }

    /// State of the unit at `s-`: events strictly before `s` are applied.
    pub fn snapshot(&self, q_count: usize, s: f64) -> StateSnapshot {
        let mut lm = self.initial_lm;
        let mut hs = self.initial_hs;
        let mut counts = vec![0u32; q_count];
        for e in self.events.iter().take_while(|e| e.time < s) {
            match e.kind {
                EventKind::Rcr(q) => counts[q] += 1,
                EventKind::Lm { to, .. } => lm = to,
                EventKind::Hs { to, .. } => hs = to,
            }
        }
        StateSnapshot { time: s, lm_state: lm, hs_state: hs, rcr_counts: counts, at_risk: s <= self.end_time }
    }

    /// LM and HS states in force at time `s` (right-continuous paths).
    pub fn states_at(&self, s: f64) -> (usize, usize) {
        let mut lm = self.initial_lm;
        let mut hs = self.initial_hs;
        for e in self.events.iter().take_while(|e| e.time <= s) {
            match e.kind {
                EventKind::Lm { to, .. } => lm = to,
                EventKind::Hs { to, .. } => hs = to,
                EventKind::Rcr(_) => {}
            }
        }
        (lm, hs)
    }

    /// Recurrent event counts over `[0, s]`.
    pub fn counts_at(&self, q_count: usize, s: f64) -> Vec<u32> {
        let mut n = vec![0u32; q_count];
        for e in self.events.iter().take_while(|e| e.time <= s) {
            if let EventKind::Rcr(q) = e.kind {
                n[q] += 1;
            }
        }
        n
    }

    /// Checks the structural invariants of a history against the state spaces.
    pub fn validate(&self, spaces: &StateSpaces) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if !(self.end_time.is_finite() && self.end_time > 0.0) {
            return fail(format!("end time {} must be finite and positive", self.end_time));
        }
        if self.initial_lm >= spaces.n_lm() {
            return fail("initial LM state out of range".into());
        }
        if self.initial_hs >= spaces.n_hs() || spaces.is_absorbing(self.initial_hs) {
            return fail("initial HS state must be a transient state".into());
        }
        let mut lm = self.initial_lm;
        let mut hs = self.initial_hs;
        let mut prev = 0.0;
        for (k, e) in self.events.iter().enumerate() {
            if !(e.time > prev) {
                return fail(format!("event {k} at {} is not after {}", e.time, prev));
            }
            if e.time > self.end_time {
                return fail(format!("event {k} at {} is after the end time {}", e.time, self.end_time));
            }
            if spaces.is_absorbing(hs) {
                return fail(format!("event {k} occurs after absorption"));
            }
            match e.kind {
                EventKind::Rcr(q) if q >= spaces.q() => {
                    return fail(format!("recurrent event type {} exceeds Q={}", q + 1, spaces.q()))
                }
                EventKind::Rcr(_) => {}
                EventKind::Lm { from, to } => {
                    if from != lm || to >= spaces.n_lm() || to == from {
                        return fail(format!("LM transition {from}->{to} at {} breaks the chain", e.time));
                    }
                    lm = to;
                }
                EventKind::Hs { from, to } => {
                    if from != hs || to >= spaces.n_hs() || to == from {
                        return fail(format!("HS transition {from}->{to} at {} breaks the chain", e.time));
                    }
                    hs = to;
                }
            }
            prev = e.time;
        }
        match self.end_reason {
            EndReason::Absorbed => {
                let last = self.events.last();
                let ok = matches!(last, Some(e) if matches!(e.kind, EventKind::Hs { .. }) && e.time == self.end_time)
                    && spaces.is_absorbing(hs);
                if !ok {
                    return fail(
                        "absorbed unit must end with an HS transition into an absorbing state at its end time".into(),
                    );
                }
            }
            EndReason::Censored => {
                if spaces.is_absorbing(hs) {
                    return fail("censored unit ends in an absorbing state".into());
                }
            }
        }
        Ok(())
    }
}
