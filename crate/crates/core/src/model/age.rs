use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::history::{EventKind, UnitHistory};
use crate::error::{Error, Result};

/// How interventions after events reset the age fed to the baseline hazard.
///
/// Every built-in policy is piecewise linear with slope 1 between resets and
/// left-continuous: the age at `s` only sees events strictly before `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectiveAgePolicy {
    /// Age is calendar time.
    MinimalRepair,
    /// Reset at every event of any kind (RCR, LM or HS).
    PerfectRepairAnyEvent,
    /// Reset at every recurrent event of any type.
    PerfectRepairAnyRcr,
    /// Reset only at recurrent events of the same type (backward recurrence time).
    PerfectRepairOwnType,
}

impl EffectiveAgePolicy {
    pub const ALL: [EffectiveAgePolicy; 4] = [
        EffectiveAgePolicy::MinimalRepair,
        EffectiveAgePolicy::PerfectRepairAnyEvent,
        EffectiveAgePolicy::PerfectRepairAnyRcr,
        EffectiveAgePolicy::PerfectRepairOwnType,
    ];

    /// Whether an event of `kind` resets the type-`q` age.
    pub fn resets(&self, q: usize, kind: &EventKind) -> bool {
        match self {
            Self::MinimalRepair => false,
            Self::PerfectRepairAnyEvent => true,
            Self::PerfectRepairAnyRcr => matches!(kind, EventKind::Rcr(_)),
            Self::PerfectRepairOwnType => *kind == EventKind::Rcr(q),
        }
    }

    /// Derivative of the age between resets.
    pub fn slope(&self) -> f64 {
        1.0
    }

    /// Effective age of type `q` at time `s > 0`.
    pub fn age(&self, unit: &UnitHistory, q: usize, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("effective age requires s > 0, got {s}")));
        }
        let last_reset = unit
            .events
            .iter()
            .take_while(|e| e.time < s)
            .filter(|e| self.resets(q, &e.kind))
            .map(|e| e.time)
            .last()
            .unwrap_or(0.0);
        Ok(s - last_reset)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::MinimalRepair => "minimal-repair",
            Self::PerfectRepairAnyEvent => "perfect-any-event",
            Self::PerfectRepairAnyRcr => "perfect-any-rcr",
            Self::PerfectRepairOwnType => "own-type",
        }
    }
}

impl fmt::Display for EffectiveAgePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EffectiveAgePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| Error::Config(format!("unknown age policy {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::history::{EndReason, Event};

    fn unit() -> UnitHistory {
        UnitHistory {
            covariates: vec![],
            initial_lm: 0,
            initial_hs: 1,
            events: vec![
                Event { time: 1.0, kind: EventKind::Rcr(0) },
                Event { time: 1.2, kind: EventKind::Lm { from: 0, to: 1 } },
                Event { time: 1.5, kind: EventKind::Rcr(0) },
            ],
            end_time: 2.0,
            end_reason: EndReason::Censored,
        }
    }

    #[test]
    fn minimal_repair_is_identity() {
        let a = EffectiveAgePolicy::MinimalRepair.age(&unit(), 0, 1.7).unwrap();
        assert_eq!(a, 1.7);
    }

    #[test]
    fn own_type_is_left_continuous() {
        let p = EffectiveAgePolicy::PerfectRepairOwnType;
        assert!((p.age(&unit(), 0, 1.5).unwrap() - 0.5).abs() < 1e-12);
        assert!((p.age(&unit(), 0, 1.8).unwrap() - 0.3).abs() < 1e-12);
        // type 1 has no events
        assert_eq!(p.age(&unit(), 1, 1.8).unwrap(), 1.8);
    }

    #[test]
    fn any_event_resets_on_marker_moves() {
        let p = EffectiveAgePolicy::PerfectRepairAnyEvent;
        assert!((p.age(&unit(), 1, 1.4).unwrap() - 0.2).abs() < 1e-12);
        let p = EffectiveAgePolicy::PerfectRepairAnyRcr;
        assert!((p.age(&unit(), 1, 1.4).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_time() {
        assert!(EffectiveAgePolicy::MinimalRepair.age(&unit(), 0, 0.0).is_err());
    }

    #[test]
    fn names_round_trip() {
        for p in EffectiveAgePolicy::ALL {
            assert_eq!(p.name().parse::<EffectiveAgePolicy>().unwrap(), p);
        }
    }
}
