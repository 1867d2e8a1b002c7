use crate::error::{Error, Result};
use crate::model::{
    design_row_r, design_row_v, design_row_w, EffectiveAgePolicy, EventKind, StateSnapshot, StateSpaces,
};
use crate::simulate::Cohort;

/// Relative tolerance used when comparing effective ages computed along
/// different units.
pub const AGE_TOL: f64 = 1e-9;

pub(crate) fn tol(t: f64) -> f64 {
    AGE_TOL * t.abs().max(1.0)
}

/// `a < t <= b` up to rounding.
pub(crate) fn in_window(a: f64, b: f64, t: f64) -> bool {
    let e = tol(t);
    t > a + e && t <= b + e
}

/// Stretch `(start, end]` of one unit between consecutive own events, over
/// which every covariate process of the unit is constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub unit: usize,
    pub start: f64,
    pub end: f64,
    pub lm: usize,
    pub hs: usize,
    /// `N^R(s-)` inside the segment.
    pub counts: Vec<u32>,
    /// Last reset time of each type's effective age; the type-`q` age window is
    /// `(start - reset[q], end - reset[q]]`.
    pub reset: Vec<f64>,
    pub br: Vec<f64>,
    pub bw: Vec<f64>,
    pub bv: Vec<f64>,
    /// Event at `end` closing the segment.
    pub event: Option<EventKind>,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        !(self.end > self.start)
    }

    pub fn age_window(&self, q: usize) -> (f64, f64) {
        (self.start - self.reset[q], self.end - self.reset[q])
    }

    /// Effective age of type `q` at the closing event.
    pub fn event_age(&self, q: usize) -> f64 {
        self.end - self.reset[q]
    }
}

/// Type-`q` events sharing one effective age `T_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeGroup {
    pub age: f64,
    /// Segments closed by a type-`q` event at this age.
    pub segments: Vec<usize>,
}

/// Event grid and per-segment caches of a cohort.
#[derive(Debug, Clone)]
pub struct EventGrid {
    pub spaces: StateSpaces,
    pub age_policy: EffectiveAgePolicy,
    pub p: usize,
    pub n_units: usize,
    /// Distinct event times `S_1 < ... < S_K` over all units.
    pub calendar_times: Vec<f64>,
    pub segments: Vec<Segment>,
    /// Per type, the distinct effective ages at type-`q` events with the
    /// segments they close.
    pub rcr_groups: Vec<Vec<AgeGroup>>,
}

impl EventGrid {
    /// Distinct effective ages `T_l` carrying type-`q` events.
    pub fn age_times(&self, q: usize) -> Vec<f64> {
        self.rcr_groups[q].iter().map(|g| g.age).collect()
    }

    /// The grid of the data observed over `[0, s_star]`.
    pub fn truncated(&self, s_star: f64) -> EventGrid {
        let segments: Vec<Segment> = self
            .segments
            .iter()
            .filter(|s| s.start < s_star)
            .map(|s| {
                let mut s = s.clone();
                if s.end > s_star {
                    s.end = s_star;
                    s.event = None;
                }
                s
            })
            .collect();
        let calendar_times = self.calendar_times.iter().copied().filter(|&t| t <= s_star).collect();
        let rcr_groups = group_events(&segments, self.spaces.q());
        EventGrid { segments, calendar_times, rcr_groups, ..self.clone() }
    }
}

fn group_events(segments: &[Segment], q_count: usize) -> Vec<Vec<AgeGroup>> {
    (0..q_count)
        .map(|q| {
            let mut ev: Vec<(f64, usize)> = segments
                .iter()
                .enumerate()
                .filter(|(_, s)| s.event == Some(EventKind::Rcr(q)))
                .map(|(k, s)| (s.event_age(q), k))
                .collect();
            ev.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut groups: Vec<AgeGroup> = Vec::new();
            for (age, k) in ev {
                match groups.last_mut() {
                    Some(g) if age - g.age <= tol(g.age) => g.segments.push(k),
                    _ => groups.push(AgeGroup { age, segments: vec![k] }),
                }
            }
            groups
        })
        .collect()
}

/// Builds the event grid of a validated cohort.
pub fn build_grid(cohort: &Cohort, spaces: &StateSpaces, age_policy: EffectiveAgePolicy) -> Result<EventGrid> {
    if cohort.is_empty() {
        return Err(Error::Validation("cohort has no units".into()));
    }
    let p = cohort.units[0].covariates.len();
    let q_count = spaces.q();
    let mut segments = Vec::new();
    let mut calendar = Vec::new();
    for (i, u) in cohort.units.iter().enumerate() {
        u.validate(spaces).map_err(|e| Error::Validation(format!("unit {}: {e}", i + 1)))?;
        if u.covariates.len() != p {
            return Err(Error::Validation(format!(
                "unit {} has {} covariates, expected {p}",
                i + 1,
                u.covariates.len()
            )));
        }
        let mut lm = u.initial_lm;
        let mut hs = u.initial_hs;
        let mut counts = vec![0u32; q_count];
        let mut reset = vec![0.0; q_count];
        let mut start = 0.0;
        let mut push = |end: f64,
                        event: Option<EventKind>,
                        lm: usize,
                        hs: usize,
                        counts: &[u32],
                        reset: &[f64],
                        start: f64|
         -> Result<()> {
            let snap =
                StateSnapshot { time: end, lm_state: lm, hs_state: hs, rcr_counts: counts.to_vec(), at_risk: true };
            segments.push(Segment {
                unit: i,
                start,
                end,
                lm,
                hs,
                counts: counts.to_vec(),
                reset: reset.to_vec(),
                br: design_row_r(spaces, &snap, &u.covariates)?,
                bw: design_row_w(spaces, &snap, &u.covariates)?,
                bv: design_row_v(spaces, &snap, &u.covariates)?,
                event,
            });
            Ok(())
        };
        for e in &u.events {
            push(e.time, Some(e.kind), lm, hs, &counts, &reset, start)?;
            calendar.push(e.time);
            for (q, r) in reset.iter_mut().enumerate() {
                if age_policy.resets(q, &e.kind) {
                    *r = e.time;
                }
            }
            match e.kind {
                EventKind::Rcr(q) => counts[q] += 1,
                EventKind::Lm { to, .. } => lm = to,
                EventKind::Hs { to, .. } => hs = to,
            }
            start = e.time;
        }
        if u.end_time > start {
            push(u.end_time, None, lm, hs, &counts, &reset, start)?;
        }
    }
    calendar.sort_by(f64::total_cmp);
    calendar.dedup();
    let rcr_groups = group_events(&segments, q_count);
    Ok(EventGrid {
        spaces: spaces.clone(),
        age_policy,
        p,
        n_units: cohort.len(),
        calendar_times: calendar,
        segments,
        rcr_groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EndReason, Event, UnitHistory};

    pub(crate) fn unit(events: &[(f64, EventKind)], end: f64) -> UnitHistory {
        UnitHistory {
            covariates: vec![],
            initial_lm: 0,
            initial_hs: 1,
            events: events.iter().map(|&(time, kind)| Event { time, kind }).collect(),
            end_time: end,
            end_reason: EndReason::Censored,
        }
    }

    #[test]
    fn calendar_times_merge_ties() {
        let sp = StateSpaces::numbered(2, 2, &[0], 1).unwrap();
        let r = EventKind::Rcr(0);
        let c = Cohort::new(vec![unit(&[(1.0, r)], 3.0), unit(&[(1.0, r), (2.0, r)], 3.0)]);
        let g = build_grid(&c, &sp, EffectiveAgePolicy::MinimalRepair).unwrap();
        assert_eq!(g.calendar_times, vec![1.0, 2.0]);
        assert_eq!(g.rcr_groups[0].len(), 2);
        assert_eq!(g.rcr_groups[0][0].segments.len(), 2);
    }

    #[test]
    fn own_type_age_windows() {
        let sp = StateSpaces::numbered(2, 2, &[0], 1).unwrap();
        let r = EventKind::Rcr(0);
        let c = Cohort::new(vec![unit(&[(1.0, r), (1.5, r)], 2.0)]);
        let g = build_grid(&c, &sp, EffectiveAgePolicy::PerfectRepairOwnType).unwrap();
        let w: Vec<(f64, f64)> = g.segments.iter().map(|s| s.age_window(0)).collect();
        assert_eq!(w, vec![(0.0, 1.0), (0.0, 0.5), (0.0, 0.5)]);
        assert_eq!(g.age_times(0), vec![0.5, 1.0]);
    }

    #[test]
    fn no_events_one_segment_per_unit() {
        let sp = StateSpaces::numbered(2, 2, &[0], 1).unwrap();
        let c = Cohort::new(vec![unit(&[], 2.0), unit(&[], 1.0)]);
        let g = build_grid(&c, &sp, EffectiveAgePolicy::MinimalRepair).unwrap();
        assert!(g.calendar_times.is_empty());
        assert_eq!(g.segments.len(), 2);
        assert!(g.segments.iter().all(|s| s.event.is_none()));
    }

    #[test]
    fn segments_tile_follow_up() {
        let sp = StateSpaces::numbered(2, 3, &[0], 2).unwrap();
        let c = Cohort::new(vec![unit(
            &[
                (0.4, EventKind::Lm { from: 0, to: 1 }),
                (0.9, EventKind::Rcr(1)),
                (1.3, EventKind::Hs { from: 1, to: 2 }),
            ],
            1.3,
        )]);
        let g = build_grid(&c, &sp, EffectiveAgePolicy::PerfectRepairAnyEvent).unwrap();
        assert_eq!(g.segments.len(), 3);
        let total: f64 = g.segments.iter().map(Segment::len).sum();
        assert_eq!(total, 1.3);
        assert_eq!(g.segments[2].counts, vec![0, 1]);
        assert_eq!(g.segments[2].lm, 1);
        assert_eq!(g.segments[2].age_window(0), (0.0, 1.3 - 0.9));
    }

    #[test]
    fn truncation_drops_late_data() {
        let sp = StateSpaces::numbered(2, 2, &[0], 1).unwrap();
        let r = EventKind::Rcr(0);
        let c = Cohort::new(vec![unit(&[(1.0, r), (2.0, r)], 3.0)]);
        let g = build_grid(&c, &sp, EffectiveAgePolicy::MinimalRepair).unwrap().truncated(1.5);
        assert_eq!(g.segments.len(), 2);
        assert_eq!(g.segments[1].end, 1.5);
        assert_eq!(g.segments[1].event, None);
        assert_eq!(g.age_times(0), vec![1.0]);
    }
}
