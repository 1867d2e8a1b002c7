//! Line-oriented text format for cohorts.
//!
//! ```text
//! rcrjoint-dataset 1
//! lm_states 1 2 3
//! hs_states 1 2 3
//! absorbing 1
//! risks 3
//! covariates X1 X2
//! unit 2 3 1 -0.35
//! rcr 0.41 1
//! lm 0.9 2 1
//! hs 1.3 3 1
//! end 1.3 absorbed
//! ```
//!
//! A `unit` line gives the initial LM and HS states followed by the covariate
//! values. Recurrent types are numbered from 1. Times are written in the
//! shortest decimal form that reads back to the same `f64`. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result, Violation, ViolationKind};
use crate::model::{EndReason, Event, EventKind, StateSpaces, UnitHistory};
use crate::simulate::Cohort;

pub const MAGIC: &str = "rcrjoint-dataset";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spaces: StateSpaces,
    pub covariate_names: Vec<String>,
    pub cohort: Cohort,
}

impl Dataset {
    /// Wraps a simulated cohort, naming covariates `X1, X2, ...`.
    pub fn new(spaces: StateSpaces, cohort: Cohort) -> Self {
        let p = cohort.units.first().map_or(0, |u| u.covariates.len());
        Self { spaces, covariate_names: (1..=p).map(|j| format!("X{j}")).collect(), cohort }
    }
}

pub fn format_dataset(d: &Dataset) -> String {
    let sp = &d.spaces;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(out, "lm_states {}", sp.lm_labels().join(" "));
    let _ = writeln!(out, "hs_states {}", sp.hs_labels().join(" "));
    let abs: Vec<&str> =
        sp.hs_labels().iter().zip(sp.absorbing_flags()).filter(|(_, &a)| a).map(|(l, _)| l.as_str()).collect();
    let _ = writeln!(out, "absorbing {}", abs.join(" "));
    let _ = writeln!(out, "risks {}", sp.q());
    let _ = writeln!(out, "covariates {}", d.covariate_names.join(" ").trim_end());
    if !d.cohort.fingerprint.is_empty() {
        let _ = writeln!(out, "fingerprint {}", d.cohort.fingerprint);
    }
    let lm = sp.lm_labels();
    let hs = sp.hs_labels();
    for u in &d.cohort.units {
        let _ = write!(out, "unit {} {}", lm[u.initial_lm], hs[u.initial_hs]);
        for x in &u.covariates {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
        for e in &u.events {
            let _ = match e.kind {
                EventKind::Rcr(q) => writeln!(out, "rcr {} {}", e.time, q + 1),
                EventKind::Lm { from, to } => writeln!(out, "lm {} {} {}", e.time, lm[from], lm[to]),
                EventKind::Hs { from, to } => writeln!(out, "hs {} {} {}", e.time, hs[from], hs[to]),
            };
        }
        let reason = match u.end_reason {
            EndReason::Censored => "censored",
            EndReason::Absorbed => "absorbed",
        };
        let _ = writeln!(out, "end {} {reason}", u.end_time);
    }
    out
}

pub fn write_dataset(path: &Path, d: &Dataset) -> Result<()> {
    std::fs::write(path, format_dataset(d))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

struct Open {
    line: usize,
    unit: UnitHistory,
    lm: usize,
    hs: usize,
    last: f64,
    ended: bool,
    /// Violations recorded before the unit opened.
    seen: usize,
}

struct Parser {
    violations: Vec<Violation>,
}

impl Parser {
    fn flag(&mut self, line: usize, kind: ViolationKind, message: impl Into<String>) {
        self.violations.push(Violation { line, kind, message: message.into() });
    }

    fn time(&mut self, line: usize, tok: &str) -> Option<f64> {
        match tok.parse::<f64>() {
            Ok(t) if t.is_finite() && t > 0.0 => Some(t),
            _ => {
                self.flag(line, ViolationKind::Malformed, format!("'{tok}' is not a positive finite time"));
                None
            }
        }
    }

    fn state(&mut self, line: usize, labels: &[String], tok: &str, what: &str) -> Option<usize> {
        let i = labels.iter().position(|l| l == tok);
        if i.is_none() {
            self.flag(line, ViolationKind::UnknownState, format!("unknown {what} state '{tok}'"));
        }
        i
    }
}

struct Header {
    lm: Option<Vec<String>>,
    hs: Option<Vec<String>>,
    absorbing: Option<Vec<String>>,
    risks: Option<usize>,
    covariates: Option<Vec<String>>,
    fingerprint: String,
}

/// Parses a dataset, collecting every violation with its line number.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut p = Parser { violations: Vec::new() };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .peekable();

    match lines.next() {
        Some((_, l)) if l.split_whitespace().collect::<Vec<_>>() == [MAGIC, "1"] => {}
        Some((n, l)) => {
            p.flag(n, ViolationKind::Header, format!("expected '{MAGIC} {FORMAT_VERSION}', found '{l}'"));
            return Err(Error::Dataset(p.violations));
        }
        None => {
            p.flag(0, ViolationKind::Header, "empty dataset");
            return Err(Error::Dataset(p.violations));
        }
    }

    let mut h =
        Header { lm: None, hs: None, absorbing: None, risks: None, covariates: None, fingerprint: String::new() };
    while let Some(&(n, l)) = lines.peek() {
        let mut toks = l.split_whitespace();
        let key = toks.next().unwrap_or_default();
        let rest: Vec<String> = toks.map(str::to_string).collect();
        match key {
            "lm_states" => h.lm = Some(rest),
            "hs_states" => h.hs = Some(rest),
            "absorbing" => h.absorbing = Some(rest),
            "covariates" => h.covariates = Some(rest),
            "fingerprint" => h.fingerprint = rest.join(""),
            "risks" => match rest.as_slice() {
                [q] if q.parse::<usize>().is_ok() => h.risks = q.parse().ok(),
                _ => p.flag(n, ViolationKind::Header, "risks needs one non-negative integer"),
            },
            "unit" | "rcr" | "lm" | "hs" | "end" => break,
            other => p.flag(n, ViolationKind::Header, format!("unknown header key '{other}'")),
        }
        lines.next();
    }
    let spaces = match (&h.lm, &h.hs, &h.absorbing, h.risks) {
        (Some(lm), Some(hs), Some(abs), Some(q)) => {
            for a in abs.iter().filter(|a| !hs.contains(a)) {
                p.flag(0, ViolationKind::Header, format!("absorbing state '{a}' is not an HS state"));
            }
            let flags = hs.iter().map(|v| abs.contains(v)).collect();
            match StateSpaces::new(lm.clone(), hs.clone(), flags, q) {
                Ok(s) => Some(s),
                Err(e) => {
                    p.flag(0, ViolationKind::Header, e.to_string());
                    None
                }
            }
        }
        _ => {
            p.flag(0, ViolationKind::Header, "header needs lm_states, hs_states, absorbing and risks");
            None
        }
    };
    let (Some(spaces), true) = (spaces, p.violations.is_empty()) else {
        return Err(Error::Dataset(p.violations));
    };
    let covariate_names = h.covariates.unwrap_or_default();
    let np = covariate_names.len();

    let mut units = Vec::new();
    let mut open: Option<Open> = None;
    let close = |p: &mut Parser, o: Option<Open>, units: &mut Vec<UnitHistory>| {
        if let Some(o) = o {
            if o.ended {
                // backstop; only when nothing more specific was reported
                if p.violations.len() == o.seen {
                    if let Err(e) = o.unit.validate(&spaces) {
                        p.flag(o.line, ViolationKind::InconsistentChain, e.to_string());
                    }
                }
                units.push(o.unit);
            } else {
                p.flag(o.line, ViolationKind::MissingEnd, "unit has no end record");
            }
        }
    };
    for (n, l) in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        let (key, args) = (toks[0], &toks[1..]);
        if key == "unit" {
            close(&mut p, open.take(), &mut units);
            if args.len() != 2 + np {
                p.flag(
                    n,
                    ViolationKind::CountMismatch,
                    format!("unit line needs 2 states and {np} covariates, found {} fields", args.len()),
                );
                continue;
            }
            let lm = p.state(n, spaces.lm_labels(), args[0], "LM");
            let hs = p.state(n, spaces.hs_labels(), args[1], "HS");
            let mut x = Vec::with_capacity(np);
            for a in &args[2..] {
                match a.parse::<f64>() {
                    Ok(v) if v.is_finite() => x.push(v),
                    _ => p.flag(n, ViolationKind::Malformed, format!("covariate '{a}' is not a finite number")),
                }
            }
            let (Some(lm), Some(hs)) = (lm, hs) else { continue };
            if spaces.is_absorbing(hs) {
                p.flag(n, ViolationKind::InconsistentChain, "unit starts in an absorbing HS state");
            }
            open = Some(Open {
                line: n,
                unit: UnitHistory {
                    covariates: x,
                    initial_lm: lm,
                    initial_hs: hs,
                    events: vec![],
                    end_time: 0.0,
                    end_reason: EndReason::Censored,
                },
                lm,
                hs,
                last: 0.0,
                ended: false,
                seen: p.violations.len(),
            });
            continue;
        }
        if !matches!(key, "rcr" | "lm" | "hs" | "end") {
            p.flag(n, ViolationKind::Malformed, format!("unknown record '{key}'"));
            continue;
        }
        let Some(o) = open.as_mut() else {
            p.flag(n, ViolationKind::Malformed, format!("'{key}' record before any unit line"));
            continue;
        };
        if o.ended {
            p.flag(n, ViolationKind::RecordAfterEnd, format!("'{key}' record after the unit's end record"));
            continue;
        }
        let want = match key {
            "rcr" | "end" => 2,
            _ => 3,
        };
        if args.len() != want {
            p.flag(n, ViolationKind::Malformed, format!("'{key}' record needs {want} fields, found {}", args.len()));
            continue;
        }
        let Some(t) = p.time(n, args[0]) else { continue };
        let ordered = if key == "end" { t >= o.last } else { t > o.last };
        if !ordered {
            p.flag(n, ViolationKind::UnorderedTimes, format!("time {t} does not follow {}", o.last));
            continue;
        }
        let absorbed = spaces.is_absorbing(o.hs);
        if absorbed && key != "end" {
            p.flag(n, ViolationKind::FromAbsorbing, format!("'{key}' record after absorption"));
            continue;
        }
        let kind = match key {
            "rcr" => match args[1].parse::<usize>() {
                Ok(q) if (1..=spaces.q()).contains(&q) => EventKind::Rcr(q - 1),
                Ok(q) => {
                    p.flag(n, ViolationKind::CountMismatch, format!("recurrent type {q} outside 1..={}", spaces.q()));
                    continue;
                }
                Err(_) => {
                    p.flag(n, ViolationKind::Malformed, format!("'{}' is not a recurrent type", args[1]));
                    continue;
                }
            },
            "lm" | "hs" => {
                let labels = if key == "lm" { spaces.lm_labels() } else { spaces.hs_labels() };
                let what = if key == "lm" { "LM" } else { "HS" };
                let (Some(from), Some(to)) = (p.state(n, labels, args[1], what), p.state(n, labels, args[2], what))
                else {
                    continue;
                };
                let cur = if key == "lm" { o.lm } else { o.hs };
                if key == "hs" && spaces.is_absorbing(from) {
                    p.flag(
                        n,
                        ViolationKind::FromAbsorbing,
                        format!("HS transition out of absorbing state '{}'", args[1]),
                    );
                    continue;
                }
                if from != cur || from == to {
                    p.flag(
                        n,
                        ViolationKind::InconsistentChain,
                        format!("{what} transition {}->{} while in '{}'", args[1], args[2], labels[cur]),
                    );
                    continue;
                }
                if key == "lm" {
                    o.lm = to;
                    EventKind::Lm { from, to }
                } else {
                    o.hs = to;
                    EventKind::Hs { from, to }
                }
            }
            _ => {
                let reason = match args[1] {
                    "censored" => EndReason::Censored,
                    "absorbed" => EndReason::Absorbed,
                    r => {
                        p.flag(n, ViolationKind::Malformed, format!("end reason '{r}' is not censored or absorbed"));
                        continue;
                    }
                };
                if (reason == EndReason::Absorbed) != absorbed || (absorbed && t != o.last) {
                    p.flag(
                        n,
                        ViolationKind::InconsistentChain,
                        "an absorbed end must follow the absorbing transition at the same time",
                    );
                }
                o.unit.end_time = t;
                o.unit.end_reason = reason;
                o.ended = true;
                continue;
            }
        };
        o.unit.events.push(Event { time: t, kind });
        o.last = t;
    }
    close(&mut p, open.take(), &mut units);
    if units.is_empty() && p.violations.is_empty() {
        p.flag(0, ViolationKind::MissingEnd, "dataset has no units");
    }
    if !p.violations.is_empty() {
        p.violations.sort_by_key(|v| v.line);
        return Err(Error::Dataset(p.violations));
    }
    Ok(Dataset { spaces, covariate_names, cohort: Cohort { units, fingerprint: h.fingerprint } })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "rcrjoint-dataset 1\nlm_states 1 2\nhs_states 1 2 3\nabsorbing 1\nrisks 2\ncovariates X1\n";

    fn parse(body: &str) -> Result<Dataset> {
        parse_dataset(&format!("{HEAD}{body}"))
    }

    fn kinds(e: Error) -> Vec<(usize, ViolationKind)> {
        match e {
            Error::Dataset(v) => v.into_iter().map(|v| (v.line, v.kind)).collect(),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn parses_a_small_file() {
        let d =
            parse("unit 1 2 0.5\nrcr 0.1 2\nlm 0.2 1 2\nhs 0.7 2 1\nend 0.7 absorbed\nunit 2 3 -1\nend 2 censored\n")
                .unwrap();
        assert_eq!(d.cohort.len(), 2);
        let u = &d.cohort.units[0];
        assert_eq!(u.events[0].kind, EventKind::Rcr(1));
        assert_eq!(u.end_reason, EndReason::Absorbed);
        assert_eq!(d.cohort.units[1].initial_hs, 2);
        assert_eq!(format_dataset(&d), format!("{HEAD}unit 1 2 0.5\nrcr 0.1 2\nlm 0.2 1 2\nhs 0.7 2 1\nend 0.7 absorbed\nunit 2 3 -1\nend 2 censored\n"));
    }

    #[test]
    fn record_after_end_is_rejected_with_its_line() {
        let e = parse("unit 1 2 0\nend 1 censored\nrcr 1.5 1\n").unwrap_err();
        assert_eq!(kinds(e), vec![(9, ViolationKind::RecordAfterEnd)]);
    }

    #[test]
    fn transition_out_of_absorbing_state() {
        let e = parse("unit 1 2 0\nhs 0.5 2 1\nhs 0.6 1 2\nend 0.6 censored\n").unwrap_err();
        let k = kinds(e);
        assert!(k.contains(&(9, ViolationKind::FromAbsorbing)), "{k:?}");
    }

    #[test]
    fn distinct_diagnostics() {
        let e = parse("unit 1 2 0\nrcr 0.5 1\nrcr 0.4 1\nlm 0.6 1 7\nrcr 0.7 3\nrcr x 1\n").unwrap_err();
        assert_eq!(
            kinds(e),
            vec![
                (7, ViolationKind::MissingEnd),
                (9, ViolationKind::UnorderedTimes),
                (10, ViolationKind::UnknownState),
                (11, ViolationKind::CountMismatch),
                (12, ViolationKind::Malformed),
            ]
        );
    }

    #[test]
    fn header_problems() {
        assert!(matches!(parse_dataset("bogus 1\n"), Err(Error::Dataset(_))));
        let e = parse_dataset("rcrjoint-dataset 1\nlm_states 1 2\nhs_states 1 2\nabsorbing 5\nrisks 1\n").unwrap_err();
        assert_eq!(kinds(e)[0].1, ViolationKind::Header);
    }

    #[test]
    fn chain_must_be_consistent() {
        let e = parse("unit 1 2 0\nlm 0.5 2 1\nend 1 censored\n").unwrap_err();
        assert_eq!(kinds(e), vec![(8, ViolationKind::InconsistentChain)]);
        let e = parse("unit 1 2 0\nend 1 absorbed\n").unwrap_err();
        assert_eq!(kinds(e), vec![(8, ViolationKind::InconsistentChain)]);
    }

    #[test]
    fn awkward_floats_round_trip() {
        let t = [1e-7, 0.1 + 0.2, 1.0 / 3.0, 123456.789e3];
        let sp = StateSpaces::numbered(2, 2, &[0], 1).unwrap();
        let unit = UnitHistory {
            covariates: vec![f64::MIN_POSITIVE, -2.5e-300],
            initial_lm: 0,
            initial_hs: 1,
            events: t.iter().map(|&time| Event { time, kind: EventKind::Rcr(0) }).collect(),
            end_time: 2e8,
            end_reason: EndReason::Censored,
        };
        let d = Dataset::new(sp, Cohort { units: vec![unit], fingerprint: "abc".into() });
        assert_eq!(parse_dataset(&format_dataset(&d)).unwrap(), d);
    }
}
