use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use super::correlation::{correlation_trajectories, default_mesh, CorrelationCurves};
use super::processes::{summarize_processes, Moments, ProcessSummary};
use crate::error::{Error, Result};
use crate::parametric::fit_special_case;
use crate::semiparam::{fit_semiparametric, FitOptions, NewtonOptions, DEFAULT_LAMBDA_TIMES};
use crate::simulate::{derive_seed, simulate_cohort_with, Cohort, Generator, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    Parametric,
    Semiparametric,
}

impl FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parametric" => Ok(FitMode::Parametric),
            "semiparametric" => Ok(FitMode::Semiparametric),
            _ => Err(Error::Config(format!("unknown fit mode '{s}' (parametric | semiparametric)"))),
        }
    }
}

impl fmt::Display for FitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitMode::Parametric => "parametric",
            FitMode::Semiparametric => "semiparametric",
        })
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub scenario: Scenario,
    /// Units per cohort.
    pub n: usize,
    pub mreps: usize,
    pub mode: FitMode,
    /// Ages at which `Lambda_0q` is summarized.
    pub lambda_times: Vec<f64>,
    /// Lower and upper percentile levels of the estimates.
    pub percentiles: (f64, f64),
    pub seed: u64,
    pub generator: Generator,
    pub newton: NewtonOptions,
    /// Time mesh of the correlation curves; empty skips them.
    pub mesh: Vec<f64>,
}

impl StudyConfig {
    pub fn new(scenario: Scenario, n: usize, mreps: usize) -> Self {
        let seed = scenario.seed;
        Self {
            scenario,
            n,
            mreps,
            mode: FitMode::Semiparametric,
            lambda_times: DEFAULT_LAMBDA_TIMES.to_vec(),
            percentiles: (0.025, 0.975),
            seed,
            generator: Generator::Grid,
            newton: NewtonOptions::default(),
            mesh: default_mesh(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mreps == 0 {
            return Err(Error::Config("mreps must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("cohort size must be at least 1".into()));
        }
        if self.lambda_times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Config("lambda times must be positive".into()));
        }
        let (lo, hi) = self.percentiles;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::Config(format!(
                "percentile levels must satisfy 0 < lower < upper < 1, got ({lo}, {hi})"
            )));
        }
        if self.mesh.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::Config("correlation mesh must lie in [0, inf)".into()));
        }
        self.scenario.validate()
    }
}

/// Summary of one parameter over the successful replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub name: String,
    pub truth: Option<f64>,
    pub mean: f64,
    /// `None` with fewer than two replications.
    pub sd: Option<f64>,
    /// Mean of the reported standard errors.
    pub ase: Option<f64>,
    /// Mean of the alternative standard errors (occurrence-exposure term only
    /// for rates and baselines).
    pub ase_alt: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    /// Share of replications whose `estimate +- 1.96 se` covers the truth.
    pub coverage: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub mode: FitMode,
    pub n: usize,
    pub mreps: usize,
    pub seed: u64,
    pub fingerprint: String,
    pub rows: Vec<SummaryRow>,
    pub processes: ProcessSummary,
    pub correlations: Option<CorrelationCurves>,
    /// Replications excluded for a simulation error, a fit error or a
    /// non-converged optimizer.
    pub failures: usize,
    pub messages: Vec<String>,
}

impl StudySummary {
    pub fn row(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// One estimate of one replication: name, value, se, alternative se.
type Record = Vec<(String, f64, Option<f64>, Option<f64>)>;

pub fn lambda_name(q: usize, t: f64) -> String {
    format!("Lambda_{}({t})", q + 1)
}

fn fit_once(cfg: &StudyConfig, cohort: &Cohort) -> Result<std::result::Result<Record, String>> {
    let sc = &cfg.scenario;
    let sp = sc.spaces();
    let mut rec = Record::new();
    match cfg.mode {
        FitMode::Parametric => {
            let f = fit_special_case(cohort, sp)?;
            for (q, e) in f.lambda.iter().enumerate() {
                rec.push((e.name.clone(), e.value, e.se, None));
                for &t in &cfg.lambda_times {
                    rec.push((lambda_name(q, t), e.value * t, e.se.map(|s| s * t), None));
                }
            }
            for e in f.eta_estimates.iter().chain(&f.xi_estimates) {
                rec.push((e.name.clone(), e.value, e.se, None));
            }
        }
        FitMode::Semiparametric => {
            let opts = FitOptions {
                rho: sc.model.rho.clone(),
                lambda_times: cfg.lambda_times.clone(),
                newton: cfg.newton,
                ..Default::default()
            };
            let f = fit_semiparametric(cohort, sp, sc.model.age_policy, &opts)?;
            if !f.converged() {
                let bad: Vec<&str> = f.blocks.iter().filter(|b| !b.converged).map(|b| b.block.as_str()).collect();
                return Ok(Err(format!("not converged: {}", bad.join(", "))));
            }
            for e in &f.estimates {
                rec.push((e.name.clone(), e.value, e.se, None));
            }
            for l in &f.lambda_points {
                rec.push((lambda_name(l.risk, l.t), l.value, l.se, Some(l.se_naive)));
            }
            for e in f.eta_estimates.iter().chain(&f.xi_estimates) {
                rec.push((e.name.clone(), e.value, e.se, e.se_naive));
            }
        }
    }
    Ok(Ok(rec))
}

/// True value of a named parameter under the scenario, where one exists.
pub fn truth(scenario: &Scenario, name: &str) -> Option<f64> {
    let sp = scenario.spaces();
    let par = scenario.params();
    let [r, w, v] = sp.theta_names(scenario.p());
    for (names, vals) in [(&r, &par.theta_r), (&w, &par.theta_w), (&v, &par.theta_v)] {
        if let Some(i) = names.iter().position(|n| n == name) {
            return Some(vals[i]);
        }
    }
    let idx = |s: &str| s.parse::<usize>().ok().filter(|&q| q >= 1 && q <= sp.q()).map(|q| q - 1);
    if let Some(q) = name.strip_prefix("alpha_").and_then(idx) {
        return Some(par.alpha[q]);
    }
    if let Some(q) = name.strip_prefix("lambda_").and_then(idx) {
        return par.baseline[q].constant_rate();
    }
    if let Some(rest) = name.strip_prefix("Lambda_") {
        let (q, t) = rest.strip_suffix(')')?.split_once('(')?;
        return Some(par.baseline[idx(q)?].cumulative(t.parse().ok()?));
    }
    let pair = |rest: &str| {
        rest.strip_prefix('(')?.strip_suffix(')')?.split_once(',').map(|(a, b)| (a.to_string(), b.to_string()))
    };
    if let Some((a, b)) = name.strip_prefix("eta").and_then(pair) {
        return Some(par.eta[(sp.lm_index(&a)?, sp.lm_index(&b)?)]);
    }
    if let Some((a, b)) = name.strip_prefix("xi").and_then(pair) {
        return Some(par.xi[(sp.hs_index(&a)?, sp.hs_index(&b)?)]);
    }
    None
}

fn mean_of(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summarize_row(cfg: &StudyConfig, name: &str, k: usize, records: &[Record]) -> SummaryRow {
    let entries: Vec<_> = records.iter().map(|r| &r[k]).collect();
    let values: Vec<f64> = entries.iter().map(|e| e.1).collect();
    let m = Moments::of(&values);
    let truth = truth(&cfg.scenario, name);
    let mut data = Data::new(values.clone());
    let coverage = truth.and_then(|t| {
        let hits: Vec<f64> =
            entries.iter().filter_map(|e| e.2.map(|s| ((e.1 - t).abs() <= 1.96 * s) as u8 as f64)).collect();
        mean_of(hits.into_iter())
    });
    SummaryRow {
        name: name.to_string(),
        truth,
        mean: m.mean,
        sd: m.sd,
        ase: mean_of(entries.iter().filter_map(|e| e.2)),
        ase_alt: mean_of(entries.iter().filter_map(|e| e.3)),
        lower: data.quantile(cfg.percentiles.0),
        upper: data.quantile(cfg.percentiles.1),
        coverage,
        count: values.len(),
    }
}

/// Runs `mreps` independent simulate-and-fit cycles. Replication `r` draws its
/// cohort with `derive_seed(seed, r)`, so results do not depend on the number
/// of worker threads.
pub fn run_study(cfg: &StudyConfig) -> Result<StudySummary> {
    cfg.validate()?;
    let outcomes: Vec<(Option<Cohort>, std::result::Result<Record, String>)> = (0..cfg.mreps as u64)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(cfg.seed, r);
            match simulate_cohort_with(&cfg.scenario, cfg.n, seed, cfg.generator) {
                Err(e) => (None, Err(format!("replication {}: simulation failed: {e}", r + 1))),
                Ok(c) => {
                    let rec = match fit_once(cfg, &c) {
                        Ok(Ok(rec)) => Ok(rec),
                        Ok(Err(msg)) => Err(format!("replication {}: {msg}", r + 1)),
                        Err(e) => Err(format!("replication {}: fit failed: {e}", r + 1)),
                    };
                    (Some(c), rec)
                }
            }
        })
        .collect();

    let mut cohorts = Vec::with_capacity(outcomes.len());
    let mut records = Vec::with_capacity(outcomes.len());
    let mut messages = Vec::new();
    for (c, rec) in outcomes {
        cohorts.extend(c);
        match rec {
            Ok(r) => records.push(r),
            Err(m) => messages.push(m),
        }
    }
    if records.is_empty() {
        return Err(Error::Numerical(format!(
            "all {} replications failed; first: {}",
            cfg.mreps,
            messages.first().map(String::as_str).unwrap_or("")
        )));
    }
    if cfg.mreps == 1 {
        messages.push("a single replication: standard deviations are undefined".into());
    }
    let names: Vec<String> = records[0].iter().map(|e| e.0.clone()).collect();
    if records.iter().any(|r| r.len() != names.len() || r.iter().zip(&names).any(|(e, n)| &e.0 != n)) {
        return Err(Error::Numerical("replications report different parameter sets".into()));
    }
    let rows = names.iter().enumerate().map(|(k, n)| summarize_row(cfg, n, k, &records)).collect();
    let spaces = cfg.scenario.spaces();
    let correlations = (!cfg.mesh.is_empty()).then(|| correlation_trajectories(&cohorts, spaces, &cfg.mesh));
    Ok(StudySummary {
        mode: cfg.mode,
        n: cfg.n,
        mreps: cfg.mreps,
        seed: cfg.seed,
        fingerprint: cfg.scenario.fingerprint(),
        rows,
        processes: summarize_processes(&cohorts, spaces),
        correlations,
        failures: cfg.mreps - records.len(),
        messages,
    })
}
