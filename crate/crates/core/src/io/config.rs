//! Flat `key = value` configuration for scenarios and studies.
//!
//! `preset` selects a starting scenario (`illustration`, `special-case`); every
//! other key overrides one field. Lists are comma separated, matrices and
//! distribution lists are `;` separated. Unknown or repeated keys are errors.
//!
//! ```text
//! preset = illustration
//! ds = 0.005
//! overflow = clip
//! n = 50
//! mreps = 200
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{mesh, FitMode, StudyConfig};
use crate::model::params::generator_from_rates;
use crate::model::rho::family_by_name;
use crate::model::{Baseline, JointModel, ModelParams, StateSpaces};
use crate::simulate::{CensoringLaw, CovariateDist, Generator, InitialLaw, Overflow, Scenario};

pub const KEYS: &[&str] = &[
    "preset",
    "lm_states",
    "hs_states",
    "absorbing",
    "baselines",
    "alpha",
    "eta",
    "xi",
    "theta_r",
    "theta_w",
    "theta_v",
    "covariates",
    "censoring",
    "initial_lm",
    "initial_hs",
    "age_policy",
    "rho_family",
    "ds",
    "s_max",
    "overflow",
    "seed",
    "n",
    "mreps",
    "mode",
    "lambda_times",
    "percentiles",
    "generator",
    "mesh_horizon",
    "mesh_points",
];

/// A scenario with the study settings read alongside it.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub mreps: usize,
    pub mode: FitMode,
    pub lambda_times: Vec<f64>,
    pub percentiles: (f64, f64),
    pub generator: Generator,
    pub mesh_horizon: f64,
    pub mesh_points: usize,
}

impl RunConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            n: 50,
            mreps: 200,
            mode: FitMode::Semiparametric,
            lambda_times: crate::semiparam::DEFAULT_LAMBDA_TIMES.to_vec(),
            percentiles: (0.025, 0.975),
            generator: Generator::Grid,
            mesh_horizon: 3.0,
            mesh_points: 61,
        }
    }

    pub fn study(&self) -> StudyConfig {
        let mut s = StudyConfig::new(self.scenario.clone(), self.n, self.mreps);
        s.mode = self.mode;
        s.lambda_times = self.lambda_times.clone();
        s.percentiles = self.percentiles;
        s.generator = self.generator;
        s.mesh = mesh(self.mesh_horizon, self.mesh_points);
        s
    }
}

fn bad(key: &str, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {key}: {msg}"))
}

fn num(key: &str, line: usize, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| bad(key, line, format!("'{}' is not a number", s.trim())))
}

fn list(key: &str, line: usize, s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(',').map(|x| num(key, line, x)).collect()
}

fn labels(s: &str) -> Vec<String> {
    s.split([',', ' ']).map(str::trim).filter(|x| !x.is_empty()).map(str::to_string).collect()
}

/// `name(a, b, ...)` or a bare `name`.
fn call<'a>(key: &str, line: usize, s: &'a str) -> Result<(&'a str, Vec<f64>)> {
    let s = s.trim();
    match s.split_once('(') {
        None => Ok((s, vec![])),
        Some((name, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(|| bad(key, line, format!("missing ')' in '{s}'")))?;
            Ok((name.trim(), list(key, line, inner)?))
        }
    }
}

fn matrix(key: &str, line: usize, s: &str, n: usize) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = s.split(';').map(|r| list(key, line, r)).collect::<Result<_>>()?;
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(bad(key, line, format!("expected a {n}x{n} matrix with rows separated by ';'")));
    }
    Ok(rows)
}

fn baseline(key: &str, line: usize, s: &str) -> Result<Baseline> {
    match call(key, line, s)? {
        ("constant", a) if a.len() == 1 => Ok(Baseline::Constant { rate: a[0] }),
        ("weibull", a) if a.len() == 2 => Ok(Baseline::Weibull { shape: a[0], scale: a[1] }),
        _ => Err(bad(key, line, format!("'{}' is not constant(rate) or weibull(shape, scale)", s.trim()))),
    }
}

fn covariate(key: &str, line: usize, s: &str) -> Result<CovariateDist> {
    match call(key, line, s)? {
        ("bernoulli", a) if a.len() == 1 => Ok(CovariateDist::Bernoulli(a[0])),
        ("normal", a) if a.len() == 2 => Ok(CovariateDist::Normal { mean: a[0], sd: a[1] }),
        ("constant", a) if a.len() == 1 => Ok(CovariateDist::Constant(a[0])),
        _ => Err(bad(key, line, format!("'{}' is not bernoulli(p), normal(mean, sd) or constant(c)", s.trim()))),
    }
}

pub fn parse_overflow(s: &str) -> Result<Overflow> {
    match s {
        "error" => Ok(Overflow::Error),
        "clip" => Ok(Overflow::Clip),
        _ => Err(Error::Config(format!("unknown overflow policy '{s}' (error | clip)"))),
    }
}

pub fn parse_generator(s: &str) -> Result<Generator> {
    match s {
        "grid" => Ok(Generator::Grid),
        "exact" => Ok(Generator::ExactSpecial),
        _ => Err(Error::Config(format!("unknown generator '{s}' (grid | exact)"))),
    }
}

fn entries(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| Error::Config(format!("line {line}: expected 'key = value'")))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!("line {line}: unknown key '{k}'")));
        }
        if out.insert(k.to_string(), (line, v.trim().to_string())).is_some() {
            return Err(Error::Config(format!("line {line}: key '{k}' given twice")));
        }
    }
    Ok(out)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut e = entries(text)?;
    let mut take = |k: &str| e.remove(k);
    let base = match take("preset") {
        None => Scenario::illustration(),
        Some((line, v)) => match v.as_str() {
            "illustration" => Scenario::illustration(),
            "special-case" => Scenario::special_case(),
            other => return Err(bad("preset", line, format!("unknown preset '{other}'"))),
        },
    };
    let old = &base.model;

    let mut lm: Vec<String> = old.spaces.lm_labels().to_vec();
    let mut hs: Vec<String> = old.spaces.hs_labels().to_vec();
    let mut absorbing: Vec<String> =
        hs.iter().zip(old.spaces.absorbing_flags()).filter(|(_, &a)| a).map(|(l, _)| l.clone()).collect();
    if let Some((_, v)) = take("lm_states") {
        lm = labels(&v);
    }
    if let Some((_, v)) = take("hs_states") {
        hs = labels(&v);
    }
    if let Some((line, v)) = take("absorbing") {
        absorbing = labels(&v);
        if let Some(a) = absorbing.iter().find(|a| !hs.contains(a)) {
            return Err(bad("absorbing", line, format!("'{a}' is not an HS state")));
        }
    }
    let mut par: ModelParams = old.params.clone();
    if let Some((line, v)) = take("baselines") {
        par.baseline = v.split(';').map(|b| baseline("baselines", line, b)).collect::<Result<_>>()?;
    }
    let flags: Vec<bool> = hs.iter().map(|v| absorbing.contains(v)).collect();
    let spaces = StateSpaces::new(lm, hs, flags, par.baseline.len())?;
    if let Some((line, v)) = take("alpha") {
        par.alpha = list("alpha", line, &v)?;
    }
    if let Some((line, v)) = take("eta") {
        par.eta = generator_from_rates(&matrix("eta", line, &v, spaces.n_lm())?);
    }
    if let Some((line, v)) = take("xi") {
        par.xi = generator_from_rates(&matrix("xi", line, &v, spaces.n_hs())?);
    }
    for (k, slot) in [("theta_r", &mut par.theta_r), ("theta_w", &mut par.theta_w), ("theta_v", &mut par.theta_v)] {
        if let Some((line, v)) = take(k) {
            *slot = list(k, line, &v)?;
        }
    }
    let mut covariates = base.covariates.clone();
    if let Some((line, v)) = take("covariates") {
        covariates = if v == "none" {
            vec![]
        } else {
            v.split(';').map(|c| covariate("covariates", line, c)).collect::<Result<_>>()?
        };
    }
    let mut censoring = base.censoring.clone();
    if let Some((line, v)) = take("censoring") {
        censoring = match call("censoring", line, &v)? {
            ("exponential", a) if a.len() == 1 => CensoringLaw::Exponential { mean: a[0] },
            ("fixed", a) if a.len() == 1 => CensoringLaw::Fixed(a[0]),
            _ => return Err(bad("censoring", line, "expected exponential(mean) or fixed(time)")),
        };
    }
    let mut initial = base.initial.clone();
    match (take("initial_lm"), take("initial_hs")) {
        (None, None) => {}
        (Some((l1, a)), Some((l2, b))) => {
            let (lm, hs) = (list("initial_lm", l1, &a)?, list("initial_hs", l2, &b)?);
            initial =
                if lm.is_empty() && hs.is_empty() { InitialLaw::Uniform } else { InitialLaw::Probabilities { lm, hs } };
        }
        (Some((l, _)), None) | (None, Some((l, _))) => {
            return Err(Error::Config(format!("line {l}: initial_lm and initial_hs must be given together")))
        }
    }
    let mut age = old.age_policy;
    if let Some((line, v)) = take("age_policy") {
        age = v.parse().map_err(|e| bad("age_policy", line, e))?;
    }
    let mut rho = old.rho.clone();
    if let Some((line, v)) = take("rho_family") {
        rho = family_by_name(&v).map_err(|e| bad("rho_family", line, e))?;
    }
    let model = JointModel::new(spaces, par, age, covariates.len())?.with_rho(rho);
    let mut scenario = Scenario::new(model, covariates, censoring, initial)?;
    scenario.ds = base.ds;
    scenario.s_max = base.s_max;
    scenario.overflow = base.overflow;
    scenario.seed = base.seed;
    if let Some((line, v)) = take("ds") {
        scenario.ds = num("ds", line, &v)?;
    }
    if let Some((line, v)) = take("s_max") {
        scenario.s_max = num("s_max", line, &v)?;
    }
    if let Some((line, v)) = take("overflow") {
        scenario.overflow = parse_overflow(&v).map_err(|e| bad("overflow", line, e))?;
    }
    if let Some((line, v)) = take("seed") {
        scenario.seed = v.parse().map_err(|_| bad("seed", line, format!("'{v}' is not an unsigned integer")))?;
    }
    scenario.validate()?;

    let mut rc = RunConfig::new(scenario);
    let count =
        |k: &str, line: usize, v: &str| v.parse::<usize>().map_err(|_| bad(k, line, format!("'{v}' is not a count")));
    if let Some((line, v)) = take("n") {
        rc.n = count("n", line, &v)?;
    }
    if let Some((line, v)) = take("mreps") {
        rc.mreps = count("mreps", line, &v)?;
    }
    if let Some((line, v)) = take("mode") {
        rc.mode = v.parse().map_err(|e| bad("mode", line, e))?;
    }
    if let Some((line, v)) = take("lambda_times") {
        rc.lambda_times = list("lambda_times", line, &v)?;
    }
    if let Some((line, v)) = take("percentiles") {
        match list("percentiles", line, &v)?.as_slice() {
            &[a, b] => rc.percentiles = (a, b),
            _ => return Err(bad("percentiles", line, "expected two levels")),
        }
    }
    if let Some((line, v)) = take("generator") {
        rc.generator = parse_generator(&v).map_err(|e| bad("generator", line, e))?;
    }
    if let Some((line, v)) = take("mesh_horizon") {
        rc.mesh_horizon = num("mesh_horizon", line, &v)?;
    }
    if let Some((line, v)) = take("mesh_points") {
        rc.mesh_points = count("mesh_points", line, &v)?;
    }
    debug_assert!(e.is_empty());
    rc.study().validate()?;
    Ok(rc)
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

/// Writes every key, so that `parse_config` reproduces the configuration.
pub fn render_config(rc: &RunConfig) -> String {
    let sc = &rc.scenario;
    let sp = sc.spaces();
    let par = sc.params();
    let mut o = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(o, "{k} = {v}");
    };
    kv("lm_states", sp.lm_labels().join(" "));
    kv("hs_states", sp.hs_labels().join(" "));
    let abs: Vec<&str> =
        sp.hs_labels().iter().zip(sp.absorbing_flags()).filter(|(_, &a)| a).map(|(l, _)| l.as_str()).collect();
    kv("absorbing", abs.join(" "));
    let b: Vec<String> = par
        .baseline
        .iter()
        .map(|b| match b {
            Baseline::Constant { rate } => format!("constant({rate})"),
            Baseline::Weibull { shape, scale } => format!("weibull({shape}, {scale})"),
            Baseline::Step(_) => "step".into(),
        })
        .collect();
    kv("baselines", b.join("; "));
    kv("alpha", join(&par.alpha));
    let mat = |m: &nalgebra::DMatrix<f64>| {
        (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .map(|j| if i == j { "0".to_string() } else { m[(i, j)].to_string() })
                    .collect::<Vec<_>>()
                    .join(", ")
            })
            .collect::<Vec<_>>()
            .join("; ")
    };
    kv("eta", mat(&par.eta));
    kv("xi", mat(&par.xi));
    kv("theta_r", join(&par.theta_r));
    kv("theta_w", join(&par.theta_w));
    kv("theta_v", join(&par.theta_v));
    let cov: Vec<String> = sc
        .covariates
        .iter()
        .map(|c| match c {
            CovariateDist::Bernoulli(p) => format!("bernoulli({p})"),
            CovariateDist::Normal { mean, sd } => format!("normal({mean}, {sd})"),
            CovariateDist::Constant(c) => format!("constant({c})"),
        })
        .collect();
    kv("covariates", if cov.is_empty() { "none".into() } else { cov.join("; ") });
    kv(
        "censoring",
        match sc.censoring {
            CensoringLaw::Exponential { mean } => format!("exponential({mean})"),
            CensoringLaw::Fixed(t) => format!("fixed({t})"),
        },
    );
    match &sc.initial {
        InitialLaw::Uniform => {
            kv("initial_lm", String::new());
            kv("initial_hs", String::new());
        }
        InitialLaw::Probabilities { lm, hs } => {
            kv("initial_lm", join(lm));
            kv("initial_hs", join(hs));
        }
    }
    kv("age_policy", sc.model.age_policy.to_string());
    kv("rho_family", sc.model.rho.name().to_string());
    kv("ds", sc.ds.to_string());
    kv("s_max", sc.s_max.to_string());
    kv("overflow", if sc.overflow == Overflow::Clip { "clip" } else { "error" }.into());
    kv("seed", sc.seed.to_string());
    kv("n", rc.n.to_string());
    kv("mreps", rc.mreps.to_string());
    kv("mode", rc.mode.to_string());
    kv("lambda_times", join(&rc.lambda_times));
    kv("percentiles", join(&[rc.percentiles.0, rc.percentiles.1]));
    kv("generator", if rc.generator == Generator::Grid { "grid" } else { "exact" }.into());
    kv("mesh_horizon", rc.mesh_horizon.to_string());
    kv("mesh_points", rc.mesh_points.to_string());
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_illustration() {
        let rc = parse_config("# nothing\n").unwrap();
        assert_eq!(rc.scenario.fingerprint(), Scenario::illustration().fingerprint());
        assert_eq!(rc.mreps, 200);
    }

    #[test]
    fn overrides_apply() {
        let rc = parse_config(
            "preset = special-case\nds = 0.005\noverflow = clip\nseed = 7\nmode = parametric\nmreps = 3\n",
        )
        .unwrap();
        assert_eq!(rc.scenario.ds, 0.005);
        assert_eq!(rc.scenario.seed, 7);
        assert_eq!(rc.mode, FitMode::Parametric);
        assert!(rc.scenario.params().is_special_case());
    }

    #[test]
    fn unknown_and_repeated_keys_fail() {
        let e = parse_config("d s = 1\n").unwrap_err();
        assert!(e.to_string().contains("unknown key"), "{e}");
        let e = parse_config("ds = 0.1\nds = 0.2\n").unwrap_err();
        assert!(e.to_string().contains("twice"), "{e}");
        assert!(parse_config("mreps = 0\n").is_err());
        assert!(parse_config("alpha = 1, 2\n").is_err());
    }

    #[test]
    fn render_round_trips() {
        for text in ["", "preset = special-case\ninitial_lm = 0.2, 0.3, 0.5\ninitial_hs = 0.5, 0.5\nrho_family = log10-count-power\n"] {
            let rc = parse_config(text).unwrap();
            let again = parse_config(&render_config(&rc)).unwrap();
            assert_eq!(again.scenario.fingerprint(), rc.scenario.fingerprint());
            assert_eq!(render_config(&again), render_config(&rc));
        }
    }

    #[test]
    fn every_key_is_rendered() {
        let text = render_config(&parse_config("").unwrap());
        for k in KEYS.iter().filter(|k| **k != "preset") {
            assert!(text.contains(&format!("{k} =")), "{k}");
        }
    }
}
