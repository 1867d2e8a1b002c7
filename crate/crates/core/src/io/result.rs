//! Versioned JSON result files and CSV tables.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::harness::{CorrelationCurves, FitMode, StudySummary};
use crate::model::{baseline_survivor, EffectiveAgePolicy, StepFunction};
use crate::parametric::ParametricFit;
use crate::semiparam::{BlockDiagnostics, FitResult, LambdaPoint, NewtonOptions};

pub const SCHEMA_VERSION: u32 = 1;

/// Settings a result was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub mode: FitMode,
    pub age_policy: String,
    pub rho_family: String,
    pub lambda_times: Vec<f64>,
    pub s_star: Option<f64>,
    pub t_star: Option<f64>,
    pub newton: NewtonOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub name: String,
    pub value: f64,
    pub se: Option<f64>,
    /// Occurrence-exposure term only, for transition rates.
    pub se_naive: Option<f64>,
    /// Value under the Wald null: 1 for the `alpha` parameters, 0 otherwise.
    pub null: f64,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
}

impl EstimateRow {
    pub fn new(name: &str, value: f64, se: Option<f64>, se_naive: Option<f64>) -> Self {
        let null = if name.starts_with("alpha_") { 1.0 } else { 0.0 };
        let z = se.filter(|s| *s > 0.0).map(|s| (value - null) / s);
        Self { name: name.to_string(), value, se, se_naive, null, z, p_value: z.map(wald_p) }
    }
}

/// Two-sided normal p-value of a Wald statistic.
pub fn wald_p(z: f64) -> f64 {
    let n = Normal::standard();
    2.0 * n.sf(z.abs())
}

/// `Lambda_0q` and the product-integral survivor at every jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTable {
    /// 1-based recurrent type.
    pub risk: usize,
    /// `(t, Lambda(t))` after each jump.
    pub cumulative: Vec<(f64, f64)>,
    /// `(t, S(t))` after each jump.
    pub survivor: Vec<(f64, f64)>,
}

impl BaselineTable {
    pub fn from_step(risk: usize, f: &StepFunction) -> (Self, bool) {
        let (s, warned) = baseline_survivor(f);
        let survivor = s.times.into_iter().zip(s.values).collect();
        (Self { risk, cumulative: f.table(), survivor }, warned)
    }

    /// Rebuilds the cumulative hazard from its table.
    pub fn step(&self) -> Result<StepFunction> {
        let mut prev = 0.0;
        let (t, d) = self
            .cumulative
            .iter()
            .map(|&(t, v)| {
                let d = v - prev;
                prev = v;
                (t, d)
            })
            .unzip();
        StepFunction::new(t, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub schema_version: u32,
    pub generator: String,
    pub settings: FitSettings,
    /// SHA-256 of the dataset text the fit read.
    pub data_fingerprint: String,
    /// Fingerprint of the simulating scenario, when the dataset carries one.
    pub scenario_fingerprint: String,
    pub n_units: usize,
    pub estimates: Vec<EstimateRow>,
    pub baselines: Vec<BaselineTable>,
    pub lambda_points: Vec<LambdaPoint>,
    pub diagnostics: Vec<BlockDiagnostics>,
    pub warnings: Vec<String>,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl ResultFile {
    fn empty(settings: FitSettings, data_fingerprint: String, scenario_fingerprint: String, n_units: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            generator: concat!("rcrjoint ", env!("CARGO_PKG_VERSION")).to_string(),
            settings,
            data_fingerprint,
            scenario_fingerprint,
            n_units,
            estimates: vec![],
            baselines: vec![],
            lambda_points: vec![],
            diagnostics: vec![],
            warnings: vec![],
        }
    }

    pub fn from_semiparametric(
        fit: &FitResult,
        settings: FitSettings,
        data_fingerprint: String,
        scenario_fingerprint: String,
        n_units: usize,
    ) -> Self {
        let mut r = Self::empty(settings, data_fingerprint, scenario_fingerprint, n_units);
        r.estimates = fit.estimates.iter().map(|e| EstimateRow::new(&e.name, e.value, e.se, None)).collect();
        r.estimates.extend(
            fit.eta_estimates
                .iter()
                .chain(&fit.xi_estimates)
                .map(|e| EstimateRow::new(&e.name, e.value, e.se, e.se_naive)),
        );
        for (q, f) in fit.lambda.iter().enumerate() {
            let (t, warned) = BaselineTable::from_step(q + 1, f);
            if warned {
                r.warnings.push(format!("Lambda_{} has a jump of 1 or more; survivor truncated at 0", q + 1));
            }
            r.baselines.push(t);
        }
        r.lambda_points = fit.lambda_points.clone();
        r.diagnostics = fit.blocks.clone();
        for b in &fit.blocks {
            if !b.converged {
                r.warnings.push(format!("{} block did not converge (gradient norm {:e})", b.block, b.gradient_norm));
            }
            if !b.dropped.is_empty() {
                r.warnings.push(format!(
                    "{} block: no events for {}; held at no-effect values",
                    b.block,
                    b.dropped.join(", ")
                ));
            }
        }
        r
    }

    pub fn from_parametric(
        fit: &ParametricFit,
        settings: FitSettings,
        data_fingerprint: String,
        scenario_fingerprint: String,
        n_units: usize,
    ) -> Self {
        let mut r = Self::empty(settings, data_fingerprint, scenario_fingerprint, n_units);
        r.estimates = fit
            .lambda
            .iter()
            .chain(&fit.eta_estimates)
            .chain(&fit.xi_estimates)
            .map(|e| EstimateRow::new(&e.name, e.value, e.se, None))
            .collect();
        for (q, e) in fit.lambda.iter().enumerate() {
            let times = &r.settings.lambda_times;
            r.baselines.push(BaselineTable {
                risk: q + 1,
                cumulative: times.iter().map(|&t| (t, e.value * t)).collect(),
                survivor: times.iter().map(|&t| (t, (-e.value * t).exp())).collect(),
            });
            for &t in times {
                let se = e.se.map(|s| s * t);
                r.lambda_points.push(LambdaPoint { risk: q, t, value: e.value * t, se_naive: se.unwrap_or(0.0), se });
            }
        }
        r
    }

    pub fn estimate(&self, name: &str) -> Option<&EstimateRow> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        match v.get("schema_version").and_then(|s| s.as_u64()) {
            Some(s) if s == SCHEMA_VERSION as u64 => Ok(serde_json::from_value(v)?),
            Some(s) => {
                Err(Error::Config(format!("result schema version {s} is not supported (expected {SCHEMA_VERSION})")))
            }
            None => Err(Error::Config("result file has no schema_version".into())),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn settings(mode: FitMode, age_policy: EffectiveAgePolicy, rho_family: &str, lambda_times: &[f64]) -> FitSettings {
    FitSettings {
        mode,
        age_policy: age_policy.to_string(),
        rho_family: rho_family.to_string(),
        lambda_times: lambda_times.to_vec(),
        s_star: None,
        t_star: None,
        newton: NewtonOptions::default(),
    }
}

/// Shortest round-trip text, switching to exponent form for extreme magnitudes.
fn num(x: f64) -> String {
    if x != 0.0 && x.is_finite() && (x.abs() < 1e-5 || x.abs() >= 1e16) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Study summary in the column layout `name, true, mean, sd, ase, pl, pu`
/// followed by the alternative ASE, coverage and replication count.
pub fn write_summary_csv<W: Write>(w: W, s: &StudySummary) -> Result<()> {
    let mut c = csv_writer(w);
    c.write_record(["name", "true", "mean", "sd", "ase", "pl", "pu", "ase_alt", "coverage", "count"])
        .map_err(csv_err)?;
    for r in &s.rows {
        c.write_record([
            r.name.clone(),
            opt(r.truth),
            num(r.mean),
            opt(r.sd),
            opt(r.ase),
            num(r.lower),
            num(r.upper),
            opt(r.ase_alt),
            opt(r.coverage),
            r.count.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(c)
}

pub fn write_estimates_csv<W: Write>(w: W, r: &ResultFile) -> Result<()> {
    let mut c = csv_writer(w);
    c.write_record(["name", "value", "se", "se_naive", "null", "z", "p_value"]).map_err(csv_err)?;
    for e in &r.estimates {
        c.write_record([
            e.name.clone(),
            num(e.value),
            opt(e.se),
            opt(e.se_naive),
            num(e.null),
            opt(e.z),
            opt(e.p_value),
        ])
        .map_err(csv_err)?;
    }
    finish(c)
}

/// `risk, t, cumulative, survivor` rows of every baseline.
pub fn write_baselines_csv<W: Write>(w: W, tables: &[BaselineTable]) -> Result<()> {
    let mut c = csv_writer(w);
    c.write_record(["risk", "t", "cumulative", "survivor"]).map_err(csv_err)?;
    for b in tables {
        for (k, &(t, v)) in b.cumulative.iter().enumerate() {
            let s = b.survivor.get(k).map(|p| num(p.1)).unwrap_or_else(|| "0".into());
            c.write_record([b.risk.to_string(), num(t), num(v), s]).map_err(csv_err)?;
        }
    }
    finish(c)
}

/// Long format `s, a, b, correlation`, leaving undefined entries empty.
pub fn write_correlations_csv<W: Write>(w: W, cc: &CorrelationCurves) -> Result<()> {
    let mut c = csv_writer(w);
    c.write_record(["s", "a", "b", "correlation"]).map_err(csv_err)?;
    for (k, s) in cc.mesh.iter().enumerate() {
        for a in 0..cc.labels.len() {
            for b in a + 1..cc.labels.len() {
                c.write_record([num(*s), cc.labels[a].clone(), cc.labels[b].clone(), opt(cc.values[k][a][b])])
                    .map_err(csv_err)?;
            }
        }
    }
    finish(c)
}
