use std::fmt::Debug;

use crate::error::{Error, Result};

/// Effect of accumulated recurrent events on the type-`q` intensity.
///
/// Implementations receive the full count vector `N^R(s-)` and a scalar
/// parameter `alpha_q > 0`; the estimators need `log rho` and its first two
/// derivatives in `alpha_q`.
pub trait RhoFamily: Debug + Send + Sync {
    fn name(&self) -> &str;
    fn log_rho(&self, q: usize, counts: &[u32], alpha: f64) -> f64;
    fn d_log_rho(&self, q: usize, counts: &[u32], alpha: f64) -> f64;
    fn d2_log_rho(&self, q: usize, counts: &[u32], alpha: f64) -> f64;

    fn rho(&self, q: usize, counts: &[u32], alpha: f64) -> f64 {
        self.log_rho(q, counts, alpha).exp()
    }
}

/// `rho_q(N; alpha_q) = alpha_q^{log_b(1 + N_q)}` using only the own-type count.
///
/// The default base is `e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogCountPower {
    ln_base: f64,
}

impl Default for LogCountPower {
    fn default() -> Self {
        Self { ln_base: 1.0 }
    }
}

impl LogCountPower {
    pub fn natural() -> Self {
        Self::default()
    }

    pub fn with_base(base: f64) -> Result<Self> {
        if !(base > 1.0 && base.is_finite()) {
            return Err(Error::Config(format!("logarithm base must exceed 1, got {base}")));
        }
        Ok(Self { ln_base: base.ln() })
    }

    fn c(&self, q: usize, counts: &[u32]) -> f64 {
        (counts[q] as f64).ln_1p() / self.ln_base
    }
}

impl RhoFamily for LogCountPower {
    fn name(&self) -> &str {
        if self.ln_base == 1.0 {
            "log-count-power"
        } else if self.ln_base == 10f64.ln() {
            "log10-count-power"
        } else {
            "log-count-power-custom"
        }
    }
    fn log_rho(&self, q: usize, counts: &[u32], alpha: f64) -> f64 {
        let c = self.c(q, counts);
        if c == 0.0 {
            0.0
        } else {
            c * alpha.ln()
        }
    }
    fn d_log_rho(&self, q: usize, counts: &[u32], alpha: f64) -> f64 {
        self.c(q, counts) / alpha
    }
    fn d2_log_rho(&self, q: usize, counts: &[u32], alpha: f64) -> f64 {
        -self.c(q, counts) / (alpha * alpha)
    }
}

/// Checked evaluation of a rho family.
pub fn rho(family: &dyn RhoFamily, q: usize, counts: &[u32], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("rho parameter must be positive, got {alpha}")));
    }
    if q >= counts.len() {
        return Err(Error::Domain(format!("event type {q} out of range")));
    }
    Ok(family.rho(q, counts, alpha))
}

/// Looks up a built-in family by name.
pub fn family_by_name(name: &str) -> Result<std::sync::Arc<dyn RhoFamily>> {
    match name {
        "log-count-power" => Ok(std::sync::Arc::new(LogCountPower::natural())),
        "log10-count-power" => Ok(std::sync::Arc::new(LogCountPower::with_base(10.0)?)),
        other => Err(Error::Config(format!("unknown rho family {other:?}"))),
    }
}
