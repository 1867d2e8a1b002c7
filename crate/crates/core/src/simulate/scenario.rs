use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Baseline, EffectiveAgePolicy, JointModel, ModelParams, StateSpaces};

/// Distribution of one time-fixed covariate.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateDist {
    Bernoulli(f64),
    Normal { mean: f64, sd: f64 },
    Constant(f64),
}

impl CovariateDist {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CovariateDist::Bernoulli(p) => (rng.random::<f64>() < p) as u8 as f64,
            CovariateDist::Normal { mean, sd } => Normal::new(mean, sd).expect("checked sd").sample(rng),
            CovariateDist::Constant(c) => c,
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            CovariateDist::Bernoulli(p) => (0.0..=1.0).contains(&p),
            CovariateDist::Normal { mean, sd } => mean.is_finite() && sd >= 0.0 && sd.is_finite(),
            CovariateDist::Constant(c) => c.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid covariate law {self:?}")))
        }
    }
}

/// Law of the monitoring time `tau`.
#[derive(Debug, Clone, PartialEq)]
pub enum CensoringLaw {
    Exponential { mean: f64 },
    Fixed(f64),
}

impl CensoringLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CensoringLaw::Exponential { mean } => Exp::new(1.0 / mean).expect("checked mean").sample(rng),
            CensoringLaw::Fixed(t) => t,
        }
    }

    /// Rate `nu` of an exponential law.
    pub fn rate(&self) -> Option<f64> {
        match *self {
            CensoringLaw::Exponential { mean } => Some(1.0 / mean),
            CensoringLaw::Fixed(_) => None,
        }
    }
}

/// Initial-state law: independent marginals over the LM states and the
/// transient HS states.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    Uniform,
    /// `lm` over all marker states, `hs` over the transient HS states in order.
    Probabilities {
        lm: Vec<f64>,
        hs: Vec<f64>,
    },
}

fn categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

impl InitialLaw {
    /// Marginal probabilities `(p_W, p_V1)`.
    pub fn marginals(&self, spaces: &StateSpaces) -> (Vec<f64>, Vec<f64>) {
        match self {
            InitialLaw::Uniform => {
                let nw = spaces.n_lm();
                let nv = spaces.transient().len();
                (vec![1.0 / nw as f64; nw], vec![1.0 / nv as f64; nv])
            }
            InitialLaw::Probabilities { lm, hs } => (lm.clone(), hs.clone()),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, spaces: &StateSpaces, rng: &mut R) -> (usize, usize) {
        match self {
            InitialLaw::Uniform => {
                let w = rng.random_range(0..spaces.n_lm());
                let v = spaces.transient()[rng.random_range(0..spaces.transient().len())];
                (w, v)
            }
            InitialLaw::Probabilities { lm, hs } => (categorical(rng, lm), spaces.transient()[categorical(rng, hs)]),
        }
    }

    fn check(&self, spaces: &StateSpaces) -> Result<()> {
        if let InitialLaw::Probabilities { lm, hs } = self {
            for (name, p, n) in [("LM", lm, spaces.n_lm()), ("HS", hs, spaces.transient().len())] {
                if p.len() != n || p.iter().any(|x| !(*x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "{name} initial probabilities must be {n} non-negative numbers summing to 1"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// What the grid generator does with a channel whose interval probability
/// reaches 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Overflow {
    /// Stop with a configuration error naming the channel.
    #[default]
    Error,
    /// Treat the channel as certain to fire in that interval.
    Clip,
}

/// Everything needed to generate cohorts.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: JointModel,
    pub covariates: Vec<CovariateDist>,
    pub censoring: CensoringLaw,
    pub initial: InitialLaw,
    /// Grid width of the Bernoulli scheme.
    pub ds: f64,
    /// Horizon cap; histories reaching it are recorded as censored.
    pub s_max: f64,
    pub overflow: Overflow,
    pub seed: u64,
}

pub const DEFAULT_DS: f64 = 0.001;
pub const DEFAULT_S_MAX: f64 = 50.0;

impl Scenario {
    pub fn new(
        model: JointModel,
        covariates: Vec<CovariateDist>,
        censoring: CensoringLaw,
        initial: InitialLaw,
    ) -> Result<Self> {
        let s = Self {
            model,
            covariates,
            censoring,
            initial,
            ds: DEFAULT_DS,
            s_max: DEFAULT_S_MAX,
            overflow: Overflow::Error,
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ds > 0.0 && self.ds.is_finite()) {
            return Err(Error::Config(format!("ds must be positive, got {}", self.ds)));
        }
        if !(self.s_max >= 0.0) {
            return Err(Error::Config(format!("s_max must be non-negative, got {}", self.s_max)));
        }
        match self.censoring {
            CensoringLaw::Exponential { mean } if !(mean > 0.0 && mean.is_finite()) => {
                return Err(Error::Config(format!("censoring mean must be positive, got {mean}")))
            }
            CensoringLaw::Fixed(t) if !(t > 0.0) => {
                return Err(Error::Config(format!("censoring time must be positive, got {t}")))
            }
            _ => {}
        }
        for c in &self.covariates {
            c.check()?;
        }
        self.initial.check(&self.model.spaces)?;
        self.model.params.validate(&self.model.spaces, self.covariates.len())
    }

    pub fn p(&self) -> usize {
        self.covariates.len()
    }

    pub fn spaces(&self) -> &StateSpaces {
        &self.model.spaces
    }

    pub fn params(&self) -> &ModelParams {
        &self.model.params
    }

    pub fn with_ds(mut self, ds: f64) -> Self {
        self.ds = ds;
        self
    }

    pub fn with_overflow(mut self, overflow: Overflow) -> Self {
        self.overflow = overflow;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The simulated illustration: three Weibull risks, three marker states,
    /// health states {1, 2, 3} with 1 absorbing, `X1 ~ Bernoulli(1/2)`,
    /// `X2 ~ N(0, 1)`, `tau ~ Exp(mean 5)`, own-type effective age.
    pub fn illustration() -> Self {
        let spaces = StateSpaces::numbered(3, 3, &[0], 3).expect("fixed spaces");
        let model = JointModel::new(spaces, ModelParams::illustration(), EffectiveAgePolicy::PerfectRepairOwnType, 2)
            .expect("fixed parameters");
        Self::new(
            model,
            vec![CovariateDist::Bernoulli(0.5), CovariateDist::Normal { mean: 0.0, sd: 1.0 }],
            CensoringLaw::Exponential { mean: 5.0 },
            InitialLaw::Uniform,
        )
        .expect("valid illustration")
    }

    /// Poisson/Markov special case on the illustration's state spaces: one
    /// recurrent type with unit rate, the illustration's generators, no
    /// covariates, minimal-repair age and `tau ~ Exp(mean 5)`.
    pub fn special_case() -> Self {
        let spaces = StateSpaces::numbered(3, 3, &[0], 1).expect("fixed spaces");
        let il = ModelParams::illustration();
        let params = ModelParams {
            baseline: vec![Baseline::Constant { rate: 1.0 }],
            alpha: vec![1.0],
            eta: il.eta,
            xi: il.xi,
            theta_r: vec![0.0; 3],
            theta_w: vec![0.0; 2],
            theta_v: vec![0.0; 3],
        };
        let model = JointModel::new(spaces, params, EffectiveAgePolicy::MinimalRepair, 0).expect("fixed parameters");
        Self::new(model, vec![], CensoringLaw::Exponential { mean: 5.0 }, InitialLaw::Uniform)
            .expect("valid special case")
    }

    pub(crate) fn sample_covariates<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.covariates.iter().map(|c| c.sample(rng)).collect()
    }

    pub(crate) fn sample_tau<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.censoring.sample(rng)
    }

    pub(crate) fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        self.initial.sample(&self.model.spaces, rng)
    }

    /// SHA-256 over a canonical rendering of the scenario, seed included.
    pub fn fingerprint(&self) -> String {
        let m = &self.model;
        let text = format!(
            "{:?}|{:?}|{:?}|{}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{}",
            m.spaces,
            m.params,
            m.age_policy,
            m.rho.name(),
            self.covariates,
            self.censoring,
            self.initial,
            self.ds,
            self.s_max,
            self.overflow,
            self.seed
        );
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn illustration_validates() {
        let s = Scenario::illustration();
        assert_eq!(s.p(), 2);
        assert_eq!(s.censoring.rate(), Some(0.2));
    }

    #[test]
    fn rejects_bad_grid() {
        let mut s = Scenario::illustration();
        s.ds = 0.0;
        assert!(s.validate().is_err());
        s.ds = 0.01;
        s.initial = InitialLaw::Probabilities { lm: vec![0.5, 0.5, 0.5], hs: vec![0.5, 0.5] };
        assert!(s.validate().is_err());
    }

    #[test]
    fn fingerprint_tracks_seed() {
        let a = Scenario::illustration();
        let b = Scenario::illustration().with_seed(1);
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), Scenario::illustration().fingerprint());
    }
}
