//! Semi-parametric estimation with nonparametric baseline hazards.

pub mod fit;
pub mod grid;
pub mod newton;
pub mod profile;

pub use fit::{
    fit_grid, fit_semiparametric, BlockDiagnostics, FitOptions, FitResult, LambdaPoint, RateEstimate,
    DEFAULT_LAMBDA_TIMES,
};
pub use grid::{build_grid, AgeGroup, EventGrid, Segment};
pub use newton::{newton_raphson, NewtonOptions, NewtonOutcome};
pub use profile::{
    breslow_lambda, eta_xi_given_theta, full_loglik, profile_r, profile_v, profile_w, risk_set_r, ProfileValue, RiskSet,
};
