//! Cohort generation.

pub mod engine;
pub mod scenario;

pub use engine::{
    derive_seed, simulate_cohort, simulate_cohort_with, simulate_unit_exact_special, simulate_unit_grid, unit_rng,
    Cohort, Generator,
};
pub use scenario::{CensoringLaw, CovariateDist, InitialLaw, Overflow, Scenario};
