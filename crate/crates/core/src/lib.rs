//! Simulation and estimation for a joint model of recurrent competing risks,
//! a discrete longitudinal marker and a health-status process with absorbing
//! states.

// `!(x > 0.0)` is deliberate: it rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod parametric;
pub mod semiparam;
pub mod simulate;

pub use error::{Error, Result};
