//! Domain types and the intensity model.

pub mod age;
pub mod history;
pub mod intensity;
pub mod params;
pub mod rho;
pub mod states;
pub mod step;

pub use age::EffectiveAgePolicy;
pub use history::{EndReason, Event, EventKind, StateSnapshot, UnitHistory};
pub use intensity::{design_row_r, design_row_v, design_row_w, Channel, JointModel};
pub use params::{check_generator, generator_from_rates, Baseline, ModelParams};
pub use rho::{LogCountPower, RhoFamily};
pub use states::{iota, StateSpaces};
pub use step::{baseline_survivor, StepFunction, SurvivorCurve};
