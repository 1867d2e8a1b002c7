//! Monte-Carlo studies and descriptive summaries.

pub mod correlation;
pub mod processes;
pub mod study;

pub use correlation::{correlation_trajectories, default_mesh, mesh, z_labels, z_vector, CorrelationCurves};
pub use processes::{summarize_processes, Moments, ProcessSummary, RiskStats, StateStats};
pub use study::{lambda_name, run_study, truth, FitMode, StudyConfig, StudySummary, SummaryRow};
