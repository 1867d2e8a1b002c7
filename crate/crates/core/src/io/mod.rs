//! File formats: datasets, configuration, results and CSV tables.

pub mod config;
pub mod dataset;
pub mod result;

pub use config::{parse_config, read_config, render_config, RunConfig};
pub use dataset::{format_dataset, parse_dataset, read_dataset, write_dataset, Dataset};
pub use result::{
    wald_p, write_baselines_csv, write_correlations_csv, write_estimates_csv, write_summary_csv, BaselineTable,
    EstimateRow, FitSettings, ResultFile, SCHEMA_VERSION,
};
