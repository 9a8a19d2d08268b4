//! CSV interchange, simulation config files and run manifests.

mod config;
mod manifest;
mod tables;

pub use config::{parse_sim_config, SimulationPlan};
pub use manifest::{manifest_path, InputDigest, RunManifest};
pub use tables::{
    format_f64, read_dataset, read_estimates, write_estimates, write_penalized, write_raw_records,
    write_estimate_report, write_report, EstimateRow, EstimateTable, ExtraColumns,
};
