//! File formats: dataset CSV, scenario text files, binary draws, run
//! manifests, and report CSVs.

pub mod dataset;
pub mod draws_file;
pub mod manifest;
pub mod reports;
pub mod scenario_file;
