//! Experiment orchestration: datasets, studies, the sensitivity grid,
//! real-data ingestion and report tables.

pub mod config;
pub mod dataset;
pub mod ingest;
pub mod report;
pub mod scenarios;
pub mod sensitivity;
pub mod study;

pub use config::Config;
pub use dataset::{detect_inflection, generate_dataset, Dataset, DatasetMeta};
pub use ingest::{ingest_real, read_daily, read_weekly_csv, write_weekly_csv, DailyCounts};
pub use report::{box_summary, BoxStats, Parameter};
pub use scenarios::{Scenario, ScenarioTable};
pub use sensitivity::{sensitivity_grid, SensitivityRow};
pub use study::{run_study, run_study_on, run_study_on_series, Method, StudyConfig, StudyOutput, StudyRow};
