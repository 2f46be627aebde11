//! Experiment plans, orchestration and report output.

pub mod emit;
pub mod plan;
pub mod run;

pub use emit::{emit, read_bundle, render};
pub use plan::{parse_config, ExperimentPlan, OutputFormat, StudyKind, StudySpec, STUDY_KINDS};
pub use run::{run_plan, ReportBundle, StudyReport, Summary};
