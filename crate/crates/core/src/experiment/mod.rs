//! JSON-configured experiments: each run writes `summary.json` plus CSV
//! tables and field files into an output directory.

mod config;
mod run;
mod study;

pub use config::{
    BlowupConfig, ChainQuery, DomainSpec, Experiment, ExperimentConfig, ExponentConfig, ExponentTarget, FieldSource,
    MaskSpec, MeasureConfig, MembershipConfig, NtaConfig, OracleVerifyConfig, Solve1dConfig, Solve2dConfig, StudyCase,
    StudyConfig,
};
pub use run::{discrete_pairing, error_json, exit_code, run, RunReport};
pub use study::{convergence_study, observed_order, validate_ladder, StudyRow, StudyTable};
