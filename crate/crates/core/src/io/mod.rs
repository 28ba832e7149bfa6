//! Scenario, log and export formats, the batch runner and the log verifier.

mod export;
mod log;
mod run;
mod scenario;
mod summary;
mod verify;

pub use export::{
    contact_rows, effector_rows, read_contacts_csv, read_effectors_csv, write_contacts_csv, write_effectors_csv,
    ContactRow, EffectorRow, CSV_FORMAT_VERSION,
};
pub use log::{read_log, LogHeader, LogWriter, LOG_FORMAT, LOG_VERSION};
pub use run::{load_named_model, replay, resolve_setup, run, verify_log, Rejection, ReplayOutcome, RunOutcome, RunSpec};
pub use scenario::{bundled_scenario, Scenario, ScenarioHeader, ScheduledCommand, BUNDLED_SCENARIOS};
pub use summary::{StepTime, Summary, SummaryBuilder, SwitchSummary};
pub use verify::{verify_records, Check, VerifyReport, VerifyTolerances, Violation};

use thiserror::Error;

use crate::runtime::RuntimeError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{what} line {line}: {message}")]
    Parse { what: &'static str, line: usize, message: String },
    #[error("schema: {0}")]
    Schema(String),
    #[error("input: {0}")]
    Input(String),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Write(#[from] std::io::Error),
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.display().to_string(), source })
}
