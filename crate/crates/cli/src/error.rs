use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

/// Everything that stops a run. [`CliError::exit_code`] maps failed
/// mathematical checks to 1 and configuration or IO problems to 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    ReadConfig { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invariant violated: {}", .0.invariant)]
    Math(Box<FailureReport>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Math(_) => 1,
            _ => 2,
        }
    }

    pub fn config(msg: impl std::fmt::Display) -> Self {
        CliError::Config(msg.to_string())
    }
}

/// Written as `failure.json` when a check fails.
#[derive(Debug, Clone, Serialize)]
pub struct FailureReport {
    pub subcommand: &'static str,
    pub invariant: String,
    pub details: serde_json::Value,
}

pub fn math_failure(subcommand: &'static str, invariant: impl Into<String>, details: serde_json::Value) -> CliError {
    CliError::Math(Box::new(FailureReport { subcommand, invariant: invariant.into(), details }))
}
