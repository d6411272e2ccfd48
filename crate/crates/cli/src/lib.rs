//! Experiment harness around `lfoc_core`: workload manifests, policy runs
//! with CSV/JSON reports, solver timing and profile classification.

pub mod bench;
pub mod manifest;
pub mod report;

use std::path::PathBuf;

use lfoc_core::optimal::SearchError;
use lfoc_core::profile::CRITICAL_SLOWDOWN;
use lfoc_core::{critical_size, load_profile, AppClass, ClassifierConfig, ModelError, PolicyError, ProfileError};
use thiserror::Error;

pub use bench::{bench, BenchSummary};
pub use manifest::{Entry, PolicyOverrides, SyntheticEntry, WorkloadManifest};
pub use report::{run, write_csv, write_json, Policy, PolicyRun, RunOptions, RunReport};

/// Default cap on workload size for the exhaustive oracles.
pub const DEFAULT_ORACLE_MAX_APPS: usize = 8;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
    #[error("oracle {policy} limited to {limit} applications, workload has {apps} (raise --oracle-max-apps)")]
    OracleLimit { policy: String, apps: usize, limit: usize },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Policy(PolicyError),
    #[error(transparent)]
    Search(SearchError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("report: {0}")]
    Report(String),
    #[error("{0}")]
    Usage(String),
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            e => CliError::Policy(e),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Infeasible { .. } | SearchError::TooLarge { .. } => CliError::Infeasible(e.to_string()),
            e => CliError::Search(e),
        }
    }
}

impl CliError {
    /// Process exit code: 2 for infeasible or oversized requests, 1 for
    /// everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::OracleLimit { .. } | CliError::Infeasible(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub name: String,
    pub class: AppClass,
    pub critical_size: usize,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} (critical size {})",
            self.name, self.class, self.critical_size
        )
    }
}

pub fn classify_cmd(
    path: impl AsRef<std::path::Path>,
    nr_ways: usize,
    cfg: &ClassifierConfig,
) -> Result<Classification, CliError> {
    cfg.validate()?;
    let profile = load_profile(path, nr_ways)?;
    Ok(Classification {
        name: profile.name().to_string(),
        class: lfoc_core::classify(&profile, cfg),
        critical_size: critical_size(&profile, CRITICAL_SLOWDOWN),
    })
}
