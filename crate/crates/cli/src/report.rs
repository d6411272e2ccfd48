//! Running policies over a workload and writing the comparison report.

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use lfoc_core::{
    eval_solution, lfoc_partition, lfoc_plus_partition, search_optimal, search_optimal_with_workers, ucp_slowdown,
    AppClass, ClassifiedWorkload, ClusteringSolution, Distributor, EvalResult, PolicyConfig, SearchSpec,
};
use serde::Serialize;

use crate::manifest::WorkloadManifest;
use crate::{CliError, DEFAULT_ORACLE_MAX_APPS};

pub const CSV_HEADER: [&str; 10] = [
    "workload",
    "policy",
    "app",
    "class",
    "cluster_id",
    "cluster_ways",
    "est_slowdown",
    "unfairness",
    "stp",
    "solve_us",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Lfoc,
    LfocPlus,
    UcpSlowdownStrict,
    BestStatic,
    Best2c,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Lfoc,
        Policy::LfocPlus,
        Policy::UcpSlowdownStrict,
        Policy::BestStatic,
        Policy::Best2c,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Lfoc => "lfoc",
            Policy::LfocPlus => "lfoc-plus",
            Policy::UcpSlowdownStrict => "ucp-slowdown-strict",
            Policy::BestStatic => "best-static",
            Policy::Best2c => "best-2c",
        }
    }

    pub fn is_oracle(self) -> bool {
        matches!(self, Policy::BestStatic | Policy::Best2c)
    }

    /// Parses a comma-separated list such as `lfoc,best-2c`.
    pub fn parse_list(list: &str) -> Result<Vec<Policy>, CliError> {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Policy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| CliError::UnknownPolicy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for the oracles; `None` uses the global pool.
    pub workers: Option<usize>,
    pub oracle_max_apps: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: None,
            oracle_max_apps: DEFAULT_ORACLE_MAX_APPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyRun {
    pub policy: Policy,
    pub solution: ClusteringSolution,
    pub eval: EvalResult,
    pub solve_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub workload: String,
    pub nr_ways: usize,
    pub apps: Vec<String>,
    pub classes: Vec<AppClass>,
    pub runs: Vec<PolicyRun>,
}

/// Runs every requested policy over the manifest's workload, in the
/// order given, and evaluates each solution with the shared evaluator.
pub fn run(manifest: &WorkloadManifest, policies: &[Policy], opts: &RunOptions) -> Result<RunReport, CliError> {
    let workload = manifest.load()?;
    let n = workload.len();
    // refuse oversized oracle requests before spending time on anything
    if let Some(p) = policies.iter().find(|p| p.is_oracle()) {
        if n > opts.oracle_max_apps {
            return Err(CliError::OracleLimit {
                policy: p.to_string(),
                apps: n,
                limit: opts.oracle_max_apps,
            });
        }
    }

    let mut runs = Vec::with_capacity(policies.len());
    for &policy in policies {
        let start = Instant::now();
        let solution = solve(policy, &workload, manifest, opts)?;
        let solve_us = start.elapsed().as_secs_f64() * 1e6;
        let eval = eval_solution(&solution, workload.profiles())?;
        runs.push(PolicyRun {
            policy,
            solution,
            eval,
            solve_us,
        });
    }
    Ok(RunReport {
        workload: manifest.name.clone(),
        nr_ways: manifest.nr_ways,
        apps: workload.profiles().iter().map(|p| p.name().to_string()).collect(),
        classes: workload.classes().to_vec(),
        runs,
    })
}

fn solve(
    policy: Policy,
    workload: &ClassifiedWorkload,
    manifest: &WorkloadManifest,
    opts: &RunOptions,
) -> Result<ClusteringSolution, CliError> {
    let ways = manifest.nr_ways;
    let oracle = |spec: SearchSpec| match opts.workers {
        Some(w) => search_optimal_with_workers(workload.profiles(), &spec, w),
        None => search_optimal(workload.profiles(), &spec),
    };
    Ok(match policy {
        Policy::Lfoc => {
            let cfg = manifest.policy.apply(PolicyConfig::lfoc(ways), false);
            lfoc_partition(workload, &cfg, Distributor::UcpSlowdown)?
        }
        Policy::LfocPlus => {
            let cfg = manifest.policy.apply(PolicyConfig::lfoc_plus(ways), true);
            lfoc_plus_partition(workload, &cfg)?
        }
        Policy::UcpSlowdownStrict => {
            if workload.len() > ways {
                return Err(CliError::Infeasible(format!(
                    "{} applications cannot each get a way out of {ways}",
                    workload.len()
                )));
            }
            let w = ucp_slowdown(workload.profiles(), ways).map_err(|e| CliError::Report(e.to_string()))?;
            ClusteringSolution::strict(w.as_slice(), ways)
        }
        Policy::BestStatic => oracle(SearchSpec::best_static(ways))?.best,
        Policy::Best2c => oracle(SearchSpec::best_2c(ways))?.best,
    })
}

/// Writes one CSV row per (policy, application). With `timing` off the
/// `solve_us` column is written as 0 so the output is byte-stable.
pub fn write_csv<W: Write>(report: &RunReport, out: W, timing: bool) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Report(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(err)?;
    for run in &report.runs {
        let solve_us = if timing {
            format!("{:.3}", run.solve_us)
        } else {
            "0".to_string()
        };
        for (app, name) in report.apps.iter().enumerate() {
            let cluster_id = run
                .solution
                .cluster_of(app)
                .ok_or_else(|| CliError::Report(format!("{} left app {app} unassigned", run.policy)))?;
            w.write_record([
                report.workload.as_str(),
                run.policy.as_str(),
                name.as_str(),
                report.classes[app].as_str(),
                &cluster_id.to_string(),
                &run.solution.clusters[cluster_id].ways.to_string(),
                &run.eval.slowdowns[app].to_string(),
                &run.eval.unfairness.to_string(),
                &run.eval.stp.to_string(),
                &solve_us,
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| CliError::Report(e.to_string()))
}

/// Pretty-printed JSON dump of the whole report, solutions included.
pub fn write_json<W: Write>(report: &RunReport, mut out: W, timing: bool) -> Result<(), CliError> {
    let mut report = report.clone();
    if !timing {
        report.runs.iter_mut().for_each(|r| r.solve_us = 0.0);
    }
    serde_json::to_writer_pretty(&mut out, &report).map_err(|e| CliError::Report(e.to_string()))?;
    writeln!(out).map_err(|e| CliError::Report(e.to_string()))
}
