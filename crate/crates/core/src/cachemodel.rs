//! Clustering solutions and their evaluation.
//!
//! Applications that share a partition split its space in proportion to
//! their miss rates. The split is found as the fixed point of
//!
//! ```text
//! e_i = ways * m_i(e_i) / sum_j m_j(e_j)
//! ```
//!
//! where `m_i` is the LLCMPKC curve of application `i` evaluated at its own
//! occupancy. Each member's slowdown is then read off its slowdown curve at
//! that occupancy. Memory-bandwidth contention is not modelled; callers can
//! add their own per-application term via [`eval_solution_with`].

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{AppProfile, ProfileError};

/// Weight of the new estimate in each damped fixed-point step.
pub const OCCUPANCY_DAMPING: f64 = 0.5;
/// Convergence bound on the largest per-application change in one step.
pub const OCCUPANCY_TOLERANCE: f64 = 1e-6;
pub const OCCUPANCY_MAX_ITERATIONS: usize = 100;
/// Lower bound applied to miss rates so that miss-free applications still
/// hold some space.
pub const MISS_FLOOR: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("occupancy fixed point did not converge after {iterations} iterations (last iterate {last:?})")]
    NoConvergence { iterations: usize, last: Vec<f64> },
    #[error("a cluster needs at least one member")]
    EmptyCluster,
    #[error("a cluster needs at least one way")]
    ZeroWays,
    #[error("invalid clustering solution: {0}")]
    InvalidSolution(String),
    #[error("curve pair needs two distinct applications, got {0} twice")]
    SamePair(usize),
    #[error("slowdown list is empty")]
    EmptySlowdowns,
    #[error("slowdown {0} is not positive")]
    NonPositiveSlowdown(f64),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// A group of applications sharing one partition of `ways` ways.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub ways: usize,
}

impl Cluster {
    /// Members are kept in ascending order.
    pub fn new(mut members: Vec<usize>, ways: usize) -> Self {
        members.sort_unstable();
        Cluster { members, ways }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClusteringSolution {
    pub clusters: Vec<Cluster>,
    pub nr_ways: usize,
}

impl ClusteringSolution {
    pub fn new(clusters: Vec<Cluster>, nr_ways: usize) -> Self {
        ClusteringSolution { clusters, nr_ways }
    }

    /// One cluster per application, with the given way counts.
    pub fn strict(ways: &[usize], nr_ways: usize) -> Self {
        let clusters = ways
            .iter()
            .enumerate()
            .map(|(app, &w)| Cluster::new(vec![app], w))
            .collect();
        ClusteringSolution { clusters, nr_ways }
    }

    pub fn total_ways(&self) -> usize {
        self.clusters.iter().map(|c| c.ways).sum()
    }

    /// Index of the cluster holding `app`.
    pub fn cluster_of(&self, app: usize) -> Option<usize> {
        self.clusters.iter().position(|c| c.members.contains(&app))
    }

    /// Checks the structural invariants against a workload of `n_apps`
    /// applications.
    pub fn validate(&self, n_apps: usize) -> Result<(), ModelError> {
        let mut seen = vec![false; n_apps];
        for cluster in &self.clusters {
            if cluster.members.is_empty() {
                return Err(ModelError::EmptyCluster);
            }
            if cluster.ways == 0 {
                return Err(ModelError::ZeroWays);
            }
            for &app in &cluster.members {
                match seen.get_mut(app) {
                    None => {
                        return Err(ModelError::InvalidSolution(format!(
                            "application {app} is not part of the {n_apps}-application workload"
                        )))
                    }
                    Some(true) => {
                        return Err(ModelError::InvalidSolution(format!(
                            "application {app} appears in more than one cluster"
                        )))
                    }
                    Some(flag) => *flag = true,
                }
            }
        }
        if let Some(app) = seen.iter().position(|s| !s) {
            return Err(ModelError::InvalidSolution(format!(
                "application {app} is not assigned to any cluster"
            )));
        }
        if self.total_ways() > self.nr_ways {
            return Err(ModelError::InvalidSolution(format!(
                "clusters use {} ways but only {} exist",
                self.total_ways(),
                self.nr_ways
            )));
        }
        if self.clusters.len() > self.nr_ways {
            return Err(ModelError::InvalidSolution(format!(
                "{} clusters exceed {} ways",
                self.clusters.len(),
                self.nr_ways
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub slowdowns: Vec<f64>,
    pub unfairness: f64,
    pub stp: f64,
}

impl EvalResult {
    pub fn from_slowdowns(slowdowns: Vec<f64>) -> Result<Self, ModelError> {
        let unfairness = unfairness(&slowdowns)?;
        let stp = stp(&slowdowns)?;
        Ok(EvalResult {
            slowdowns,
            unfairness,
            stp,
        })
    }

    /// Lexicographic order on (unfairness ascending, STP descending).
    pub fn objective_cmp(&self, other: &EvalResult) -> Ordering {
        objective_cmp((self.unfairness, self.stp), (other.unfairness, other.stp))
    }
}

/// Orders `(unfairness, stp)` pairs: lower unfairness first, then higher STP.
pub fn objective_cmp(a: (f64, f64), b: (f64, f64)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| b.1.total_cmp(&a.1))
}

/// max(slowdowns) / min(slowdowns).
pub fn unfairness(slowdowns: &[f64]) -> Result<f64, ModelError> {
    check_slowdowns(slowdowns)?;
    let max = slowdowns.iter().copied().fold(f64::MIN, f64::max);
    let min = slowdowns.iter().copied().fold(f64::MAX, f64::min);
    Ok(max / min)
}

/// System throughput: the sum of reciprocal slowdowns.
pub fn stp(slowdowns: &[f64]) -> Result<f64, ModelError> {
    check_slowdowns(slowdowns)?;
    Ok(slowdowns.iter().map(|s| 1.0 / s).sum())
}

fn check_slowdowns(slowdowns: &[f64]) -> Result<(), ModelError> {
    if slowdowns.is_empty() {
        return Err(ModelError::EmptySlowdowns);
    }
    match slowdowns.iter().find(|s| !s.is_finite() || **s <= 0.0) {
        Some(&bad) => Err(ModelError::NonPositiveSlowdown(bad)),
        None => Ok(()),
    }
}

/// Converged occupancy split and the number of steps it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    pub shares: Vec<f64>,
    pub iterations: usize,
}

fn clamp_ways(profile: &AppProfile, ways: f64) -> f64 {
    ways.clamp(1.0, profile.nr_ways() as f64)
}

/// Solves the occupancy fixed point for `profiles` sharing `ways` ways.
pub fn solve_occupancy(profiles: &[&AppProfile], ways: usize) -> Result<Occupancy, ModelError> {
    if profiles.is_empty() {
        return Err(ModelError::EmptyCluster);
    }
    if ways == 0 {
        return Err(ModelError::ZeroWays);
    }
    let total_ways = ways as f64;
    let n = profiles.len();
    if n == 1 {
        return Ok(Occupancy {
            shares: vec![total_ways],
            iterations: 0,
        });
    }

    let mut shares = vec![total_ways / n as f64; n];
    let mut misses = vec![0.0; n];
    for iteration in 1..=OCCUPANCY_MAX_ITERATIONS {
        for ((m, p), &e) in misses.iter_mut().zip(profiles).zip(&shares) {
            *m = p.llcmpkc_at(clamp_ways(p, e))?.max(MISS_FLOOR);
        }
        let total_misses: f64 = misses.iter().sum();
        let mut delta: f64 = 0.0;
        for (e, &m) in shares.iter_mut().zip(&misses) {
            let target = total_ways * m / total_misses;
            let next = (1.0 - OCCUPANCY_DAMPING) * *e + OCCUPANCY_DAMPING * target;
            delta = delta.max((next - *e).abs());
            *e = next;
        }
        if delta < OCCUPANCY_TOLERANCE {
            return Ok(Occupancy {
                shares,
                iterations: iteration,
            });
        }
    }
    Err(ModelError::NoConvergence {
        iterations: OCCUPANCY_MAX_ITERATIONS,
        last: shares,
    })
}

/// Effective ways each application holds when `profiles` share `ways` ways.
pub fn shared_occupancy(profiles: &[&AppProfile], ways: usize) -> Result<Vec<f64>, ModelError> {
    solve_occupancy(profiles, ways).map(|o| o.shares)
}

/// Estimated slowdown of each application when `profiles` share `ways` ways.
/// Occupancies are clamped to the range the curves cover.
pub fn shared_slowdowns(profiles: &[&AppProfile], ways: usize) -> Result<Vec<f64>, ModelError> {
    let shares = shared_occupancy(profiles, ways)?;
    profiles
        .iter()
        .zip(shares)
        .map(|(p, e)| Ok(p.slowdown_at(clamp_ways(p, e))?))
        .collect()
}

/// Slowdown curves of the two members of a shared partition.
pub type CurvePair = (Arc<[f64]>, Arc<[f64]>);

/// Memoized shared slowdown curves for application pairs.
///
/// Entries are keyed by the unordered pair of indices into the profile list
/// the cache is used with; a cache must not be reused across different
/// profile lists. Safe to share between threads: two workers computing the
/// same pair at once both produce identical curves.
#[derive(Debug, Default)]
pub struct SharedCurveCache {
    curves: Mutex<HashMap<(usize, usize), CurvePair>>,
    computations: AtomicUsize,
}

impl SharedCurveCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of pair curves computed (not served from the cache) so far.
    pub fn computations(&self) -> usize {
        self.computations.load(AtomicOrdering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.curves.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Slowdown curves `(S_i, S_j)` of applications `i` and `j` sharing one
/// partition, for partition sizes `1..=ways_max` (index `w - 1`).
pub fn get_scurves(
    i: usize,
    j: usize,
    ways_max: usize,
    profiles: &[AppProfile],
    cache: &SharedCurveCache,
) -> Result<CurvePair, ModelError> {
    if i == j {
        return Err(ModelError::SamePair(i));
    }
    let key = (i.min(j), i.max(j));
    let orient = |(lo, hi): CurvePair| if i < j { (lo, hi) } else { (hi, lo) };

    if let Some((lo, hi)) = cache.curves.lock().unwrap().get(&key) {
        if lo.len() >= ways_max {
            return Ok(orient((lo.clone(), hi.clone())));
        }
    }

    let pair = [&profiles[key.0], &profiles[key.1]];
    let mut lo = Vec::with_capacity(ways_max);
    let mut hi = Vec::with_capacity(ways_max);
    for w in 1..=ways_max {
        let s = shared_slowdowns(&pair, w)?;
        lo.push(s[0]);
        hi.push(s[1]);
    }
    let entry: CurvePair = (lo.into(), hi.into());
    cache.computations.fetch_add(1, AtomicOrdering::Relaxed);
    cache.curves.lock().unwrap().insert(key, entry.clone());
    Ok(orient(entry))
}

/// Evaluates a clustering: per-application slowdowns, unfairness and STP.
pub fn eval_solution(sol: &ClusteringSolution, profiles: &[AppProfile]) -> Result<EvalResult, ModelError> {
    eval_solution_with(sol, profiles, |_, _| 0.0)
}

/// Like [`eval_solution`], adding `extra(app, estimated_slowdown)` to each
/// application's cache-sharing slowdown. This is the hook for contention
/// sources the cache model does not cover, such as memory bandwidth.
pub fn eval_solution_with<F>(
    sol: &ClusteringSolution,
    profiles: &[AppProfile],
    extra: F,
) -> Result<EvalResult, ModelError>
where
    F: Fn(usize, f64) -> f64,
{
    sol.validate(profiles.len())?;
    let mut slowdowns = vec![0.0; profiles.len()];
    let mut members: Vec<usize> = Vec::new();
    for cluster in &sol.clusters {
        members.clear();
        members.extend_from_slice(&cluster.members);
        members.sort_unstable();
        let refs: Vec<&AppProfile> = members.iter().map(|&a| &profiles[a]).collect();
        for (&app, s) in members.iter().zip(shared_slowdowns(&refs, cluster.ways)?) {
            slowdowns[app] = s + extra(app, s);
        }
    }
    EvalResult::from_slowdowns(slowdowns)
}
