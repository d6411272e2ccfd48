//! LFOC and LFOC+ cache-clustering policies.
//!
//! Both policies isolate streaming applications in one or two tiny
//! partitions, give the rest of the cache to the cache-sensitive
//! applications, and spread light-sharing applications over the resulting
//! clusters. They differ in how the sensitive applications split their
//! space: LFOC uses a strict lookahead split over slowdown curves, while
//! LFOC+ starts from that split and then transfers ways and pairs
//! applications up into shared two-member clusters when that lowers the
//! estimated unfairness. LFOC+ also folds two one-way streaming partitions
//! into a single two-way partition.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cachemodel::{
    get_scurves, objective_cmp, Cluster, ClusteringSolution, EvalResult, ModelError, SharedCurveCache,
};
use crate::lookahead::{ucp_slowdown, LookaheadError, WayAssignment};
use crate::profile::{classify, AppClass, AppProfile, ClassifierConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("invalid policy configuration: {0}")]
    Config(String),
    #[error("workload does not fit: {available} ways left for {sensitive} cache-sensitive applications")]
    Infeasible { available: usize, sensitive: usize },
    #[error("workload has {profiles} profiles but {classes} classes")]
    ClassCount { profiles: usize, classes: usize },
    #[error("profiles cover different way counts ({0} vs {1})")]
    MixedWays(usize, usize),
    #[error("pair clustering needs at least one application")]
    NoApplications,
    #[error(transparent)]
    Lookahead(#[from] LookaheadError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub nr_ways: usize,
    /// Streaming applications per streaming partition before a second one
    /// is opened.
    pub max_str_parts: usize,
    pub gaps_per_str: usize,
    /// Ways given to each streaming partition.
    pub ways_str: usize,
    /// Fold two streaming partitions into one of twice the size.
    pub merge_streaming: bool,
}

impl PolicyConfig {
    pub fn lfoc(nr_ways: usize) -> Self {
        PolicyConfig {
            nr_ways,
            max_str_parts: 5,
            gaps_per_str: 3,
            ways_str: 1,
            merge_streaming: false,
        }
    }

    pub fn lfoc_plus(nr_ways: usize) -> Self {
        PolicyConfig {
            merge_streaming: true,
            ..Self::lfoc(nr_ways)
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.nr_ways < 2 {
            return Err(PolicyError::Config("nr_ways must be at least 2".into()));
        }
        if self.ways_str == 0 {
            return Err(PolicyError::Config("ways_str must be at least 1".into()));
        }
        if self.max_str_parts == 0 {
            return Err(PolicyError::Config("max_str_parts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Workload split into streaming, cache-sensitive and light-sharing sets.
/// Index lists are in workload order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedWorkload {
    profiles: Vec<AppProfile>,
    classes: Vec<AppClass>,
    streaming: Vec<usize>,
    sensitive: Vec<usize>,
    light: Vec<usize>,
}

impl ClassifiedWorkload {
    pub fn new(profiles: Vec<AppProfile>, classes: Vec<AppClass>) -> Result<Self, PolicyError> {
        if profiles.len() != classes.len() {
            return Err(PolicyError::ClassCount {
                profiles: profiles.len(),
                classes: classes.len(),
            });
        }
        if let Some(first) = profiles.first() {
            if let Some(p) = profiles.iter().find(|p| p.nr_ways() != first.nr_ways()) {
                return Err(PolicyError::MixedWays(first.nr_ways(), p.nr_ways()));
            }
        }
        let pick = |class| {
            classes
                .iter()
                .enumerate()
                .filter(|(_, &c)| c == class)
                .map(|(i, _)| i)
                .collect()
        };
        Ok(ClassifiedWorkload {
            streaming: pick(AppClass::Streaming),
            sensitive: pick(AppClass::Sensitive),
            light: pick(AppClass::LightSharing),
            profiles,
            classes,
        })
    }

    /// Classifies every profile with `cfg`.
    pub fn classify(profiles: Vec<AppProfile>, cfg: &ClassifierConfig) -> Result<Self, PolicyError> {
        let classes = profiles.iter().map(|p| classify(p, cfg)).collect();
        Self::new(profiles, classes)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profiles(&self) -> &[AppProfile] {
        &self.profiles
    }

    pub fn classes(&self) -> &[AppClass] {
        &self.classes
    }

    pub fn streaming(&self) -> &[usize] {
        &self.streaming
    }

    pub fn sensitive(&self) -> &[usize] {
        &self.sensitive
    }

    pub fn light(&self) -> &[usize] {
        &self.light
    }
}

/// How the cache-sensitive applications split the space left after the
/// streaming partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distributor {
    UcpSlowdown,
    PairClustering,
}

/// LFOC clustering with the given distributor for sensitive applications.
pub fn lfoc_partition(
    workload: &ClassifiedWorkload,
    cfg: &PolicyConfig,
    distributor: Distributor,
) -> Result<ClusteringSolution, PolicyError> {
    cfg.validate()?;
    let all: Vec<usize> = (0..workload.len()).collect();
    if workload.sensitive.is_empty() {
        return Ok(ClusteringSolution::new(
            vec![Cluster::new(all, cfg.nr_ways)],
            cfg.nr_ways,
        ));
    }

    let mut clusters: Vec<Cluster> = Vec::new();
    let mut streaming_clusters: Vec<usize> = Vec::new();

    // Step 1: streaming partitions
    let n_st = workload.streaming.len();
    let (parts, per_part) = if n_st > 0 {
        let parts = 2.min(n_st.div_ceil(cfg.max_str_parts));
        (parts, n_st.div_ceil(parts))
    } else {
        (0, 0)
    };
    let used = parts * cfg.ways_str;
    if cfg.merge_streaming && parts == 2 {
        clusters.push(Cluster::new(workload.streaming.clone(), 2 * cfg.ways_str));
        streaming_clusters.push(0);
    } else {
        for chunk in workload.streaming.chunks(per_part.max(1)).take(parts) {
            streaming_clusters.push(clusters.len());
            clusters.push(Cluster::new(chunk.to_vec(), cfg.ways_str));
        }
    }

    // Step 2: sensitive applications share what is left
    let available = cfg.nr_ways.saturating_sub(used);
    let n_cs = workload.sensitive.len();
    if available < n_cs || used > cfg.nr_ways {
        return Err(PolicyError::Infeasible {
            available,
            sensitive: n_cs,
        });
    }
    let cs_profiles: Vec<AppProfile> = workload
        .sensitive
        .iter()
        .map(|&i| workload.profiles[i].clone())
        .collect();
    let local = match distributor {
        Distributor::UcpSlowdown => {
            let w = ucp_slowdown(&cs_profiles, available)?;
            ClusteringSolution::strict(w.as_slice(), available)
        }
        Distributor::PairClustering => pair_clustering(&cs_profiles, available)?,
    };
    for c in local.clusters {
        let members = c.members.iter().map(|&l| workload.sensitive[l]).collect();
        clusters.push(Cluster::new(members, c.ways));
    }

    // Step 3: light-sharing applications
    let mut light: VecDeque<usize> = workload.light.iter().copied().collect();
    for &ci in &streaming_clusters {
        let gaps = per_part as isize - (clusters[ci].members.len() * cfg.gaps_per_str) as isize;
        if gaps > 0 {
            for _ in 0..gaps {
                let Some(app) = light.pop_front() else { break };
                clusters[ci].members.push(app);
            }
        }
    }
    let targets: Vec<usize> = (0..clusters.len())
        .filter(|i| !streaming_clusters.contains(i))
        .collect();
    for (slot, app) in light.into_iter().enumerate() {
        clusters[targets[slot % targets.len()]].members.push(app);
    }
    for c in &mut clusters {
        c.members.sort_unstable();
    }
    Ok(ClusteringSolution::new(clusters, cfg.nr_ways))
}

/// LFOC+: LFOC driven by pair clustering. Pass a config with
/// `merge_streaming` set (see [`PolicyConfig::lfoc_plus`]) to fold the
/// streaming partitions.
pub fn lfoc_plus_partition(
    workload: &ClassifiedWorkload,
    cfg: &PolicyConfig,
) -> Result<ClusteringSolution, PolicyError> {
    lfoc_partition(workload, cfg, Distributor::PairClustering)
}

/// Strict split from lookahead over slowdown curves, refined by one-way
/// transfers towards the most slowed-down application.
///
/// Each round picks the application with the highest slowdown; if it has
/// already received an extra way the refinement stops. Otherwise the donor
/// with the lowest cost gives it one way, where a donor is excluded when
/// it already received a way, holds a single way, or would end up slower
/// than the receiver. Transfers that would not lower the receiver's
/// slowdown are not made.
pub fn initial_partitioning(cs: &[AppProfile], total_ways: usize) -> Result<WayAssignment, PolicyError> {
    let mut w = ucp_slowdown(cs, total_ways)?.0;
    let n = cs.len();
    let s = |app: usize, ways: usize| cs[app].slowdown_with(ways);
    let mut extra_way = vec![false; n];

    for _ in 0..n {
        let i = argmax_slowdown(cs, &w);
        if extra_way[i] {
            break;
        }
        let wi = w[i];
        if wi + 1 > cs[i].nr_ways() {
            continue;
        }
        let (now, next) = (s(i, wi), s(i, wi + 1));
        if next >= now {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for j in 0..n {
            let wj = w[j];
            if extra_way[j] || j == i || wj == 1 || s(j, wj - 1) > next {
                continue;
            }
            let cost = (next - now) - (s(j, wj) - s(j, wj - 1));
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, j));
            }
        }
        if let Some((_, k)) = best {
            w[i] += 1;
            w[k] -= 1;
            extra_way[i] = true;
        }
    }
    Ok(WayAssignment(w))
}

/// Application with the highest slowdown under `w`; lowest index on ties.
fn argmax_slowdown(cs: &[AppProfile], w: &[usize]) -> usize {
    let mut best = 0;
    for app in 1..cs.len() {
        if cs[app].slowdown_with(w[app]) > cs[best].slowdown_with(w[best]) {
            best = app;
        }
    }
    best
}

/// Cost of merging two one-way clusters `(i, j)` into one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeCost {
    pub cost: f64,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSolution {
    pub solution: ClusteringSolution,
    pub ways: Vec<usize>,
    pub unfairness: f64,
    pub stp: f64,
}

/// Working state of one pair-clustering run.
#[derive(Debug)]
pub struct PairClusteringState<'a> {
    pub solutions: Vec<ScoredSolution>,
    pub cost1w: Vec<MergeCost>,
    pub merged: Vec<bool>,
    pub cache: &'a SharedCurveCache,
}

impl<'a> PairClusteringState<'a> {
    pub fn new(n: usize, cache: &'a SharedCurveCache) -> Self {
        PairClusteringState {
            solutions: Vec::new(),
            cost1w: Vec::new(),
            merged: vec![false; n],
            cache,
        }
    }
}

/// Best merge found for one application. When neither `a1` nor `a2` is the
/// application itself, the pair is two one-way clusters to fold together
/// so the freed way can go to it (T2); otherwise the two clusters merge
/// outright (T3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeChoice {
    pub cost: f64,
    pub a1: usize,
    pub a2: usize,
}

impl MergeChoice {
    pub fn is_steal(&self, app: usize) -> bool {
        self.a1 != app && self.a2 != app
    }
}

/// Cheapest non-positive-cost T2 or T3 transformation for application `i`,
/// or `None` when every option would raise the cost.
///
/// Both costs are the change in aggregate slowdown. For T2 that is the
/// gain of `i` from one more way plus the cheapest fold of two other
/// one-way clusters; for T3 it is the pair's shared slowdowns at their
/// combined ways minus their current slowdowns.
pub fn bmerge(
    i: usize,
    state: &PairClusteringState<'_>,
    w: &[usize],
    cs: &[AppProfile],
    total_ways: usize,
) -> Result<Option<MergeChoice>, PolicyError> {
    if state.merged[i] {
        return Ok(None);
    }
    let s = |app: usize, ways: usize| cs[app].slowdown_with(ways);
    let mut best: Option<MergeChoice> = None;
    for j in 0..cs.len() {
        if state.merged[j] {
            continue;
        }
        let (wi, wj) = (w[i], w[j]);
        let candidate = if i == j {
            if wi + 1 > cs[i].nr_ways() {
                continue;
            }
            let steal = state
                .cost1w
                .iter()
                .filter(|e| e.i != i && e.j != i && !state.merged[e.i] && !state.merged[e.j])
                .fold(None::<MergeCost>, |acc, e| match acc {
                    Some(a) if a.cost <= e.cost => Some(a),
                    _ => Some(*e),
                });
            let Some(steal) = steal else { continue };
            MergeChoice {
                cost: (s(i, wi + 1) - s(i, wi)) + steal.cost,
                a1: steal.i,
                a2: steal.j,
            }
        } else {
            let (si, sj) = get_scurves(i, j, total_ways, cs, state.cache)?;
            let wc = wi + wj;
            MergeChoice {
                cost: (si[wc - 1] + sj[wc - 1]) - (s(i, wi) + s(j, wj)),
                a1: i.min(j),
                a2: i.max(j),
            }
        };
        if candidate.cost <= 0.0 && best.is_none_or(|b| candidate.cost <= b.cost) {
            best = Some(candidate);
        }
    }
    Ok(best)
}

/// Everything a pair-clustering run produced; `solutions[0]` is the
/// initial strict solution.
#[derive(Debug, Clone, PartialEq)]
pub struct PairClusteringRun {
    pub solutions: Vec<ScoredSolution>,
    pub chosen: usize,
}

impl PairClusteringRun {
    pub fn best(&self) -> &ScoredSolution {
        &self.solutions[self.chosen]
    }

    pub fn initial(&self) -> &ScoredSolution {
        &self.solutions[0]
    }
}

/// Pair clustering over the cache-sensitive applications `cs`, returning
/// the fairest solution it visited.
pub fn pair_clustering(cs: &[AppProfile], total_ways: usize) -> Result<ClusteringSolution, PolicyError> {
    let cache = SharedCurveCache::new();
    let run = pair_clustering_run(cs, total_ways, &cache)?;
    Ok(run.solutions.into_iter().nth(run.chosen).unwrap().solution)
}

pub fn pair_clustering_run(
    cs: &[AppProfile],
    total_ways: usize,
    cache: &SharedCurveCache,
) -> Result<PairClusteringRun, PolicyError> {
    let n = cs.len();
    if n == 0 {
        return Err(PolicyError::NoApplications);
    }
    let s = |app: usize, ways: usize| cs[app].slowdown_with(ways);
    let mut state = PairClusteringState::new(n, cache);

    // Step 1: strict starting point
    let mut w = initial_partitioning(cs, total_ways)?.0;
    let mut groups: Vec<Vec<usize>> = (0..n).map(|a| vec![a]).collect();
    let first = score(&groups, &w, cs, total_ways, cache)?;
    state.solutions.push(first);

    // Step 2: cost of folding any two one-way clusters into one
    for i in 0..n {
        for j in i + 1..n {
            if w[i] == 1 && w[j] == 1 {
                let (si, sj) = get_scurves(i, j, total_ways, cs, cache)?;
                let cost = (si[0] + sj[0]) - (s(i, 1) + s(j, 1));
                state.cost1w.push(MergeCost { cost, i, j });
            }
        }
    }

    // Step 3: most slowed-down applications first
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s(b, w[b]).total_cmp(&s(a, w[a])).then(a.cmp(&b)));

    for i in order {
        if state.merged[i] {
            continue;
        }
        let Some(choice) = bmerge(i, &state, &w, cs, total_ways)? else {
            continue;
        };
        let (a1, a2) = (choice.a1, choice.a2);
        if choice.is_steal(i) {
            w[i] += 1;
            state.cost1w.retain(|e| !(e.i == a1 && e.j == a2));
        } else {
            w[a1] += w[a2];
        }
        state.merged[a1] = true;
        state.merged[a2] = true;
        w[a2] = 0;
        groups = merge_groups(groups, a1, a2);
        let scored = score(&groups, &w, cs, total_ways, cache)?;
        state.solutions.push(scored);
    }

    let mut chosen = 0;
    for (idx, sol) in state.solutions.iter().enumerate().skip(1) {
        let cur = &state.solutions[chosen];
        if objective_cmp((sol.unfairness, sol.stp), (cur.unfairness, cur.stp)).is_lt() {
            chosen = idx;
        }
    }
    Ok(PairClusteringRun {
        solutions: state.solutions,
        chosen,
    })
}

/// Folds the singleton groups of `a1` and `a2` into one group at `a1`'s
/// position.
fn merge_groups(mut groups: Vec<Vec<usize>>, a1: usize, a2: usize) -> Vec<Vec<usize>> {
    let pos2 = groups.iter().position(|g| g == &[a2]).expect("a2 is a singleton");
    groups.remove(pos2);
    let pos1 = groups.iter().position(|g| g == &[a1]).expect("a1 is a singleton");
    groups[pos1].push(a2);
    groups
}

/// Evaluates a pair-clustering solution using the memoized pair curves.
/// Produces the same numbers as `eval_solution` on the same solution.
fn score(
    groups: &[Vec<usize>],
    w: &[usize],
    cs: &[AppProfile],
    total_ways: usize,
    cache: &SharedCurveCache,
) -> Result<ScoredSolution, PolicyError> {
    let mut slowdowns = vec![0.0; cs.len()];
    let mut clusters = Vec::with_capacity(groups.len());
    for g in groups {
        let ways: usize = g.iter().map(|&a| w[a]).sum();
        match g.as_slice() {
            [a] => slowdowns[*a] = cs[*a].slowdown_with(ways),
            [a, b] => {
                let (sa, sb) = get_scurves(*a, *b, total_ways, cs, cache)?;
                slowdowns[*a] = sa[ways - 1];
                slowdowns[*b] = sb[ways - 1];
            }
            _ => unreachable!("pair clustering builds clusters of at most two"),
        }
        clusters.push(Cluster::new(g.clone(), ways));
    }
    let eval = EvalResult::from_slowdowns(slowdowns)?;
    Ok(ScoredSolution {
        solution: ClusteringSolution::new(clusters, total_ways),
        ways: w.to_vec(),
        unfairness: eval.unfairness,
        stp: eval.stp,
    })
}
