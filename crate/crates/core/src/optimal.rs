//! Exhaustive clustering search.
//!
//! Every set partition of the workload (optionally with bounded block size)
//! is combined with every way split that spends the whole budget, each
//! candidate is evaluated with the cache model, and the fairest one wins:
//! lowest unfairness, then highest STP, then earliest in enumeration order.
//!
//! Partitions are enumerated as restricted growth strings in lexicographic
//! order; way splits as integer compositions in lexicographic order.

use std::cmp::Ordering;

use num_bigint::BigUint;
use rayon::prelude::*;
use thiserror::Error;

use crate::cachemodel::{objective_cmp, shared_slowdowns, Cluster, ClusteringSolution, EvalResult, ModelError};
use crate::profile::AppProfile;

/// Largest workload [`search_optimal`] accepts; Bell(13) is already 27.6M
/// partitions before way splits.
pub const SEARCH_APP_LIMIT: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("no clustering of {apps} applications fits in {ways} ways")]
    Infeasible { apps: usize, ways: usize },
    #[error("{apps} applications exceed the exhaustive search limit of {limit}")]
    TooLarge { apps: usize, limit: usize },
    #[error("cannot split {budget} ways into {parts} non-empty parts")]
    BadSplit { parts: usize, budget: usize },
    #[error("maximum cluster size must be at least 1")]
    BadClusterSize,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Iterator over the set partitions of `{0..n}` whose blocks hold at most
/// `max_block` elements. Blocks are ordered by their smallest element and
/// list their members in ascending order.
#[derive(Debug, Clone)]
pub struct AppPartitions {
    rgs: Vec<usize>,
    max_block: usize,
    started: bool,
    done: bool,
}

/// Set partitions of `n` applications into blocks of at most
/// `max_cluster_size` members (`None` for unbounded).
pub fn enumerate_app_partitions(n: usize, max_cluster_size: Option<usize>) -> AppPartitions {
    AppPartitions {
        rgs: vec![0; n],
        max_block: max_cluster_size.unwrap_or(n).max(1),
        started: false,
        done: n == 0,
    }
}

impl AppPartitions {
    /// Fills `rgs[from..]` with the lexicographically smallest valid tail.
    fn fill_min(&mut self, from: usize) {
        let mut sizes = vec![0usize; self.rgs.len()];
        let mut max = None::<usize>;
        for &b in &self.rgs[..from] {
            sizes[b] += 1;
            max = Some(max.map_or(b, |m| m.max(b)));
        }
        for pos in from..self.rgs.len() {
            let limit = max.map_or(0, |m| m + 1);
            let b = (0..=limit)
                .find(|&b| sizes[b] < self.max_block)
                .expect("a new block always has room");
            self.rgs[pos] = b;
            sizes[b] += 1;
            max = Some(max.map_or(b, |m| m.max(b)));
        }
    }

    fn advance(&mut self) -> bool {
        let n = self.rgs.len();
        for pos in (1..n).rev() {
            let mut sizes = vec![0usize; n];
            for &b in &self.rgs[..pos] {
                sizes[b] += 1;
            }
            let limit = self.rgs[..pos].iter().max().map_or(0, |m| m + 1);
            if let Some(b) = (self.rgs[pos] + 1..=limit).find(|&b| sizes[b] < self.max_block) {
                self.rgs[pos] = b;
                self.fill_min(pos + 1);
                return true;
            }
        }
        false
    }

    fn blocks(&self) -> Vec<Vec<usize>> {
        let count = self.rgs.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); count];
        for (app, &b) in self.rgs.iter().enumerate() {
            blocks[b].push(app);
        }
        blocks
    }
}

impl Iterator for AppPartitions {
    type Item = Vec<Vec<usize>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.fill_min(0);
        } else if !self.advance() {
            self.done = true;
            return None;
        }
        Some(self.blocks())
    }
}

/// Iterator over the compositions of a budget into a fixed number of
/// positive parts, in lexicographic order.
#[derive(Debug, Clone)]
pub struct WaySplits {
    parts: Vec<usize>,
    started: bool,
    done: bool,
}

/// Every `k`-tuple of positive way counts summing to exactly `budget`.
pub fn enumerate_way_splits(k: usize, budget: usize) -> Result<WaySplits, SearchError> {
    if k == 0 || k > budget {
        return Err(SearchError::BadSplit { parts: k, budget });
    }
    let mut parts = vec![1; k];
    parts[k - 1] = budget - (k - 1);
    Ok(WaySplits {
        parts,
        started: false,
        done: false,
    })
}

impl Iterator for WaySplits {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.parts.clone());
        }
        let k = self.parts.len();
        let mut suffix = self.parts[k - 1];
        for pos in (0..k.saturating_sub(1)).rev() {
            // the tail after `pos` holds `suffix` ways over `k - 1 - pos` parts
            let tail_parts = k - 1 - pos;
            if suffix > tail_parts {
                self.parts[pos] += 1;
                for p in &mut self.parts[pos + 1..k - 1] {
                    *p = 1;
                }
                self.parts[k - 1] = suffix - 1 - (tail_parts - 1);
                return Some(self.parts.clone());
            }
            suffix += self.parts[pos];
        }
        self.done = true;
        None
    }
}

/// Number of set partitions of `n` elements (the Bell number), including
/// those with more blocks than there are ways.
pub fn count_clusterings(n: usize) -> BigUint {
    let mut row = vec![BigUint::from(1u32)];
    for _ in 1..n.max(1) {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(row.last().unwrap().clone());
        for v in &row {
            let sum = next.last().unwrap() + v;
            next.push(sum);
        }
        row = next;
    }
    row.pop().unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchSpec {
    /// `None` means unbounded (Best-Static); `Some(2)` gives Best-2C and
    /// `Some(1)` strict partitioning.
    pub max_cluster_size: Option<usize>,
    pub nr_ways: usize,
}

impl SearchSpec {
    pub fn best_static(nr_ways: usize) -> Self {
        SearchSpec {
            max_cluster_size: None,
            nr_ways,
        }
    }

    pub fn best_2c(nr_ways: usize) -> Self {
        SearchSpec {
            max_cluster_size: Some(2),
            nr_ways,
        }
    }

    pub fn strict(nr_ways: usize) -> Self {
        SearchSpec {
            max_cluster_size: Some(1),
            nr_ways,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: ClusteringSolution,
    pub eval: EvalResult,
    /// Number of (partition, way split) candidates evaluated.
    pub explored: u64,
}

/// Exhaustive search on the global rayon pool.
pub fn search_optimal(profiles: &[AppProfile], spec: &SearchSpec) -> Result<SearchResult, SearchError> {
    search_inner(profiles, spec)
}

/// Exhaustive search on a dedicated pool of `workers` threads. The result
/// does not depend on the worker count.
pub fn search_optimal_with_workers(
    profiles: &[AppProfile],
    spec: &SearchSpec,
    workers: usize,
) -> Result<SearchResult, SearchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SearchError::Pool(e.to_string()))?;
    pool.install(|| search_inner(profiles, spec))
}

/// Per-block slowdowns, indexed by block bitmask then `ways - 1`; members
/// appear in ascending order.
struct BlockTable {
    entries: Vec<Option<Vec<Vec<f64>>>>,
}

impl BlockTable {
    fn build(profiles: &[AppProfile], max_block: usize, nr_ways: usize) -> Result<Self, ModelError> {
        let n = profiles.len();
        let masks: Vec<usize> = (1usize..1 << n)
            .filter(|m| m.count_ones() as usize <= max_block)
            .collect();
        let computed: Vec<(usize, Vec<Vec<f64>>)> = masks
            .par_iter()
            .map(|&mask| {
                let members: Vec<&AppProfile> = (0..n).filter(|a| mask >> a & 1 == 1).map(|a| &profiles[a]).collect();
                let per_way = (1..=nr_ways)
                    .map(|w| shared_slowdowns(&members, w))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((mask, per_way))
            })
            .collect::<Result<_, ModelError>>()?;
        let mut entries = vec![None; 1 << n];
        for (mask, per_way) in computed {
            entries[mask] = Some(per_way);
        }
        Ok(BlockTable { entries })
    }

    fn slowdowns(&self, mask: usize, ways: usize) -> &[f64] {
        &self.entries[mask].as_ref().expect("block within size bound")[ways - 1]
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    unfairness: f64,
    stp: f64,
    partition: usize,
    split: usize,
    ways: Vec<usize>,
    slowdowns: Vec<f64>,
}

impl Candidate {
    fn cmp_key(&self, other: &Candidate) -> Ordering {
        objective_cmp((self.unfairness, self.stp), (other.unfairness, other.stp))
            .then(self.partition.cmp(&other.partition))
            .then(self.split.cmp(&other.split))
    }
}

fn better(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.cmp_key(&a) == Ordering::Less { b } else { a }),
        (a, None) => a,
        (None, b) => b,
    }
}

fn search_inner(profiles: &[AppProfile], spec: &SearchSpec) -> Result<SearchResult, SearchError> {
    let n = profiles.len();
    let ways = spec.nr_ways;
    if spec.max_cluster_size == Some(0) {
        return Err(SearchError::BadClusterSize);
    }
    if n > SEARCH_APP_LIMIT {
        return Err(SearchError::TooLarge {
            apps: n,
            limit: SEARCH_APP_LIMIT,
        });
    }
    let max_block = spec.max_cluster_size.unwrap_or(n).min(n.max(1));
    if n == 0 || n.div_ceil(max_block) > ways {
        return Err(SearchError::Infeasible { apps: n, ways });
    }

    let table = BlockTable::build(profiles, max_block, ways)?;
    let partitions: Vec<Vec<Vec<usize>>> = enumerate_app_partitions(n, spec.max_cluster_size)
        .filter(|blocks| blocks.len() <= ways)
        .collect();

    let (best, explored) = partitions
        .par_iter()
        .enumerate()
        .with_min_len(64)
        .map(|(pi, blocks)| -> Result<(Option<Candidate>, u64), SearchError> {
            let masks: Vec<usize> = blocks.iter().map(|b| b.iter().map(|&a| 1usize << a).sum()).collect();
            let mut slowdowns = vec![0.0; n];
            let mut local: Option<Candidate> = None;
            let mut explored = 0u64;
            for (si, split) in enumerate_way_splits(blocks.len(), ways)?.enumerate() {
                for ((block, &mask), &w) in blocks.iter().zip(&masks).zip(&split) {
                    for (&app, &s) in block.iter().zip(table.slowdowns(mask, w)) {
                        slowdowns[app] = s;
                    }
                }
                let eval = EvalResult::from_slowdowns(slowdowns.clone())?;
                explored += 1;
                let cand = Candidate {
                    unfairness: eval.unfairness,
                    stp: eval.stp,
                    partition: pi,
                    split: si,
                    ways: split,
                    slowdowns: eval.slowdowns,
                };
                local = better(local, Some(cand));
            }
            Ok((local, explored))
        })
        .try_reduce(|| (None, 0), |(a, ea), (b, eb)| Ok((better(a, b), ea + eb)))?;

    let best = best.ok_or(SearchError::Infeasible { apps: n, ways })?;
    let clusters = partitions[best.partition]
        .iter()
        .zip(&best.ways)
        .map(|(block, &w)| Cluster::new(block.clone(), w))
        .collect();
    Ok(SearchResult {
        best: ClusteringSolution::new(clusters, ways),
        eval: EvalResult {
            slowdowns: best.slowdowns,
            unfairness: best.unfairness,
            stp: best.stp,
        },
        explored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cachemodel::eval_solution;
    use crate::profile::{generate_synthetic, AppClass};
    use std::collections::BTreeSet;

    #[test]
    fn small_partition_counts() {
        assert_eq!(enumerate_app_partitions(3, None).count(), 5);
        assert_eq!(enumerate_app_partitions(3, Some(2)).count(), 4);
        assert_eq!(enumerate_app_partitions(4, None).count(), 15);
        assert_eq!(
            enumerate_app_partitions(1, None).collect::<Vec<_>>(),
            vec![vec![vec![0]]]
        );
        assert_eq!(enumerate_app_partitions(0, None).count(), 0);
    }

    #[test]
    fn partitions_in_canonical_order() {
        let got: Vec<_> = enumerate_app_partitions(3, None).collect();
        assert_eq!(
            got,
            vec![
                vec![vec![0, 1, 2]],
                vec![vec![0, 1], vec![2]],
                vec![vec![0, 2], vec![1]],
                vec![vec![0], vec![1, 2]],
                vec![vec![0], vec![1], vec![2]],
            ]
        );
    }

    #[test]
    fn bounded_partitions_are_distinct_and_bounded() {
        for cap in 1..=4 {
            let all: Vec<_> = enumerate_app_partitions(7, Some(cap)).collect();
            let unique: BTreeSet<_> = all.iter().cloned().collect();
            assert_eq!(unique.len(), all.len());
            assert!(all.iter().flatten().all(|b| b.len() <= cap));
            let filtered = enumerate_app_partitions(7, None)
                .filter(|p| p.iter().all(|b| b.len() <= cap))
                .count();
            assert_eq!(all.len(), filtered, "cap {cap}");
        }
    }

    #[test]
    fn way_splits() {
        assert_eq!(enumerate_way_splits(1, 11).unwrap().collect::<Vec<_>>(), vec![vec![11]]);
        assert_eq!(
            enumerate_way_splits(2, 4).unwrap().collect::<Vec<_>>(),
            vec![vec![1, 3], vec![2, 2], vec![3, 1]]
        );
        assert_eq!(
            enumerate_way_splits(3, 3).unwrap().collect::<Vec<_>>(),
            vec![vec![1, 1, 1]]
        );
        assert_eq!(
            enumerate_way_splits(4, 3).unwrap_err(),
            SearchError::BadSplit { parts: 4, budget: 3 }
        );
        // C(budget - 1, k - 1) compositions
        assert_eq!(enumerate_way_splits(3, 11).unwrap().count(), 45);
        assert_eq!(enumerate_way_splits(5, 8).unwrap().count(), 35);
        assert!(enumerate_way_splits(4, 9)
            .unwrap()
            .all(|s| s.iter().sum::<usize>() == 9 && s.iter().all(|&w| w >= 1)));
    }

    #[test]
    fn bell_numbers() {
        let bell: Vec<u64> = (1..=10).map(|n| count_clusterings(n).try_into().unwrap()).collect();
        assert_eq!(bell, vec![1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975]);
        assert_eq!(count_clusterings(16), BigUint::from(10_480_142_147u64));
        assert_eq!(count_clusterings(17), BigUint::from(82_864_869_804u64));
        assert_eq!(count_clusterings(20), BigUint::from(51_724_158_235_372u64));
    }

    #[test]
    fn single_app_takes_everything() {
        let p = vec![generate_synthetic(AppClass::Sensitive, 3, 11)];
        let r = search_optimal(&p, &SearchSpec::best_static(11)).unwrap();
        assert_eq!(r.best.clusters, vec![Cluster::new(vec![0], 11)]);
        assert_eq!(r.eval.unfairness, 1.0);
        assert_eq!(r.explored, 1);
    }

    #[test]
    fn identical_pair_is_perfectly_fair() {
        let p = generate_synthetic(AppClass::Sensitive, 5, 4);
        let profiles = vec![p.clone(), p.with_name("twin")];
        let r = search_optimal(&profiles, &SearchSpec::best_static(4)).unwrap();
        assert_eq!(r.eval.unfairness, 1.0);
        let strict = eval_solution(&ClusteringSolution::strict(&[2, 2], 4), &profiles).unwrap();
        let shared = eval_solution(
            &ClusteringSolution::new(vec![Cluster::new(vec![0, 1], 4)], 4),
            &profiles,
        )
        .unwrap();
        let expected_stp = strict.stp.max(shared.stp);
        assert_eq!(r.eval.stp, expected_stp);
        // one shared candidate plus three strict splits
        assert_eq!(r.explored, 4);
    }

    #[test]
    fn infeasible_and_oversized() {
        let profiles: Vec<_> = (0..5).map(|s| generate_synthetic(AppClass::Sensitive, s, 4)).collect();
        assert_eq!(
            search_optimal(&profiles, &SearchSpec::strict(4)).unwrap_err(),
            SearchError::Infeasible { apps: 5, ways: 4 }
        );
        assert!(search_optimal(&profiles, &SearchSpec::best_2c(4)).is_ok());
        let many: Vec<_> = (0..13)
            .map(|s| generate_synthetic(AppClass::LightSharing, s, 4))
            .collect();
        assert!(matches!(
            search_optimal(&many, &SearchSpec::best_static(4)),
            Err(SearchError::TooLarge { .. })
        ));
        assert_eq!(
            search_optimal(
                &profiles,
                &SearchSpec {
                    max_cluster_size: Some(0),
                    nr_ways: 4
                }
            )
            .unwrap_err(),
            SearchError::BadClusterSize
        );
    }

    #[test]
    fn reported_eval_matches_evaluator() {
        let profiles = vec![
            generate_synthetic(AppClass::Sensitive, 1, 8),
            generate_synthetic(AppClass::Streaming, 2, 8),
            generate_synthetic(AppClass::Sensitive, 3, 8),
            generate_synthetic(AppClass::LightSharing, 4, 8),
        ];
        for spec in [
            SearchSpec::best_static(8),
            SearchSpec::best_2c(8),
            SearchSpec::strict(8),
        ] {
            let r = search_optimal(&profiles, &spec).unwrap();
            r.best.validate(profiles.len()).unwrap();
            assert_eq!(eval_solution(&r.best, &profiles).unwrap(), r.eval);
        }
    }
}
