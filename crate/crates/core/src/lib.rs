//! Fairness-aware last-level-cache clustering.
//!
//! The crate works on offline per-application cache profiles and provides:
//!
//! - [`profile`]: loading, interpolating and classifying profiles;
//! - [`cachemodel`]: clustering solutions, shared-partition occupancy and
//!   slowdown estimates, unfairness and STP;
//! - [`lookahead`]: UCP-style greedy way allocation;
//! - [`policies`]: the LFOC and LFOC+ clustering policies;
//! - [`optimal`]: exhaustive optimal and pair-restricted searches.

pub mod cachemodel;
pub mod lookahead;
pub mod optimal;
pub mod policies;
pub mod profile;

pub use cachemodel::{
    eval_solution, get_scurves, shared_occupancy, shared_slowdowns, stp, unfairness, Cluster, ClusteringSolution,
    EvalResult, ModelError, SharedCurveCache,
};
pub use lookahead::{lookahead, ucp_slowdown, MetricTable, WayAssignment};
pub use optimal::{
    count_clusterings, enumerate_app_partitions, enumerate_way_splits, search_optimal, search_optimal_with_workers,
    SearchError, SearchResult, SearchSpec,
};
pub use policies::{
    bmerge, initial_partitioning, lfoc_partition, lfoc_plus_partition, pair_clustering, ClassifiedWorkload,
    Distributor, PolicyConfig, PolicyError,
};
pub use profile::{
    classify, critical_size, generate_synthetic, load_profile, write_profile, AppClass, AppProfile, ClassifierConfig,
    ProfileError,
};
