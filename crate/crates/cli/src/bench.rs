//! Solver timing over random synthetic workloads.

use std::time::Instant;

use lfoc_core::{generate_synthetic, lfoc_plus_partition, AppClass, ClassifiedWorkload, PolicyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Way count of the simulated LLC.
pub const BENCH_WAYS: usize = 11;
/// With at most two streaming ways taken, this many sensitive apps always fit.
const MAX_SENSITIVE: usize = BENCH_WAYS - 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchSummary {
    pub n_apps: usize,
    pub trials: usize,
    pub median_us: f64,
    pub p95_us: f64,
    pub mean_us: f64,
}

impl std::fmt::Display for BenchSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "apps={} trials={} median_us={:.3} p95_us={:.3} mean_us={:.3}",
            self.n_apps, self.trials, self.median_us, self.p95_us, self.mean_us
        )
    }
}

/// Random classified workload of `n_apps` applications at [`BENCH_WAYS`]
/// ways, with the sensitive count capped so LFOC+ always has room.
pub fn random_workload(rng: &mut ChaCha8Rng, n_apps: usize) -> ClassifiedWorkload {
    let mut sensitive = 0;
    let mut profiles = Vec::with_capacity(n_apps);
    let mut classes = Vec::with_capacity(n_apps);
    for _ in 0..n_apps {
        let mut class = AppClass::ALL[rng.gen_range(0..3)];
        if class == AppClass::Sensitive {
            if sensitive == MAX_SENSITIVE {
                class = AppClass::LightSharing;
            } else {
                sensitive += 1;
            }
        }
        profiles.push(generate_synthetic(class, rng.gen(), BENCH_WAYS));
        classes.push(class);
    }
    ClassifiedWorkload::new(profiles, classes).expect("generated workload is consistent")
}

/// Times `lfoc_plus_partition` alone (generation excluded) over `trials`
/// random workloads.
///
/// # Panics
///
/// Panics if `n_apps < 2` or `trials == 0`.
pub fn bench(n_apps: usize, trials: usize, seed: u64) -> BenchSummary {
    assert!(n_apps >= 2, "bench needs at least two applications");
    assert!(trials > 0, "bench needs at least one trial");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = PolicyConfig::lfoc_plus(BENCH_WAYS);
    let mut samples: Vec<f64> = (0..trials)
        .map(|_| {
            let wl = random_workload(&mut rng, n_apps);
            let start = Instant::now();
            let sol = lfoc_plus_partition(&wl, &cfg);
            let us = start.elapsed().as_secs_f64() * 1e6;
            std::hint::black_box(sol).expect("bench workloads are feasible");
            us
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    let pick = |q: f64| samples[((samples.len() - 1) as f64 * q).round() as usize];
    BenchSummary {
        n_apps,
        trials,
        median_us: pick(0.5),
        p95_us: pick(0.95),
        mean_us: samples.iter().sum::<f64>() / trials as f64,
    }
}
