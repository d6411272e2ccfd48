//! Per-application cache profiles.
//!
//! A profile holds one row per LLC way count (starting at one way) with the
//! IPC, the slowdown relative to the best observed IPC and the LLC misses per
//! kilo-cycle (LLCMPKC) the application showed with that many ways. Profiles
//! are collected offline; everything in this crate treats them as immutable
//! inputs.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slowdowns this far below 1.0 are treated as measurement noise and clamped.
pub const SLOWDOWN_NOISE_TOLERANCE: f64 = 0.005;

/// Header line of the profile CSV format.
pub const PROFILE_CSV_HEADER: &str = "ways,ipc,slowdown,llcmpkc";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("cannot read profile {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("bad header: expected `{PROFILE_CSV_HEADER}`, found `{found}`")]
    BadHeader { found: String },
    #[error("row {row}: expected 4 columns, found {found}")]
    ColumnCount { row: usize, found: usize },
    #[error("row {row}: column `{column}` is not a number: `{value}`")]
    NotANumber {
        row: usize,
        column: &'static str,
        value: String,
    },
    #[error("row {row}: ways must be {expected} (ascending from 1), found {found}")]
    WaysOutOfOrder { row: usize, expected: usize, found: String },
    #[error("row count mismatch: expected {expected} rows, found {found}")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("row {row}: slowdown below 1 ({value})")]
    SlowdownBelowOne { row: usize, value: f64 },
    #[error("row {row}: invalid {column} value {value}")]
    InvalidValue {
        row: usize,
        column: &'static str,
        value: f64,
    },
    #[error("curve lengths differ: ipc={ipc}, slowdown={slowdown}, llcmpkc={llcmpkc}")]
    LengthMismatch {
        ipc: usize,
        slowdown: usize,
        llcmpkc: usize,
    },
    #[error("profile has no rows")]
    Empty,
    #[error("effective ways {ways} outside [1, {nr_ways}]")]
    OutOfRange { ways: f64, nr_ways: usize },
    #[error("invalid classifier configuration: {0}")]
    BadClassifier(String),
}

/// Offline cache profile for one application; index `w - 1` holds the
/// values measured with `w` ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppProfile {
    name: String,
    ipc: Vec<f64>,
    slowdown: Vec<f64>,
    llcmpkc: Vec<f64>,
}

impl AppProfile {
    /// Builds a validated profile. Slowdowns within the noise tolerance
    /// below 1.0 are clamped to 1.0.
    pub fn new(
        name: impl Into<String>,
        ipc: Vec<f64>,
        slowdown: Vec<f64>,
        llcmpkc: Vec<f64>,
    ) -> Result<Self, ProfileError> {
        if ipc.len() != slowdown.len() || ipc.len() != llcmpkc.len() {
            return Err(ProfileError::LengthMismatch {
                ipc: ipc.len(),
                slowdown: slowdown.len(),
                llcmpkc: llcmpkc.len(),
            });
        }
        if ipc.is_empty() {
            return Err(ProfileError::Empty);
        }
        let mut slowdown = slowdown;
        for (idx, ((&i, s), &m)) in ipc.iter().zip(slowdown.iter_mut()).zip(&llcmpkc).enumerate() {
            let row = idx + 1;
            if !i.is_finite() || i <= 0.0 {
                return Err(ProfileError::InvalidValue {
                    row,
                    column: "ipc",
                    value: i,
                });
            }
            if !m.is_finite() || m < 0.0 {
                return Err(ProfileError::InvalidValue {
                    row,
                    column: "llcmpkc",
                    value: m,
                });
            }
            if !s.is_finite() {
                return Err(ProfileError::InvalidValue {
                    row,
                    column: "slowdown",
                    value: *s,
                });
            }
            if *s < 1.0 - SLOWDOWN_NOISE_TOLERANCE {
                return Err(ProfileError::SlowdownBelowOne { row, value: *s });
            }
            if *s < 1.0 {
                *s = 1.0;
            }
        }
        Ok(AppProfile {
            name: name.into(),
            ipc,
            slowdown,
            llcmpkc,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of way counts the curves cover.
    pub fn nr_ways(&self) -> usize {
        self.slowdown.len()
    }

    pub fn ipc(&self) -> &[f64] {
        &self.ipc
    }

    pub fn slowdown(&self) -> &[f64] {
        &self.slowdown
    }

    pub fn llcmpkc(&self) -> &[f64] {
        &self.llcmpkc
    }

    /// Slowdown with exactly `ways` ways (1-based). Panics when out of range.
    pub fn slowdown_with(&self, ways: usize) -> f64 {
        self.slowdown[ways - 1]
    }

    /// Slowdown for a possibly fractional occupancy, linearly interpolated
    /// between the bracketing integer way counts.
    pub fn slowdown_at(&self, effective_ways: f64) -> Result<f64, ProfileError> {
        interpolate(&self.slowdown, effective_ways)
    }

    /// LLCMPKC for a possibly fractional occupancy; same contract as
    /// [`AppProfile::slowdown_at`].
    pub fn llcmpkc_at(&self, effective_ways: f64) -> Result<f64, ProfileError> {
        interpolate(&self.llcmpkc, effective_ways)
    }

    /// Renames the profile, keeping the curves.
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

fn interpolate(curve: &[f64], x: f64) -> Result<f64, ProfileError> {
    let n = curve.len();
    if !(x >= 1.0 && x <= n as f64) {
        return Err(ProfileError::OutOfRange { ways: x, nr_ways: n });
    }
    let lo = x.floor() as usize;
    if lo == n {
        return Ok(curve[n - 1]);
    }
    let frac = x - lo as f64;
    let (a, b) = (curve[lo - 1], curve[lo]);
    Ok(a + frac * (b - a))
}

/// Reads a profile CSV from disk and checks it has `nr_ways` rows.
pub fn load_profile(path: impl AsRef<Path>, nr_ways: usize) -> Result<AppProfile, ProfileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ProfileError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_profile(&name, &text, Some(nr_ways))
}

/// Parses the profile CSV format. When `nr_ways` is `Some`, the row count
/// must match it.
pub fn parse_profile(name: &str, text: &str, nr_ways: Option<usize>) -> Result<AppProfile, ProfileError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(ProfileError::Empty)?;
    let header_norm: String = header.chars().filter(|c| !c.is_whitespace()).collect();
    if header_norm.trim_start_matches('\u{feff}') != PROFILE_CSV_HEADER {
        return Err(ProfileError::BadHeader {
            found: header.to_string(),
        });
    }

    let (mut ipc, mut slowdown, mut llcmpkc) = (Vec::new(), Vec::new(), Vec::new());
    for (idx, line) in lines.enumerate() {
        let row = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(ProfileError::ColumnCount {
                row,
                found: fields.len(),
            });
        }
        match fields[0].parse::<usize>() {
            Ok(w) if w == row => {}
            _ => {
                return Err(ProfileError::WaysOutOfOrder {
                    row,
                    expected: row,
                    found: fields[0].to_string(),
                })
            }
        }
        let num = |col: usize, column: &'static str| {
            fields[col].parse::<f64>().map_err(|_| ProfileError::NotANumber {
                row,
                column,
                value: fields[col].to_string(),
            })
        };
        ipc.push(num(1, "ipc")?);
        slowdown.push(num(2, "slowdown")?);
        llcmpkc.push(num(3, "llcmpkc")?);
    }

    if let Some(expected) = nr_ways {
        if slowdown.len() != expected {
            return Err(ProfileError::RowCountMismatch {
                expected,
                found: slowdown.len(),
            });
        }
    }
    AppProfile::new(name, ipc, slowdown, llcmpkc)
}

/// Renders a profile in the CSV format accepted by [`parse_profile`].
/// Values are written in shortest round-trip form.
pub fn profile_to_csv(profile: &AppProfile) -> String {
    let mut out = String::with_capacity(32 * (profile.nr_ways() + 1));
    out.push_str(PROFILE_CSV_HEADER);
    out.push('\n');
    for w in 0..profile.nr_ways() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            w + 1,
            profile.ipc[w],
            profile.slowdown[w],
            profile.llcmpkc[w]
        ));
    }
    out
}

pub fn write_profile(path: impl AsRef<Path>, profile: &AppProfile) -> Result<(), ProfileError> {
    let path = path.as_ref();
    fs::write(path, profile_to_csv(profile)).map_err(|e| ProfileError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AppClass {
    Streaming,
    Sensitive,
    LightSharing,
}

impl AppClass {
    pub const ALL: [AppClass; 3] = [AppClass::Streaming, AppClass::Sensitive, AppClass::LightSharing];

    pub fn as_str(self) -> &'static str {
        match self {
            AppClass::Streaming => "streaming",
            AppClass::Sensitive => "sensitive",
            AppClass::LightSharing => "light-sharing",
        }
    }
}

impl fmt::Display for AppClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AppClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "streaming" | "st" => Ok(AppClass::Streaming),
            "sensitive" | "cs" => Ok(AppClass::Sensitive),
            "light-sharing" | "light_sharing" | "lightsharing" | "ls" => Ok(AppClass::LightSharing),
            other => Err(format!("unknown application class `{other}`")),
        }
    }
}

/// Thresholds of the static classifier. The defaults were tuned for an
/// 11-way LLC and are expected to need retuning elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub streaming_slowdown_lo: f64,
    pub streaming_slowdown_hi: f64,
    pub streaming_llcmpkc_min: f64,
    pub sensitive_slowdown_min: f64,
    pub sensitive_min_ways: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            streaming_slowdown_lo: 1.03,
            streaming_slowdown_hi: 1.06,
            streaming_llcmpkc_min: 10.0,
            sensitive_slowdown_min: 1.05,
            sensitive_min_ways: 2,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let positive = [
            self.streaming_slowdown_lo,
            self.streaming_slowdown_hi,
            self.streaming_llcmpkc_min,
            self.sensitive_slowdown_min,
        ];
        if positive.iter().any(|v| !v.is_finite() || *v <= 0.0) || self.sensitive_min_ways == 0 {
            return Err(ProfileError::BadClassifier("thresholds must be positive".into()));
        }
        if self.streaming_slowdown_lo >= self.streaming_slowdown_hi {
            return Err(ProfileError::BadClassifier(
                "streaming_slowdown_lo must be below streaming_slowdown_hi".into(),
            ));
        }
        Ok(())
    }
}

/// Static classification. Streaming is checked first, then sensitive;
/// anything else is light-sharing.
pub fn classify(profile: &AppProfile, cfg: &ClassifierConfig) -> AppClass {
    let s = profile.slowdown();
    let m = profile.llcmpkc();

    let streaming_point = s
        .iter()
        .zip(m)
        .any(|(&s, &m)| s <= cfg.streaming_slowdown_lo && m >= cfg.streaming_llcmpkc_min);
    let flat = s.iter().all(|&s| s < cfg.streaming_slowdown_hi);
    if streaming_point && flat {
        return AppClass::Streaming;
    }

    let first = cfg.sensitive_min_ways.max(1) - 1;
    if s.iter().skip(first).any(|&s| s >= cfg.sensitive_slowdown_min) {
        return AppClass::Sensitive;
    }
    AppClass::LightSharing
}

/// Default threshold for [`critical_size`].
pub const CRITICAL_SLOWDOWN: f64 = 1.05;

/// Smallest way count whose slowdown falls below `threshold`, or the full
/// way count when none does.
pub fn critical_size(profile: &AppProfile, threshold: f64) -> usize {
    profile
        .slowdown()
        .iter()
        .position(|&s| s < threshold)
        .map_or(profile.nr_ways(), |idx| idx + 1)
}

/// Deterministic synthetic profile whose curves have the shape typical of
/// `class`, and which classifies back to `class` under the default
/// thresholds.
///
/// Panics if `nr_ways` is zero, or below 2 for a sensitive profile.
pub fn generate_synthetic(class: AppClass, seed: u64, nr_ways: usize) -> AppProfile {
    assert!(nr_ways >= 1, "a profile needs at least one way");
    let tag = match class {
        AppClass::Streaming => 0x5354_u64,
        AppClass::Sensitive => 0x4353,
        AppClass::LightSharing => 0x4c53,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ tag);
    let base_ipc: f64 = rng.gen_range(0.3..2.0);
    let ways = 1..=nr_ways;

    let (slowdown, llcmpkc): (Vec<f64>, Vec<f64>) = match class {
        AppClass::Streaming => {
            let extra: f64 = rng.gen_range(0.0..0.02);
            let tau: f64 = rng.gen_range(1.0..4.0);
            let misses: f64 = rng.gen_range(12.0..40.0);
            let droop: f64 = rng.gen_range(0.0..0.1);
            ways.map(|w| {
                let x = (w - 1) as f64;
                (
                    1.0 + extra * (-x / tau).exp(),
                    misses * (1.0 - droop * x / nr_ways as f64),
                )
            })
            .unzip()
        }
        AppClass::Sensitive => {
            assert!(nr_ways >= 2, "a sensitive profile needs at least two ways");
            let amp: f64 = rng.gen_range(0.3..2.0);
            let tau: f64 = rng.gen_range(1.5..4.0);
            let misses: f64 = rng.gen_range(2.0..15.0);
            let tau_m: f64 = rng.gen_range(1.5..4.0);
            let floor: f64 = rng.gen_range(0.1..1.0);
            ways.map(|w| {
                let x = (w - 1) as f64;
                (1.0 + amp * (-x / tau).exp(), misses * (-x / tau_m).exp() + floor)
            })
            .unzip()
        }
        AppClass::LightSharing => {
            let extra: f64 = rng.gen_range(0.0..0.02);
            let tau: f64 = rng.gen_range(1.0..3.0);
            let misses: f64 = rng.gen_range(0.05..2.0);
            ways.map(|w| {
                let x = (w - 1) as f64;
                (1.0 + extra * (-x / tau).exp(), misses * (-x / 4.0).exp())
            })
            .unzip()
        }
    };
    let ipc = slowdown.iter().map(|s| base_ipc / s).collect();
    AppProfile::new(format!("{class}-{seed}"), ipc, slowdown, llcmpkc)
        .expect("synthetic curves are valid by construction")
}
