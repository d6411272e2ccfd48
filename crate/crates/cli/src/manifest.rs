//! JSON workload manifests.
//!
//! ```json
//! {
//!   "name": "mix-1",
//!   "nr_ways": 11,
//!   "entries": [
//!     { "profile": "profiles/omnetpp.csv" },
//!     { "profile": "profiles/lbm.csv", "class": "streaming" },
//!     { "synthetic": { "class": "sensitive", "seed": 4 } }
//!   ],
//!   "policy": { "max_str_parts": 5 },
//!   "classifier": { "sensitive_slowdown_min": 1.05 }
//! }
//! ```
//!
//! Profile paths are relative to the manifest's directory. `class` pins
//! an entry's class and skips the classifier for it.

use std::fs;
use std::path::{Path, PathBuf};

use lfoc_core::{
    classify, generate_synthetic, load_profile, AppClass, ClassifiedWorkload, ClassifierConfig, PolicyConfig,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadManifest {
    pub name: String,
    pub nr_ways: usize,
    pub entries: Vec<Entry>,
    #[serde(default)]
    pub policy: PolicyOverrides,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    /// Directory profile paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<AppClass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticEntry {
    pub class: AppClass,
    pub seed: u64,
}

/// Optional overrides of the LFOC parameters. `merge_streaming` only
/// affects LFOC+; plain LFOC never merges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyOverrides {
    pub max_str_parts: Option<usize>,
    pub gaps_per_str: Option<usize>,
    pub ways_str: Option<usize>,
    pub merge_streaming: Option<bool>,
}

impl PolicyOverrides {
    pub fn apply(&self, mut cfg: PolicyConfig, plus: bool) -> PolicyConfig {
        cfg.max_str_parts = self.max_str_parts.unwrap_or(cfg.max_str_parts);
        cfg.gaps_per_str = self.gaps_per_str.unwrap_or(cfg.gaps_per_str);
        cfg.ways_str = self.ways_str.unwrap_or(cfg.ways_str);
        if plus {
            cfg.merge_streaming = self.merge_streaming.unwrap_or(cfg.merge_streaming);
        }
        cfg
    }
}

impl Entry {
    pub fn synthetic(class: AppClass, seed: u64) -> Self {
        Entry {
            profile: None,
            synthetic: Some(SyntheticEntry { class, seed }),
            class: None,
        }
    }
}

impl WorkloadManifest {
    /// Manifest of synthetic entries, mostly for tests and benchmarks.
    pub fn synthetic(name: impl Into<String>, nr_ways: usize, entries: &[(AppClass, u64)]) -> Self {
        WorkloadManifest {
            name: name.into(),
            nr_ways,
            entries: entries.iter().map(|&(c, s)| Entry::synthetic(c, s)).collect(),
            policy: PolicyOverrides::default(),
            classifier: ClassifierConfig::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut manifest: WorkloadManifest = serde_json::from_str(&text).map_err(|e| CliError::Manifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.validate().map_err(|reason| CliError::Manifest {
            path: path.to_path_buf(),
            reason,
        })?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.entries.is_empty() {
            return Err("at least one entry is required".into());
        }
        if self.nr_ways < 2 {
            return Err("nr_ways must be at least 2".into());
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.profile.is_some() == e.synthetic.is_some() {
                return Err(format!("entry {i}: give exactly one of `profile` or `synthetic`"));
            }
        }
        self.classifier.validate().map_err(|e| e.to_string())
    }

    /// Loads every profile, classifying the entries without an override.
    pub fn load(&self) -> Result<ClassifiedWorkload, CliError> {
        self.validate().map_err(|reason| CliError::Manifest {
            path: self.base_dir.clone(),
            reason,
        })?;
        let mut profiles = Vec::with_capacity(self.entries.len());
        let mut classes = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let p = match (&e.profile, e.synthetic) {
                (Some(rel), _) => load_profile(self.base_dir.join(rel), self.nr_ways)?,
                (None, Some(s)) => generate_synthetic(s.class, s.seed, self.nr_ways),
                (None, None) => unreachable!("validated"),
            };
            classes.push(e.class.unwrap_or_else(|| classify(&p, &self.classifier)));
            profiles.push(p);
        }
        Ok(ClassifiedWorkload::new(profiles, classes)?)
    }
}
