//! Experiment configuration: a flat TOML document with profile defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::recourse::{Method, Penalty, DEFAULT_SAMPLES};
use crate::rng::CALIBRATION_SEED;
use crate::settings::{self, Setting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => Err(Error::Config(format!("profile: unknown profile '{s}' (expected desk or paper)"))),
        }
    }
}

/// Whether post-recourse noise equals the applicant's pre-recourse noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    Persistent,
    Resampled,
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseMode::Persistent => "persistent",
            NoiseMode::Resampled => "resampled",
        })
    }
}

fn default_seeds() -> Vec<u64> {
    (40..50).collect()
}
fn default_t_r() -> f64 {
    0.9
}
fn default_t_c() -> f64 {
    0.5
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_min_bucket() -> usize {
    20
}
fn default_calibration_seed() -> u64 {
    CALIBRATION_SEED
}
fn default_penalty() -> Penalty {
    Penalty::Hinge
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: String,
    pub method: Method,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub profile: Profile,
    pub train_rows: Option<usize>,
    pub test_rows: Option<usize>,
    /// Number of rejected applicants implementing recourse.
    pub cohort_size: Option<usize>,
    #[serde(default = "default_t_r")]
    pub t_r: f64,
    #[serde(default = "default_t_c")]
    pub t_c: f64,
    #[serde(default = "default_penalty")]
    pub penalty: Penalty,
    #[serde(default)]
    pub noise: NoiseMode,
    /// Samples per success-probability estimate.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_min_bucket")]
    pub min_bucket: usize,
    #[serde(default = "default_calibration_seed")]
    pub calibration_seed: u64,
    #[serde(default = "default_true")]
    pub polish: bool,
    pub out_dir: Option<PathBuf>,
    pub gpa_csv: Option<PathBuf>,
    /// Graph file for GPA; the built-in guess is used when absent.
    pub gpa_graph: Option<PathBuf>,
    /// Node name to CSV column.
    #[serde(default)]
    pub gpa_columns: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(setting: &str, method: Method) -> Self {
        Self {
            setting: setting.to_string(),
            method,
            seeds: default_seeds(),
            profile: Profile::Desk,
            train_rows: None,
            test_rows: None,
            cohort_size: None,
            t_r: default_t_r(),
            t_c: default_t_c(),
            penalty: Penalty::Hinge,
            noise: NoiseMode::Persistent,
            samples: DEFAULT_SAMPLES,
            min_bucket: default_min_bucket(),
            calibration_seed: CALIBRATION_SEED,
            polish: true,
            out_dir: None,
            gpa_csv: None,
            gpa_graph: None,
            gpa_columns: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string() + &span_hint(text, e.span())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    fn is_gpa(&self) -> bool {
        self.setting.eq_ignore_ascii_case("GPA")
    }

    /// Fills unset sizes from the profile and validates every field.
    pub fn resolve(mut self) -> Result<Self> {
        let (train, cohort) = match self.profile {
            Profile::Desk => (2000, 500),
            Profile::Paper => (100_000, if self.is_gpa() { 1000 } else { 5000 }),
        };
        let train = *self.train_rows.get_or_insert(train);
        self.test_rows.get_or_insert(train.min(20_000));
        self.cohort_size.get_or_insert(cohort);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !settings::REGISTERED.iter().any(|s| s.eq_ignore_ascii_case(&self.setting)) {
            errs.push(format!("setting: unknown setting '{}' (expected one of {})", self.setting, settings::REGISTERED.join(", ")));
        }
        if self.seeds.is_empty() {
            errs.push("seeds: at least one seed is required".into());
        }
        let mut uniq = self.seeds.clone();
        uniq.sort_unstable();
        uniq.dedup();
        if uniq.len() != self.seeds.len() {
            errs.push("seeds: duplicate seeds".into());
        }
        if self.train_rows.is_some_and(|n| n < 2) {
            errs.push("train_rows: must be at least 2".into());
        }
        if self.test_rows == Some(0) {
            errs.push("test_rows: must be positive".into());
        }
        if self.cohort_size.is_some_and(|n| n < 2) {
            errs.push("cohort_size: must be at least 2 (the cohort is split in halves)".into());
        }
        if !(self.t_r > 0.0 && self.t_r <= 1.0) {
            errs.push(format!("t_r: {} outside (0, 1]", self.t_r));
        }
        if !(0.0..=1.0).contains(&self.t_c) {
            errs.push(format!("t_c: {} outside [0, 1]", self.t_c));
        }
        if self.samples == 0 {
            errs.push("samples: must be positive".into());
        }
        if self.min_bucket == 0 {
            errs.push("min_bucket: must be positive".into());
        }
        if self.is_gpa() && self.gpa_csv.is_none() {
            errs.push("gpa_csv: required for the GPA setting".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs.join("; ")))
        }
    }

    /// Builds the configured setting (ingesting and fitting GPA data).
    pub fn build_setting(&self) -> Result<Setting> {
        if !self.is_gpa() {
            return settings::build(&self.setting, self.calibration_seed);
        }
        let graph = match &self.gpa_graph {
            Some(p) => CausalGraph::parse(&std::fs::read_to_string(p)?)?,
            None => CausalGraph::parse(settings::GPA_GRAPH)?,
        };
        let csv = self.gpa_csv.as_ref().ok_or_else(|| Error::Config("gpa_csv: required for the GPA setting".into()))?;
        let map: Vec<(String, String)> = self.gpa_columns.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let gpa = settings::ingest_gpa(csv, &map, &graph)?;
        if gpa.dropped > 0 {
            log::info!("GPA ingestion dropped {} rows with missing values", gpa.dropped);
        }
        settings::build_gpa(&graph, &gpa.data, self.calibration_seed)
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => format!(" (line {})", text[..r.start.min(text.len())].lines().count().max(1)),
        None => String::new(),
    }
}
