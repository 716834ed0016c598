//! Experiment configuration: a TOML document with sections, every field
//! optional. Command-line flags are applied on top.
//!
//! ```toml
//! output = "out"
//!
//! [data]
//! path = "rossi.csv"
//! preset = "rossi"
//!
//! [train]
//! gamma = 1.0
//! k = 10
//! variant = "fair"
//! seed = 0
//!
//! [eval]
//! n_folds = 5
//!
//! [sweep]
//! gamma_grid = [0.0183, 1.0, 54.6]
//! k_grid = [10]
//! ```

use std::path::{Path, PathBuf};

use fairsurv_core::synth::MisalignmentSpec;
use fairsurv_core::{EvalOptions, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::dataset::{Preset, Schema};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub time: Option<String>,
    pub event: Option<String>,
    pub features: Option<Vec<String>>,
}

impl DataConfig {
    /// Preset first, then explicit column names on top.
    pub fn schema(&self) -> Schema {
        let mut s = self.preset.map(Preset::schema).unwrap_or_default();
        if let Some(t) = &self.time {
            s.time = t.clone();
        }
        if let Some(e) = &self.event {
            s.event = e.clone();
        }
        if self.features.is_some() {
            s.features = self.features.clone();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub n_folds: usize,
    /// records kept (seeded uniform sample) before building n x n
    /// similarity structures
    pub subsample_cap: usize,
    pub tie_credit: bool,
    pub brier_grid_points: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        let e = EvalOptions::default();
        Self {
            n_folds: 5,
            subsample_cap: e.subsample_cap,
            tie_credit: e.tie_credit,
            brier_grid_points: e.brier_grid_points,
        }
    }
}

/// `e^-4, e^-3, ..., e^4`
pub fn default_gamma_grid() -> Vec<f64> {
    (-4..=4).map(|p| (p as f64).exp()).collect()
}

pub const DEFAULT_K_GRID: [usize; 7] = [4, 7, 10, 15, 20, 30, 50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub gamma_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            gamma_grid: default_gamma_grid(),
            k_grid: vec![10],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub include_plain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub beta: Vec<f64>,
    pub censor_rate: f64,
    /// use the planted-misalignment generator instead
    pub misaligned: bool,
    pub misalignment: MisalignmentSpec,
    pub name: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            beta: vec![1.0, -0.5],
            censor_rate: 0.3,
            misaligned: false,
            misalignment: MisalignmentSpec::default(),
            name: "synthetic".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output: PathBuf,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub sweep: SweepConfig,
    pub ablation: AblationConfig,
    pub synth: SynthConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output: PathBuf::from("out"),
            data: DataConfig::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            sweep: SweepConfig::default(),
            ablation: AblationConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::format(path, e))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            k: self.train.k,
            tie_credit: self.eval.tie_credit,
            subsample_cap: self.eval.subsample_cap,
            seed: self.train.seed,
            brier_grid_points: self.eval.brier_grid_points,
        }
    }

    /// Checks that apply to every command.
    pub fn validate(&self) -> Result<()> {
        self.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.eval.n_folds < 2 {
            return Err(CliError::Usage("n_folds must be at least 2".into()));
        }
        if self.eval.subsample_cap < 2 {
            return Err(CliError::Usage("subsample cap must be at least 2".into()));
        }
        Ok(())
    }

    /// The dataset path, which must exist.
    pub fn data_path(&self) -> Result<&Path> {
        let p = self
            .data
            .path
            .as_deref()
            .ok_or_else(|| CliError::Usage("no dataset given (use --data or [data] path)".into()))?;
        if !p.exists() {
            return Err(CliError::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            ));
        }
        Ok(p)
    }
}
