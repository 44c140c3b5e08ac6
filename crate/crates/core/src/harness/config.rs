use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{DataType, RESTRICTED_TOTAL};
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec, Reshape};
use crate::objectives::{DEFAULT_ALPHA, DEFAULT_BETA};

pub const DEFAULT_LR: f64 = 0.001;
pub const DEFAULT_BATCH: usize = 100;
/// Epochs for full Type II/III training.
pub const FULL_EPOCHS: usize = 50;
/// Epochs for Type I training and for every restricted run.
pub const SMALL_EPOCHS: usize = 120;
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// Everything that determines a training run. Serialized as flat TOML:
///
/// ```toml
/// model = "Dual_VAE_2D"
/// reshape = "48x16"
/// train_type = "I"
/// test_type = "III"
/// restricted = true
/// seeds = [0, 1, 2, 3, 4]
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reshape: Option<Reshape>,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch: usize,
    /// Overrides the epoch policy when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Seed of the train+dev/test partition, shared by every run seed so
    /// that all runs are scored on one test set.
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_type")]
    pub train_type: DataType,
    #[serde(default = "default_type")]
    pub test_type: DataType,
    /// Cap train+dev at 2073 episodes.
    #[serde(default)]
    pub restricted: bool,
    /// Explicit train+dev budget; wins over `restricted`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_dir: Option<PathBuf>,
}

fn default_lr() -> f64 {
    DEFAULT_LR
}
fn default_batch() -> usize {
    DEFAULT_BATCH
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}
fn default_type() -> DataType {
    DataType::I
}

impl TrainConfig {
    /// Defaults for a model; 2D kinds get the 48x16 grid.
    pub fn new(model: ModelKind) -> Self {
        TrainConfig {
            model,
            reshape: model.is_2d().then_some(Reshape { rows: 48, cols: 16 }),
            lr: DEFAULT_LR,
            batch: DEFAULT_BATCH,
            epochs: None,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            seeds: default_seeds(),
            split_seed: 0,
            train_type: DataType::I,
            test_type: DataType::I,
            restricted: false,
            train_size: None,
            data_dir: None,
            checkpoint_dir: None,
            report_dir: None,
        }
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.model, self.reshape)
    }

    /// Explicit epochs, else 120 for Type I or restricted training and 50
    /// for full Type II/III training.
    pub fn epochs(&self) -> usize {
        self.epochs.unwrap_or(if self.train_type == DataType::I || self.restricted || self.train_size.is_some() {
            SMALL_EPOCHS
        } else {
            FULL_EPOCHS
        })
    }

    /// Train+dev budget, if any.
    pub fn budget(&self) -> Option<usize> {
        self.train_size.or(self.restricted.then_some(RESTRICTED_TOTAL))
    }

    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.batch == 0 {
            return bad("batch must be at least 1".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.epochs == Some(0) {
            return bad("epochs must be at least 1".into());
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0 && self.beta.is_finite() && self.beta >= 0.0) {
            return bad(format!("alpha and beta must be non-negative, got {} and {}", self.alpha, self.beta));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
