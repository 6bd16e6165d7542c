//! JSON configuration: grid geometry, axon-field parameters, subject presets,
//! and the three per-model training sections, plus the desk/full run profiles.
//!
//! Every section is optional in the file; omitted sections fall back to the
//! built-in defaults (which reproduce the reference setup). Unknown keys are
//! rejected so typos fail loudly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::axon::AxonParams;
use crate::error::{Error, Result};
use crate::grid::VisualFieldGrid;
use crate::models::ModelKind;
use crate::subject::SubjectModel;
use crate::train::TrainConfig;

fn default_approx() -> TrainConfig {
    TrainConfig::default()
}

fn default_encoder() -> TrainConfig {
    TrainConfig { epochs: 10, ..TrainConfig::default() }
}

fn default_inverse() -> TrainConfig {
    TrainConfig::default()
}

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub approx: TrainConfig,
    pub encoder: TrainConfig,
    pub inverse: TrainConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection { approx: default_approx(), encoder: default_encoder(), inverse: default_inverse() }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub grid: VisualFieldGrid,
    pub axon: AxonParams,
    pub subjects: Vec<SubjectModel>,
    pub train: TrainSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            grid: VisualFieldGrid::default(),
            axon: AxonParams::default(),
            subjects: SubjectModel::presets(),
            train: TrainSection::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: Config = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-run the constructor validations that raw deserialization bypasses.
    pub fn validate(&self) -> Result<()> {
        VisualFieldGrid::with_magnification(
            self.grid.rows(),
            self.grid.cols(),
            self.grid.deg_per_px(),
            self.grid.um_per_deg(),
        )?;
        self.axon.validate()?;
        if self.subjects.is_empty() {
            return Err(Error::InvalidArgument("config lists no subjects".into()));
        }
        let mut ids: Vec<&str> = self.subjects.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate subject ids in config".into()));
        }
        for s in &self.subjects {
            s.validate()?;
        }
        for t in [&self.train.approx, &self.train.encoder, &self.train.inverse] {
            t.validate()?;
        }
        Ok(())
    }

    pub fn subject(&self, id: &str) -> Result<&SubjectModel> {
        self.subjects
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::NotFound(format!("subject {id:?} is not in the config")))
    }

    pub fn train_for(&self, kind: ModelKind) -> &TrainConfig {
        match kind {
            ModelKind::Approximator => &self.train.approx,
            ModelKind::Encoder => &self.train.encoder,
            ModelKind::Inverse => &self.train.inverse,
        }
    }
}

/// Run scale: `desk` fits a laptop CPU and CI; `full` mirrors the reference
/// setup (50,000 synthetic samples, the full digit corpus, long training).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Profile {
    Desk,
    Full,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(Error::InvalidArgument(format!("unknown profile {other:?} (expected desk or full)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Full => "full",
        }
    }

    /// Synthetic dataset size.
    pub fn dataset_samples(self) -> usize {
        match self {
            Profile::Desk => 5_000,
            Profile::Full => 50_000,
        }
    }

    /// Digit targets used for encoder training.
    pub fn train_targets(self) -> usize {
        match self {
            Profile::Desk => 2_000,
            Profile::Full => 60_000,
        }
    }

    /// Digit targets used for held-out loss during encoder training.
    pub fn heldout_targets(self) -> usize {
        match self {
            Profile::Desk => 500,
            Profile::Full => 10_000,
        }
    }

    /// Digit targets scored at evaluation time.
    pub fn eval_targets(self) -> usize {
        match self {
            Profile::Desk => 200,
            Profile::Full => 10_000,
        }
    }

    /// Apply the profile's epoch budget on top of a config's training section.
    /// Effective training configuration for one model under this profile.
    ///
    /// The desk preset caps epochs at 3 and substitutes desk-scale optimizer
    /// settings, but only where the config still holds the built-in default —
    /// an explicit value in the config file always wins.
    pub fn train_config(self, cfg: &Config, kind: ModelKind) -> TrainConfig {
        let base = *cfg.train_for(kind);
        match self {
            Profile::Desk => {
                let generic = TrainConfig::default();
                let desk = desk_preset(kind);
                TrainConfig {
                    epochs: 3,
                    lr: if base.lr == generic.lr { desk.lr } else { base.lr },
                    batch_size: if base.batch_size == generic.batch_size {
                        desk.batch_size
                    } else {
                        base.batch_size
                    },
                    ..base
                }
            }
            Profile::Full => base,
        }
    }
}

/// Optimizer settings that converge within the desk profile's 3 epochs; the
/// generic defaults assume the full profile's much longer schedules.
fn desk_preset(kind: ModelKind) -> TrainConfig {
    match kind {
        ModelKind::Approximator => TrainConfig { lr: 3e-3, batch_size: 16, ..TrainConfig::default() },
        ModelKind::Encoder | ModelKind::Inverse => {
            TrainConfig { lr: 1e-3, batch_size: 16, ..TrainConfig::default() }
        }
    }
}
