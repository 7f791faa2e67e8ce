use serde::{Deserialize, Serialize};

use crate::encoder::{Dims, FeatureVariant};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::scorer::ObjectiveMode;

/// Model variant being trained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Clean/noisy losses over mention and context features.
    #[default]
    Full,
    /// Clean loss for every mention.
    AllClean,
    /// Context features only.
    NoMention,
}

impl Mode {
    pub fn objective(self) -> ObjectiveMode {
        match self {
            Mode::AllClean => ObjectiveMode::AllClean,
            Mode::Full | Mode::NoMention => ObjectiveMode::Full,
        }
    }

    pub fn variant(self) -> FeatureVariant {
        match self {
            Mode::NoMention => FeatureVariant::NoMention,
            Mode::Full | Mode::AllClean => FeatureVariant::Full,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "all-clean" => Ok(Mode::AllClean),
            "no-mention" => Ok(Mode::NoMention),
            _ => Err(Error::InvalidArgument(format!(
                "unknown mode {s:?} (expected full, all-clean or no-mention)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_p: f64,
    pub seed: u64,
    pub mode: Mode,
    pub dims: Dims,
    pub lowercase: bool,
    pub freeze_word_embeddings: bool,
    /// Copy lookup-table rows for shared vocabulary entries when warm starting.
    pub copy_embeddings: bool,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 20,
            dropout_p: 0.5,
            seed: 0,
            mode: Mode::Full,
            dims: Dims::default(),
            lowercase: true,
            freeze_word_embeddings: false,
            copy_embeddings: false,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    /// Collects every invalid field into one error.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            errors.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            errors.push("batch_size must be at least 1".to_string());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            errors.push(format!("dropout_p must lie in [0, 1), got {}", self.dropout_p));
        }
        self.dims.validate(&mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errors))
        }
    }
}
