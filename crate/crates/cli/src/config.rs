//! Settings resolution: command-line flags, then the TOML file, then
//! built-in defaults.
//!
//! ```toml
//! seed = 0
//! threads = 4
//! similarity = "dot"        # dot | cosine
//!
//! [train]
//! epochs = 60
//! batch_size = 512
//! learning_rate = 1e-5
//! temperature = 1.0
//! bce_weight = 1.0
//! validation_fraction = 0.05
//! pooling = "weighted"      # weighted | top1
//! normalization = "none"    # none | sum-to-one
//!
//! [retrieve]
//! k = 100
//!
//! [compare]
//! comparisons = 1
//! ```

use std::path::Path;

use desireme::{GateNormalization, Pooling, Similarity, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::args::{HyperArgs, NormalizationArg, PoolingArg, SimilarityArg};
use crate::error::{CliError, Result};

pub const DEFAULT_K: usize = 100;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub similarity: Option<String>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub retrieve: RetrieveSection,
    #[serde(default)]
    pub compare: CompareSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub temperature: Option<f64>,
    pub bce_weight: Option<f64>,
    pub validation_fraction: Option<f64>,
    pub pooling: Option<String>,
    pub normalization: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrieveSection {
    pub k: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub comparisons: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn similarity(&self) -> Result<Option<Similarity>> {
        self.similarity.as_deref().map(parse_setting).transpose()
    }
}

fn parse_setting<T: std::str::FromStr<Err = desireme::Error>>(s: &str) -> Result<T> {
    s.parse().map_err(|e: desireme::Error| CliError::usage(format!("config: {e}")))
}

impl From<SimilarityArg> for Similarity {
    fn from(a: SimilarityArg) -> Self {
        match a {
            SimilarityArg::Dot => Similarity::Dot,
            SimilarityArg::Cosine => Similarity::Cosine,
        }
    }
}

impl From<PoolingArg> for Pooling {
    fn from(a: PoolingArg) -> Self {
        match a {
            PoolingArg::Weighted => Pooling::Weighted,
            PoolingArg::Top1 => Pooling::Top1,
        }
    }
}

impl From<NormalizationArg> for GateNormalization {
    fn from(a: NormalizationArg) -> Self {
        match a {
            NormalizationArg::None => GateNormalization::None,
            NormalizationArg::SumToOne => GateNormalization::SumToOne,
        }
    }
}

/// The training configuration after applying precedence.
pub fn resolve_train_config(flags: &HyperArgs, file: &FileConfig, seed: u64) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let t = &file.train;
    let pooling = match (flags.pooling, &t.pooling) {
        (Some(p), _) => p.into(),
        (None, Some(s)) => parse_setting(s)?,
        (None, None) => d.pooling,
    };
    let normalization = match (flags.normalization, &t.normalization) {
        (Some(n), _) => n.into(),
        (None, Some(s)) => parse_setting(s)?,
        (None, None) => d.normalization,
    };
    let similarity = match flags.similarity {
        Some(s) => s.into(),
        None => file.similarity()?.unwrap_or(d.similarity),
    };
    let config = TrainConfig {
        epochs: flags.epochs.or(t.epochs).unwrap_or(d.epochs),
        batch_size: flags.batch_size.or(t.batch_size).unwrap_or(d.batch_size),
        learning_rate: flags.learning_rate.or(t.learning_rate).unwrap_or(d.learning_rate),
        temperature: flags.temperature.or(t.temperature).unwrap_or(d.temperature),
        bce_weight: flags.bce_weight.or(t.bce_weight).unwrap_or(d.bce_weight),
        validation_fraction: flags
            .validation_fraction
            .or(t.validation_fraction)
            .unwrap_or(d.validation_fraction),
        seed,
        similarity,
        pooling,
        normalization,
    };
    config.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(config)
}

/// Echo of a training configuration, logged before work starts.
#[derive(Debug, Serialize)]
pub struct TrainEcho {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub bce_weight: f64,
    pub validation_fraction: f64,
    pub similarity: String,
    pub pooling: String,
    pub normalization: String,
}

impl From<&TrainConfig> for TrainEcho {
    fn from(c: &TrainConfig) -> Self {
        TrainEcho {
            seed: c.seed,
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            temperature: c.temperature,
            bce_weight: c.bce_weight,
            validation_fraction: c.validation_fraction,
            similarity: c.similarity.to_string(),
            pooling: c.pooling.to_string(),
            normalization: c.normalization.to_string(),
        }
    }
}

/// Logs a serializable effective configuration.
pub fn echo<T: Serialize>(command: &str, settings: &T) {
    match toml::to_string(settings) {
        Ok(text) => log::info!("{command}: effective configuration\n{}", text.trim_end()),
        Err(e) => log::warn!("{command}: could not render configuration: {e}"),
    }
}
