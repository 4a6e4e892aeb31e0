//! Joint training of the gate and the specializers.
//!
//! The objective is `L = L_contrastive + λ · L_bce`: in-batch InfoNCE between
//! transformed queries and their positive documents, plus binary
//! cross-entropy between gate logits and the query's domain labels.
//! Gradients are accumulated by hand in reverse order through the skip
//! connection, pooling, specializers and gate.

mod adam;
mod backprop;
pub mod gradcheck;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamState};
pub use backprop::{batch_loss, total_loss, LossBreakdown};
pub use gradcheck::{grad_check, random_instance, FaultInjection, GradCheckOptions, GradCheckReport, ParamMismatch};
pub use loss::{bce_loss, bce_with_logits, contrastive_loss, BceOutput, ContrastiveOutput};
pub use trainer::{select_best_epoch, train, BestCheckpoint, EpochRecord, TrainOutcome, INIT_STREAM};

pub use crate::domain::DomainLabelVector;

use crate::error::{check_dim, Error, Result};
use crate::moe::{GateNormalization, MoeMode, Pooling};
use crate::scalar::Scalar;
use crate::vecmath::{Similarity, Vector};

/// One query with its positive document and domain labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample<S> {
    pub query_id: String,
    pub query: Vector<S>,
    pub positive: Vector<S>,
    pub labels: DomainLabelVector,
}

impl<S: Scalar> TrainingExample<S> {
    pub fn new(
        query_id: impl Into<String>,
        query: Vector<S>,
        positive: Vector<S>,
        labels: DomainLabelVector,
    ) -> Result<Self> {
        check_dim("positive document", query.dim(), positive.dim())?;
        Ok(TrainingExample {
            query_id: query_id.into(),
            query,
            positive,
            labels,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub validation_fraction: f64,
    pub temperature: f64,
    /// Weight λ of the BCE term.
    pub bce_weight: f64,
    pub seed: u64,
    pub similarity: Similarity,
    pub pooling: Pooling,
    pub normalization: GateNormalization,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 512,
            learning_rate: 1e-5,
            epochs: 60,
            validation_fraction: 0.05,
            temperature: 1.0,
            bce_weight: 1.0,
            seed: 0,
            similarity: Similarity::Dot,
            pooling: Pooling::Weighted,
            normalization: GateNormalization::None,
        }
    }
}

impl TrainConfig {
    pub fn mode(&self) -> MoeMode {
        MoeMode {
            pooling: self.pooling,
            normalization: self.normalization,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::invalid(format!(
                "batch_size must be at least 2 for in-batch negatives, got {}",
                self.batch_size
            )));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid(format!("temperature must be positive, got {}", self.temperature)));
        }
        if !(self.bce_weight >= 0.0 && self.bce_weight.is_finite()) {
            return Err(Error::invalid(format!("bce_weight must be non-negative, got {}", self.bce_weight)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_hyperparameters() {
        let c = TrainConfig::default();
        assert_eq!(c.batch_size, 512);
        assert_eq!(c.learning_rate, 1e-5);
        assert_eq!(c.epochs, 60);
        assert_eq!(c.validation_fraction, 0.05);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            TrainConfig { batch_size: 1, ..Default::default() },
            TrainConfig { validation_fraction: 0.0, ..Default::default() },
            TrainConfig { validation_fraction: 1.0, ..Default::default() },
            TrainConfig { temperature: 0.0, ..Default::default() },
            TrainConfig { bce_weight: -1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
