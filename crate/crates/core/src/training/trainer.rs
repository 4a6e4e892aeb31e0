use std::fmt;

use super::adam::{adam_step, AdamState};
use super::backprop::{batch_loss, total_loss, LossBreakdown};
use super::{TrainConfig, TrainingExample};
use crate::error::{check_dim, Error, Result};
use crate::moe::MoeParams;
use crate::scalar::Scalar;
use crate::vecmath::Rng;

/// RNG stream of the parameter initialization, forked from the seed.
pub const INIT_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;
const SHUFFLE_STREAM: u64 = 3;

/// Mean losses of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train: LossBreakdown,
    pub val: LossBreakdown,
}

impl fmt::Display for EpochRecord {
    /// Tab-separated: epoch, train total/contrastive/bce, val total/contrastive/bce.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.epoch,
            self.train.total,
            self.train.contrastive,
            self.train.bce,
            self.val.total,
            self.val.contrastive,
            self.val.bce
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    /// Snapshot with the lowest validation loss (the initialization when no
    /// epoch ran).
    pub params: MoeParams<S>,
    pub log: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

/// Index of the lowest loss; the earliest wins ties.
pub fn select_best_epoch(val_losses: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in val_losses.iter().enumerate() {
        if best.is_none_or(|b| v < val_losses[b]) {
            best = Some(i);
        }
    }
    best
}

/// Keeps the snapshot with the lowest observed validation loss.
#[derive(Debug, Clone)]
pub struct BestCheckpoint<T> {
    best: Option<(usize, f64, T)>,
}

impl<T> Default for BestCheckpoint<T> {
    fn default() -> Self {
        BestCheckpoint { best: None }
    }
}

impl<T> BestCheckpoint<T> {
    /// Records an epoch; `snapshot` is only called when it improves on the
    /// best loss so far.
    pub fn observe(&mut self, epoch: usize, val_loss: f64, snapshot: impl FnOnce() -> T) {
        let improves = match &self.best {
            None => true,
            Some((_, best, _)) => val_loss < *best,
        };
        if improves {
            self.best = Some((epoch, val_loss, snapshot()));
        }
    }

    pub fn epoch(&self) -> Option<usize> {
        self.best.as_ref().map(|b| b.0)
    }

    pub fn into_inner(self) -> Option<(usize, T)> {
        self.best.map(|(e, _, t)| (e, t))
    }
}

/// Validation split size: `ceil(n · fraction)`, at least 2 so the
/// in-batch loss is defined.
fn split_sizes(n: usize, fraction: f64) -> Result<(usize, usize)> {
    let n_val = ((n as f64 * fraction).ceil() as usize).max(2);
    if n < n_val + 2 {
        return Err(Error::invalid(format!(
            "need at least {} examples for a {:.0}% validation split with batches of 2, got {n}",
            n_val + 2,
            fraction * 100.0
        )));
    }
    Ok((n - n_val, n_val))
}

fn chunked_loss<S: Scalar>(
    examples: &[&TrainingExample<S>],
    params: &MoeParams<S>,
    config: &TrainConfig,
) -> Result<LossBreakdown> {
    let mut acc = LossBreakdown::default();
    for chunk in batches(examples.len(), config.batch_size) {
        let batch = &examples[chunk.clone()];
        let loss = batch_loss(batch, params, config)?;
        acc.scaled_add(&loss, batch.len() as f64 / examples.len() as f64);
    }
    Ok(acc)
}

/// Contiguous batch ranges. A trailing remainder of one example is folded
/// into the previous batch because the contrastive loss needs two.
fn batches(n: usize, batch_size: usize) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(batch_size)
        .map(|start| start..(start + batch_size).min(n))
        .collect();
    if out.len() > 1 && out.last().is_some_and(|r| r.len() < 2) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().end = last.end;
    }
    out
}

/// Trains a fresh model on `examples`.
///
/// Examples are split once (seeded) into training and validation sets. Each
/// epoch reshuffles the training set, runs Adam over its batches, then
/// evaluates the validation loss. The snapshot with the lowest validation
/// total loss is returned.
pub fn train<S: Scalar>(examples: &[TrainingExample<S>], config: &TrainConfig) -> Result<TrainOutcome<S>> {
    config.validate()?;
    let first = examples
        .first()
        .ok_or_else(|| Error::invalid("no training examples"))?;
    let dim = first.query.dim();
    let num_domains = first.labels.len();
    for ex in examples {
        check_dim("training query", dim, ex.query.dim())?;
        check_dim("training labels", num_domains, ex.labels.len())?;
    }

    let root = Rng::new(config.seed);
    let mut params = MoeParams::init(dim, num_domains, config.mode(), &mut root.fork(INIT_STREAM))?;
    if config.epochs == 0 {
        return Ok(TrainOutcome {
            params,
            log: Vec::new(),
            best_epoch: None,
        });
    }

    let (n_train, _) = split_sizes(examples.len(), config.validation_fraction)?;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    root.fork(SPLIT_STREAM).shuffle(&mut order);
    let mut train_idx = order[..n_train].to_vec();
    let val_set: Vec<&TrainingExample<S>> = order[n_train..].iter().map(|&i| &examples[i]).collect();

    let mut shuffle_rng = root.fork(SHUFFLE_STREAM);
    let mut adam = AdamState::for_params(&params);
    let mut best = BestCheckpoint::default();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        shuffle_rng.shuffle(&mut train_idx);
        let mut train_loss = LossBreakdown::default();
        for range in batches(n_train, config.batch_size) {
            let batch: Vec<&TrainingExample<S>> = train_idx[range].iter().map(|&i| &examples[i]).collect();
            let (loss, grads) = total_loss(&batch, &params, config)?;
            train_loss.scaled_add(&loss, batch.len() as f64 / n_train as f64);
            adam_step(&mut params, &grads, &mut adam, config.learning_rate)?;
        }
        if !params.is_finite() {
            return Err(Error::numerical(format!("parameters diverged in epoch {epoch}")));
        }
        let val_loss = chunked_loss(&val_set, &params, config)?;
        best.observe(epoch, val_loss.total, || params.clone());
        log.push(EpochRecord {
            epoch,
            train: train_loss,
            val: val_loss,
        });
    }

    let (best_epoch, params) = best
        .into_inner()
        .expect("at least one epoch ran");
    Ok(TrainOutcome {
        params,
        log,
        best_epoch: Some(best_epoch),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainLabelVector;
    use crate::vecmath::Vector;

    fn toy_examples(n: usize, seed: u64) -> Vec<TrainingExample<f32>> {
        let mut rng = Rng::new(seed);
        (0..n)
            .map(|i| {
                let d: Vec<f32> = (0..4).map(|_| rng.normal() as f32).collect();
                let q: Vec<f32> = d.iter().map(|v| v + 0.3 * rng.normal() as f32).collect();
                TrainingExample::new(
                    format!("q{i}"),
                    Vector::from_vec(q),
                    Vector::from_vec(d),
                    DomainLabelVector::one_hot(2, i % 2),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn best_epoch_rule() {
        assert_eq!(select_best_epoch(&[3.0, 1.0, 2.0]), Some(1));
        assert_eq!(select_best_epoch(&[1.0, 1.0]), Some(0));
        assert_eq!(select_best_epoch(&[]), None);

        let mut tracker = BestCheckpoint::default();
        for (epoch, loss) in [(1, 3.0), (2, 1.0), (3, 2.0)] {
            tracker.observe(epoch, loss, || format!("snapshot-{epoch}"));
        }
        assert_eq!(tracker.into_inner(), Some((2, "snapshot-2".to_string())));
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let examples = toy_examples(10, 1);
        let config = TrainConfig { epochs: 0, seed: 4, ..Default::default() };
        let out = train(&examples, &config).unwrap();
        assert!(out.log.is_empty());
        assert_eq!(out.best_epoch, None);
        let fresh = MoeParams::<f32>::init(4, 2, config.mode(), &mut Rng::new(4).fork(INIT_STREAM)).unwrap();
        assert_eq!(out.params, fresh);
    }

    #[test]
    fn too_few_examples_rejected() {
        let examples = toy_examples(3, 1);
        assert!(matches!(
            train(&examples, &TrainConfig { epochs: 1, ..Default::default() }),
            Err(Error::InvalidInput(_))
        ));
        assert!(train(&toy_examples(4, 1), &TrainConfig { epochs: 1, ..Default::default() }).is_ok());
    }

    #[test]
    fn batching_folds_singletons() {
        assert_eq!(batches(5, 2), vec![0..2, 2..5]);
        assert_eq!(batches(4, 2), vec![0..2, 2..4]);
        assert_eq!(batches(3, 512), vec![0..3]);
    }

    #[test]
    fn training_is_deterministic_and_logs_every_epoch() {
        let examples = toy_examples(40, 2);
        let config = TrainConfig { epochs: 3, batch_size: 8, learning_rate: 1e-2, ..Default::default() };
        let a = train(&examples, &config).unwrap();
        let b = train(&examples, &config).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.log, b.log);
        assert_eq!(a.log.len(), 3);
        let best = select_best_epoch(&a.log.iter().map(|r| r.val.total).collect::<Vec<_>>()).unwrap();
        assert_eq!(a.best_epoch, Some(best + 1));
        assert_eq!(a.log[0].to_string().split('\t').count(), 7);
    }
}
