//! Central finite-difference check of the analytic gradients.
//!
//! Every scalar parameter `θ` is perturbed to `θ ± h` and the loss is
//! re-evaluated; `(L(θ+h) − L(θ−h)) / 2h` is compared to the analytic
//! derivative. ReLU and top-1 pooling are piecewise, so a perturbation that
//! flips an activation or the selected expert makes the difference quotient
//! meaningless; such parameters are counted in `kink_skipped` instead of
//! being compared.

use super::backprop::{loss_with_pattern, total_loss};
use super::{TrainConfig, TrainingExample};
use crate::domain::DomainLabelVector;
use crate::error::{Error, Result};
use crate::moe::{MoeMode, MoeParams};
use crate::vecmath::{Rng, Vector};

/// Multiplies one analytic gradient entry before comparison, to confirm that
/// the check catches a wrong gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultInjection {
    pub tensor: usize,
    pub index: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    pub rel_tol: f64,
    /// Differences at or below this absolute size always pass.
    pub abs_floor: f64,
    pub fault: Option<FaultInjection>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-4,
            rel_tol: 1e-4,
            abs_floor: 1e-6,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamMismatch {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub kink_skipped: usize,
    /// Largest relative error among entries whose absolute difference
    /// exceeds the floor.
    pub max_rel_error: f64,
    pub mismatches: Vec<ParamMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares analytic and finite-difference gradients of the total loss for
/// every parameter. Runs in `f64` only.
pub fn grad_check(
    params: &MoeParams<f64>,
    batch: &[&TrainingExample<f64>],
    config: &TrainConfig,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if !(options.step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let (_, grads) = total_loss(batch, params, config)?;
    let (_, base_pattern) = loss_with_pattern(batch, params, config)?;
    let names = params.tensor_names();
    let mut analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    if let Some(fault) = options.fault {
        let entry = analytic
            .get_mut(fault.tensor)
            .and_then(|t| t.get_mut(fault.index))
            .ok_or_else(|| Error::invalid("fault injection target out of range"))?;
        *entry *= fault.factor;
    }

    let mut report = GradCheckReport::default();
    let mut probe = params.clone();
    let h = options.step;
    for (ti, name) in names.iter().enumerate() {
        for idx in 0..analytic[ti].len() {
            let original = probe.tensors()[ti][idx];
            probe.tensors_mut()[ti][idx] = original + h;
            let (plus, plus_pattern) = loss_with_pattern(batch, &probe, config)?;
            probe.tensors_mut()[ti][idx] = original - h;
            let (minus, minus_pattern) = loss_with_pattern(batch, &probe, config)?;
            probe.tensors_mut()[ti][idx] = original;

            if plus_pattern != base_pattern || minus_pattern != base_pattern {
                report.kink_skipped += 1;
                continue;
            }
            report.checked += 1;
            let numeric = (plus.total - minus.total) / (2.0 * h);
            let a = analytic[ti][idx];
            let diff = (a - numeric).abs();
            if diff <= options.abs_floor {
                continue;
            }
            let rel = diff / a.abs().max(numeric.abs());
            report.max_rel_error = report.max_rel_error.max(rel);
            if rel > options.rel_tol {
                report.mismatches.push(ParamMismatch {
                    tensor: name.clone(),
                    index: idx,
                    analytic: a,
                    numeric,
                    rel_error: rel,
                });
            }
        }
    }
    Ok(report)
}

/// A random `f64` problem for gradient checking: Glorot weights, small
/// random biases (so bias gradients are exercised away from zero), Gaussian
/// queries and positives, and random multi-hot labels.
pub fn random_instance(
    dim: usize,
    num_domains: usize,
    batch_size: usize,
    mode: MoeMode,
    seed: u64,
) -> Result<(MoeParams<f64>, Vec<TrainingExample<f64>>)> {
    let mut rng = Rng::new(seed);
    let mut params = MoeParams::<f64>::init(dim, num_domains, mode, &mut rng)?;
    let bias_slots: Vec<usize> = (0..params.tensors().len()).filter(|i| i % 2 == 1).collect();
    {
        let mut tensors = params.tensors_mut();
        for &i in &bias_slots {
            for v in tensors[i].iter_mut() {
                *v = 0.1 * rng.normal();
            }
        }
    }
    let batch = (0..batch_size)
        .map(|i| {
            let q = Vector::from_vec((0..dim).map(|_| rng.normal()).collect());
            let d = Vector::from_vec((0..dim).map(|_| rng.normal()).collect());
            let labels = DomainLabelVector::from_bits((0..num_domains).map(|_| rng.uniform() < 0.4).collect());
            TrainingExample::new(format!("q{i}"), q, d, labels)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((params, batch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moe::{GateNormalization, Pooling};
    use crate::vecmath::Similarity;

    fn check(mode: MoeMode, config: TrainConfig, seed: u64) -> GradCheckReport {
        let (params, batch) = random_instance(6, 3, 4, mode, seed).unwrap();
        let refs: Vec<_> = batch.iter().collect();
        grad_check(&params, &refs, &config, &GradCheckOptions::default()).unwrap()
    }

    #[test]
    fn weighted_pooling_passes() {
        for seed in 0..3 {
            let r = check(MoeMode::default(), TrainConfig::default(), seed);
            assert!(r.passed(), "{r:?}");
            assert!(r.checked > 0);
        }
    }

    #[test]
    fn normalization_top1_and_cosine_pass() {
        let sum = MoeMode { normalization: GateNormalization::SumToOne, ..Default::default() };
        let cfg = TrainConfig { normalization: GateNormalization::SumToOne, ..Default::default() };
        let r = check(sum, cfg, 5);
        assert!(r.passed(), "{r:?}");

        let top1 = MoeMode { pooling: Pooling::Top1, ..Default::default() };
        let cfg = TrainConfig { pooling: Pooling::Top1, ..Default::default() };
        let r = check(top1, cfg, 6);
        assert!(r.passed(), "{r:?}");

        let cfg = TrainConfig { similarity: Similarity::Cosine, temperature: 0.3, bce_weight: 2.5, ..Default::default() };
        let r = check(MoeMode::default(), cfg, 7);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn corrupted_gradient_is_flagged() {
        let (params, batch) = random_instance(6, 3, 4, MoeMode::default(), 1).unwrap();
        let refs: Vec<_> = batch.iter().collect();
        // Pick the entry with the largest analytic gradient in the first
        // specializer's up-projection so the 1% error clears the floor.
        let (_, grads) = total_loss(&refs, &params, &TrainConfig::default()).unwrap();
        let tensor = 8;
        let index = grads.tensors()[tensor]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        let options = GradCheckOptions {
            fault: Some(FaultInjection { tensor, index, factor: 1.01 }),
            ..Default::default()
        };
        let r = grad_check(&params, &refs, &TrainConfig::default(), &options).unwrap();
        assert!(!r.passed());
        assert_eq!(r.mismatches.len(), 1);
        assert_eq!(r.mismatches[0].tensor, "specializer[0].up.weight");
        assert_eq!(r.mismatches[0].index, index);
    }

    #[test]
    fn zero_parameter_model_checks_biases() {
        let params = MoeParams::<f64>::zeros(4, 2, MoeMode::default()).unwrap();
        let (_, batch) = random_instance(4, 2, 3, MoeMode::default(), 9).unwrap();
        let refs: Vec<_> = batch.iter().collect();
        let (_, grads) = total_loss(&refs, &params, &TrainConfig::default()).unwrap();
        // Gate output bias and specializer up bias receive gradient even at zero.
        assert!(grads.gating.output.bias.iter().any(|&g| g != 0.0));
        assert!(grads.specializers[0].up.bias.iter().any(|&g| g != 0.0));
        let r = grad_check(&params, &refs, &TrainConfig::default(), &GradCheckOptions::default()).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.checked + r.kink_skipped, params.num_parameters());
    }
}
