use rayon::prelude::*;

use super::loss::{bce_with_logits, contrastive_slices};
use super::{TrainConfig, TrainingExample};
use crate::error::{check_dim, Error, Result};
use crate::moe::{argmax, normalize_gates, Dense, GateNormalization, MoeParams, Pooling};
use crate::scalar::Scalar;
use crate::vecmath::{dot, relu, sigmoid};

/// Loss value split into its two terms. `total = contrastive + λ·bce`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub contrastive: f64,
    pub bce: f64,
}

impl LossBreakdown {
    pub(crate) fn scaled_add(&mut self, other: &LossBreakdown, weight: f64) {
        self.total += weight * other.total;
        self.contrastive += weight * other.contrastive;
        self.bce += weight * other.bce;
    }
}

struct SpecializerTrace<S> {
    hidden_pre: Vec<S>,
    hidden: Vec<S>,
    out: Vec<S>,
}

/// Everything the reverse pass needs from one example's forward pass.
pub(crate) struct ExampleTrace<S> {
    h1_pre: Vec<S>,
    h1: Vec<S>,
    h2_pre: Vec<S>,
    h2: Vec<S>,
    logits: Vec<S>,
    gates: Vec<S>,
    /// Pooling weights after normalization, or one-hot for top-1.
    weights: Vec<S>,
    top: usize,
    /// `None` for specializers top-1 pooling never evaluated.
    specializers: Vec<Option<SpecializerTrace<S>>>,
    output: Vec<S>,
}

struct ExampleDeltas<S> {
    gate_hidden: Vec<S>,
    gate_expand: Vec<S>,
    gate_output: Vec<S>,
    /// Per specializer: (down-layer delta, up-layer delta).
    specializers: Vec<Option<(Vec<S>, Vec<S>)>>,
}

/// Below this batch size the per-example work runs on the calling thread.
const PARALLEL_MIN_BATCH: usize = 16;

fn map_examples<T: Send, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
{
    if n >= PARALLEL_MIN_BATCH {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

fn layer_forward<S: Scalar>(layer: &Dense<S>, x: &[S]) -> (Vec<S>, Vec<S>) {
    let pre = layer.forward(x);
    let post = pre.iter().map(|&v| relu(v)).collect();
    (pre, post)
}

fn forward_example<S: Scalar>(params: &MoeParams<S>, x: &[S]) -> ExampleTrace<S> {
    let g = &params.gating;
    let (h1_pre, h1) = layer_forward(&g.hidden, x);
    let (h2_pre, h2) = layer_forward(&g.expand, &h1);
    let logits = g.output.forward(&h2);
    let gates: Vec<S> = logits.iter().map(|&z| sigmoid(z)).collect();
    let top = argmax(&gates);
    let m = params.num_domains();
    let weights = match params.mode.pooling {
        Pooling::Weighted => normalize_gates(&gates, params.mode.normalization),
        Pooling::Top1 => {
            let mut w = vec![S::zero(); m];
            w[top] = S::one();
            w
        }
    };

    let mut acc = vec![S::zero(); params.dim()];
    let specializers = params
        .specializers
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if params.mode.pooling == Pooling::Top1 && i != top {
                return None;
            }
            let (hidden_pre, hidden) = layer_forward(&s.down, x);
            let out = s.up.forward(&hidden);
            for (a, &o) in acc.iter_mut().zip(&out) {
                *a += weights[i] * o;
            }
            Some(SpecializerTrace {
                hidden_pre,
                hidden,
                out,
            })
        })
        .collect();
    let output = x.iter().zip(acc).map(|(&a, b)| a + b).collect();

    ExampleTrace {
        h1_pre,
        h1,
        h2_pre,
        h2,
        logits,
        gates,
        weights,
        top,
        specializers,
        output,
    }
}

fn validate_batch<S: Scalar>(batch: &[&TrainingExample<S>], params: &MoeParams<S>) -> Result<()> {
    if batch.len() < 2 {
        return Err(Error::invalid(format!(
            "a training batch needs at least 2 examples, got {}",
            batch.len()
        )));
    }
    for ex in batch {
        check_dim("training query", params.dim(), ex.query.dim())?;
        check_dim("training positive", params.dim(), ex.positive.dim())?;
        check_dim("training labels", params.num_domains(), ex.labels.len())?;
    }
    Ok(())
}

pub(crate) fn forward_batch<S: Scalar>(
    batch: &[&TrainingExample<S>],
    params: &MoeParams<S>,
) -> Vec<ExampleTrace<S>> {
    map_examples(batch.len(), |b| forward_example(params, &batch[b].query))
}

struct LossTerms<S> {
    breakdown: LossBreakdown,
    output_grads: Vec<Vec<S>>,
    logit_grads: Vec<Vec<S>>,
}

fn loss_terms<S: Scalar>(
    batch: &[&TrainingExample<S>],
    traces: &[ExampleTrace<S>],
    config: &TrainConfig,
    with_grads: bool,
) -> Result<LossTerms<S>> {
    let outputs: Vec<&[S]> = traces.iter().map(|t| t.output.as_slice()).collect();
    let positives: Vec<&[S]> = batch.iter().map(|e| e.positive.as_slice()).collect();
    let (contrastive, output_grads) = contrastive_slices(
        &outputs,
        &positives,
        S::of(config.temperature),
        config.similarity,
        with_grads,
    )?;

    let b = S::of(batch.len() as f64);
    let lambda = S::of(config.bce_weight);
    let mut bce = S::zero();
    let mut logit_grads = Vec::with_capacity(if with_grads { batch.len() } else { 0 });
    for (ex, trace) in batch.iter().zip(traces) {
        let out = bce_with_logits(&trace.logits, &ex.labels)?;
        bce += out.loss;
        if with_grads {
            logit_grads.push(out.logit_grads.iter().map(|&g| lambda * g / b).collect());
        }
    }
    let bce = bce / b;
    let total = contrastive + lambda * bce;
    if !total.is_finite() {
        return Err(Error::numerical("training loss is not finite"));
    }
    Ok(LossTerms {
        breakdown: LossBreakdown {
            total: total.as_f64(),
            contrastive: contrastive.as_f64(),
            bce: bce.as_f64(),
        },
        output_grads,
        logit_grads,
    })
}

fn relu_backward<S: Scalar>(upstream: Vec<S>, pre: &[S]) -> Vec<S> {
    upstream
        .into_iter()
        .zip(pre)
        .map(|(g, &p)| if p > S::zero() { g } else { S::zero() })
        .collect()
}

fn backward_example<S: Scalar>(
    params: &MoeParams<S>,
    trace: &ExampleTrace<S>,
    output_grad: &[S],
    logit_grad: &[S],
) -> ExampleDeltas<S> {
    let m = params.num_domains();

    // Skip connection: ∂L/∂pooled = ∂L/∂output. The input embedding is frozen.
    let mut weight_grads = vec![S::zero(); m];
    let specializers = params
        .specializers
        .iter()
        .zip(&trace.specializers)
        .enumerate()
        .map(|(i, (s, st))| {
            let st = st.as_ref()?;
            weight_grads[i] = dot(&st.out, output_grad);
            let w = trace.weights[i];
            let up_delta: Vec<S> = output_grad.iter().map(|&g| w * g).collect();
            let down_delta = relu_backward(s.up.weight.tmatvec(&up_delta), &st.hidden_pre);
            Some((down_delta, up_delta))
        })
        .collect();

    let mut dz = logit_grad.to_vec();
    if params.mode.pooling == Pooling::Weighted {
        let gate_grads = match params.mode.normalization {
            GateNormalization::None => weight_grads,
            GateNormalization::SumToOne => {
                // w = g / Σg  ⇒  ∂L/∂g_j = (∂L/∂w_j − Σ_i ∂L/∂w_i · w_i) / Σg
                let total: S = trace.gates.iter().copied().sum();
                let inner: S = weight_grads.iter().zip(&trace.weights).map(|(&a, &b)| a * b).sum();
                weight_grads.iter().map(|&a| (a - inner) / total).collect()
            }
        };
        for ((z, &dg), &g) in dz.iter_mut().zip(&gate_grads).zip(&trace.gates) {
            *z += dg * g * (S::one() - g);
        }
    }

    let gating = &params.gating;
    let gate_expand = relu_backward(gating.output.weight.tmatvec(&dz), &trace.h2_pre);
    let gate_hidden = relu_backward(gating.expand.weight.tmatvec(&gate_expand), &trace.h1_pre);

    ExampleDeltas {
        gate_hidden,
        gate_expand,
        gate_output: dz,
        specializers,
    }
}

/// `grad.W += Σ_b δ_b ⊗ input_b`, `grad.b += Σ_b δ_b`, summed in batch order.
fn accumulate_layer<S: Scalar>(grad: &mut Dense<S>, pairs: &[(&[S], &[S])]) {
    let cols = grad.weight.cols();
    let row_update = |(r, row): (usize, &mut [S])| {
        for (delta, input) in pairs {
            let d = delta[r];
            if d == S::zero() {
                continue;
            }
            for (w, &x) in row.iter_mut().zip(*input) {
                *w += d * x;
            }
        }
    };
    if grad.weight.rows() * cols * pairs.len() >= 1 << 16 {
        grad.weight
            .as_mut_slice()
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(row_update);
    } else {
        grad.weight.as_mut_slice().chunks_mut(cols).enumerate().for_each(row_update);
    }
    for (delta, _) in pairs {
        for (b, &d) in grad.bias.iter_mut().zip(*delta) {
            *b += d;
        }
    }
}

/// Loss of one batch without gradients.
pub fn batch_loss<S: Scalar>(
    batch: &[&TrainingExample<S>],
    params: &MoeParams<S>,
    config: &TrainConfig,
) -> Result<LossBreakdown> {
    validate_batch(batch, params)?;
    let traces = forward_batch(batch, params);
    Ok(loss_terms(batch, &traces, config, false)?.breakdown)
}

/// Loss of one batch and its gradient with respect to every parameter.
///
/// The returned gradient has the same layout as `params`.
pub fn total_loss<S: Scalar>(
    batch: &[&TrainingExample<S>],
    params: &MoeParams<S>,
    config: &TrainConfig,
) -> Result<(LossBreakdown, MoeParams<S>)> {
    validate_batch(batch, params)?;
    let traces = forward_batch(batch, params);
    let terms = loss_terms(batch, &traces, config, true)?;
    let deltas = map_examples(batch.len(), |b| {
        backward_example(params, &traces[b], &terms.output_grads[b], &terms.logit_grads[b])
    });

    let mut grads = params.zeros_like();
    let x = |b: usize| batch[b].query.as_slice();

    let pairs: Vec<(&[S], &[S])> = (0..batch.len())
        .map(|b| (deltas[b].gate_hidden.as_slice(), x(b)))
        .collect();
    accumulate_layer(&mut grads.gating.hidden, &pairs);
    let pairs: Vec<(&[S], &[S])> = (0..batch.len())
        .map(|b| (deltas[b].gate_expand.as_slice(), traces[b].h1.as_slice()))
        .collect();
    accumulate_layer(&mut grads.gating.expand, &pairs);
    let pairs: Vec<(&[S], &[S])> = (0..batch.len())
        .map(|b| (deltas[b].gate_output.as_slice(), traces[b].h2.as_slice()))
        .collect();
    accumulate_layer(&mut grads.gating.output, &pairs);

    let spec_grads: Vec<_> = grads.specializers.iter_mut().enumerate().collect();
    let accumulate_specializer = |(i, g): (usize, &mut crate::moe::SpecializerParams<S>)| {
        let active: Vec<usize> = (0..batch.len())
            .filter(|&b| deltas[b].specializers[i].is_some())
            .collect();
        let down: Vec<(&[S], &[S])> = active
            .iter()
            .map(|&b| (deltas[b].specializers[i].as_ref().unwrap().0.as_slice(), x(b)))
            .collect();
        accumulate_layer(&mut g.down, &down);
        let up: Vec<(&[S], &[S])> = active
            .iter()
            .map(|&b| {
                let hidden = traces[b].specializers[i].as_ref().unwrap().hidden.as_slice();
                (deltas[b].specializers[i].as_ref().unwrap().1.as_slice(), hidden)
            })
            .collect();
        accumulate_layer(&mut g.up, &up);
    };
    if spec_grads.len() > 1 && batch.len() >= PARALLEL_MIN_BATCH {
        spec_grads.into_par_iter().for_each(accumulate_specializer);
    } else {
        spec_grads.into_iter().for_each(accumulate_specializer);
    }

    if !grads.is_finite() {
        return Err(Error::numerical("non-finite gradient"));
    }
    Ok((terms.breakdown, grads))
}

/// ReLU on/off pattern and top-1 choices of a forward pass. Finite
/// differences are only meaningful when both perturbed evaluations share the
/// unperturbed pattern.
pub(crate) fn activation_pattern<S: Scalar>(traces: &[ExampleTrace<S>]) -> Vec<u64> {
    let mut out = Vec::new();
    let mut word = 0u64;
    let mut nbits = 0;
    let mut push = |bit: bool, out: &mut Vec<u64>| {
        word = (word << 1) | bit as u64;
        nbits += 1;
        if nbits == 64 {
            out.push(word);
            word = 0;
            nbits = 0;
        }
    };
    for t in traces {
        for &p in t.h1_pre.iter().chain(&t.h2_pre) {
            push(p > S::zero(), &mut out);
        }
        for s in t.specializers.iter().flatten() {
            for &p in &s.hidden_pre {
                push(p > S::zero(), &mut out);
            }
        }
        out.push(t.top as u64);
    }
    out.push(word);
    out
}

/// Loss and activation pattern, for finite-difference checking.
pub(crate) fn loss_with_pattern<S: Scalar>(
    batch: &[&TrainingExample<S>],
    params: &MoeParams<S>,
    config: &TrainConfig,
) -> Result<(LossBreakdown, Vec<u64>)> {
    validate_batch(batch, params)?;
    let traces = forward_batch(batch, params);
    let breakdown = loss_terms(batch, &traces, config, false)?.breakdown;
    Ok((breakdown, activation_pattern(&traces)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainLabelVector;
    use crate::moe::MoeMode;
    use crate::training::contrastive_loss;
    use crate::vecmath::{Rng, Similarity, Vector};

    fn random_batch(rng: &mut Rng, b: usize, dim: usize, m: usize) -> Vec<TrainingExample<f64>> {
        (0..b)
            .map(|i| {
                let q = Vector::from_vec((0..dim).map(|_| rng.normal()).collect());
                let d = Vector::from_vec((0..dim).map(|_| rng.normal()).collect());
                let labels = DomainLabelVector::from_indices(m, [i % m]);
                TrainingExample::new(format!("q{i}"), q, d, labels).unwrap()
            })
            .collect()
    }

    #[test]
    fn lambda_zero_is_contrastive_only() {
        let mut rng = Rng::new(2);
        let params = MoeParams::<f64>::init(6, 3, MoeMode::default(), &mut rng).unwrap();
        let batch = random_batch(&mut rng, 4, 6, 3);
        let refs: Vec<_> = batch.iter().collect();
        let config = TrainConfig { bce_weight: 0.0, ..Default::default() };
        let (loss, _) = total_loss(&refs, &params, &config).unwrap();
        assert_eq!(loss.total, loss.contrastive);
    }

    #[test]
    fn zero_specializers_reduce_to_raw_contrastive() {
        let mut rng = Rng::new(3);
        let mut params = MoeParams::<f64>::init(4, 2, MoeMode::default(), &mut rng).unwrap();
        params.zero_specializers();
        let batch = random_batch(&mut rng, 5, 4, 2);
        let refs: Vec<_> = batch.iter().collect();
        let config = TrainConfig { bce_weight: 0.0, ..Default::default() };
        let loss = batch_loss(&refs, &params, &config).unwrap();
        let q: Vec<_> = batch.iter().map(|e| e.query.clone()).collect();
        let d: Vec<_> = batch.iter().map(|e| e.positive.clone()).collect();
        let raw = contrastive_loss(&q, &d, 1.0, Similarity::Dot).unwrap().loss;
        assert_eq!(loss.total, raw);
    }

    #[test]
    fn top1_lambda_zero_leaves_gate_untouched() {
        let mut rng = Rng::new(4);
        let mode = MoeMode { pooling: Pooling::Top1, ..Default::default() };
        let params = MoeParams::<f64>::init(6, 3, mode, &mut rng).unwrap();
        let batch = random_batch(&mut rng, 4, 6, 3);
        let refs: Vec<_> = batch.iter().collect();
        let config = TrainConfig { bce_weight: 0.0, pooling: Pooling::Top1, ..Default::default() };
        let (_, grads) = total_loss(&refs, &params, &config).unwrap();
        for t in &grads.tensors()[..6] {
            assert!(t.iter().all(|&v| v == 0.0));
        }
        // Weighted pooling routes contrastive gradient into the gate output.
        let params = MoeParams::<f64>::init(6, 3, MoeMode::default(), &mut rng).unwrap();
        let (_, grads) = total_loss(&refs, &params, &TrainConfig { bce_weight: 0.0, ..Default::default() }).unwrap();
        assert!(grads.gating.output.bias.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn batch_validation() {
        let mut rng = Rng::new(5);
        let params = MoeParams::<f64>::init(4, 2, MoeMode::default(), &mut rng).unwrap();
        let batch = random_batch(&mut rng, 1, 4, 2);
        let refs: Vec<_> = batch.iter().collect();
        assert!(total_loss(&refs, &params, &TrainConfig::default()).is_err());
        let wrong = random_batch(&mut rng, 3, 6, 2);
        let refs: Vec<_> = wrong.iter().collect();
        assert!(matches!(
            total_loss(&refs, &params, &TrainConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn parallel_and_serial_paths_agree_bitwise() {
        // 40 examples takes the rayon path; recomputing per-chunk must give
        // identical bits because summation order is fixed.
        let mut rng = Rng::new(6);
        let params = MoeParams::<f32>::init(8, 3, MoeMode::default(), &mut rng).unwrap();
        let batch: Vec<TrainingExample<f32>> = (0..40)
            .map(|i| {
                let q = Vector::from_vec((0..8).map(|_| rng.normal() as f32).collect());
                let d = Vector::from_vec((0..8).map(|_| rng.normal() as f32).collect());
                TrainingExample::new(format!("q{i}"), q, d, DomainLabelVector::one_hot(3, i % 3)).unwrap()
            })
            .collect();
        let refs: Vec<_> = batch.iter().collect();
        let config = TrainConfig::default();
        let (l1, g1) = total_loss(&refs, &params, &config).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let (l2, g2) = pool.install(|| total_loss(&refs, &params, &config)).unwrap();
        assert_eq!(l1, l2);
        let bits = |p: &MoeParams<f32>| {
            p.tensors().iter().flat_map(|t| t.iter().map(|v| v.to_bits())).collect::<Vec<_>>()
        };
        assert_eq!(bits(&g1), bits(&g2));
    }
}
