use crate::domain::DomainLabelVector;
use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;
use crate::vecmath::{dot, Similarity, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveOutput<S> {
    pub loss: S,
    /// `∂L/∂q_i` for every query in the batch.
    pub grads: Vec<Vector<S>>,
}

/// In-batch InfoNCE:
/// `L = -(1/B) Σ_i log softmax_j(s(q_i, d_j) / τ)[i]`.
pub fn contrastive_loss<S: Scalar>(
    queries: &[Vector<S>],
    docs: &[Vector<S>],
    temperature: S,
    similarity: Similarity,
) -> Result<ContrastiveOutput<S>> {
    let q: Vec<&[S]> = queries.iter().map(|v| v.as_slice()).collect();
    let d: Vec<&[S]> = docs.iter().map(|v| v.as_slice()).collect();
    let (loss, grads) = contrastive_slices(&q, &d, temperature, similarity, true)?;
    Ok(ContrastiveOutput {
        loss,
        grads: grads.into_iter().map(Vector::from_vec).collect(),
    })
}

/// Slice-level InfoNCE. Gradients are skipped (empty) when `with_grads` is
/// false.
pub(crate) fn contrastive_slices<S: Scalar>(
    queries: &[&[S]],
    docs: &[&[S]],
    temperature: S,
    similarity: Similarity,
    with_grads: bool,
) -> Result<(S, Vec<Vec<S>>)> {
    let b = queries.len();
    check_dim("contrastive batch: queries vs documents", b, docs.len())?;
    if b < 2 {
        return Err(Error::invalid(format!(
            "contrastive loss needs a batch of at least 2, got {b}"
        )));
    }
    let dim = queries[0].len();
    for v in queries.iter().chain(docs) {
        check_dim("contrastive batch: embedding dimension", dim, v.len())?;
    }

    let q_norms: Vec<S> = queries.iter().map(|q| dot(q, q).sqrt()).collect();
    let d_norms: Vec<S> = docs.iter().map(|d| dot(d, d).sqrt()).collect();
    if similarity == Similarity::Cosine
        && q_norms.iter().chain(&d_norms).any(|&n| n == S::zero())
    {
        return Err(Error::numerical("cosine similarity of a zero vector"));
    }

    // sims[i][j] = s(q_i, d_j)
    let mut sims = vec![S::zero(); b * b];
    for i in 0..b {
        for j in 0..b {
            let mut s = dot(queries[i], docs[j]);
            if similarity == Similarity::Cosine {
                s /= q_norms[i] * d_norms[j];
            }
            if !s.is_finite() {
                return Err(Error::numerical(format!("non-finite similarity at ({i}, {j})")));
            }
            sims[i * b + j] = s;
        }
    }

    let bs = S::of(b as f64);
    let mut loss = S::zero();
    let mut grads = Vec::with_capacity(if with_grads { b } else { 0 });
    for i in 0..b {
        let row = &sims[i * b..(i + 1) * b];
        let max = row.iter().fold(S::neg_infinity(), |m, &s| m.max(s / temperature));
        let sum_exp: S = row.iter().map(|&s| (s / temperature - max).exp()).sum();
        let lse = max + sum_exp.ln();
        loss += lse - row[i] / temperature;

        if with_grads {
            let mut g = vec![S::zero(); dim];
            for j in 0..b {
                let p = (row[j] / temperature - lse).exp();
                let coeff = (p - if i == j { S::one() } else { S::zero() }) / (bs * temperature);
                match similarity {
                    Similarity::Dot => {
                        for (gk, &dk) in g.iter_mut().zip(docs[j]) {
                            *gk += coeff * dk;
                        }
                    }
                    Similarity::Cosine => {
                        // ∂cos/∂q = d/(|q||d|) - cos · q/|q|²
                        let a = coeff / (q_norms[i] * d_norms[j]);
                        let c = coeff * row[j] / (q_norms[i] * q_norms[i]);
                        for ((gk, &dk), &qk) in g.iter_mut().zip(docs[j]).zip(queries[i]) {
                            *gk += a * dk - c * qk;
                        }
                    }
                }
            }
            grads.push(g);
        }
    }
    let loss = loss / bs;
    if !loss.is_finite() {
        return Err(Error::numerical("contrastive loss is not finite"));
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BceOutput<S> {
    pub loss: S,
    /// `∂L/∂z_i = (σ(z_i) − y_i)/M`.
    pub logit_grads: Vector<S>,
}

/// `softplus(z) = ln(1 + e^z)`, stable for large `|z|`.
fn softplus<S: Scalar>(z: S) -> S {
    z.max(S::zero()) + (-z.abs()).exp().ln_1p()
}

fn exact_sigmoid<S: Scalar>(z: S) -> S {
    if z >= S::zero() {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}

/// Mean binary cross-entropy over `M` domains, computed from logits:
/// `−y ln σ(z) − (1−y) ln(1−σ(z)) = softplus(z) − y·z`.
pub fn bce_with_logits<S: Scalar>(logits: &[S], labels: &DomainLabelVector) -> Result<BceOutput<S>> {
    check_dim("bce labels", logits.len(), labels.len())?;
    if logits.is_empty() {
        return Err(Error::invalid("bce needs at least one domain"));
    }
    let m = S::of(logits.len() as f64);
    let mut loss = S::zero();
    let mut grads = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(labels.bits()) {
        if !z.is_finite() {
            return Err(Error::numerical("non-finite gate logit"));
        }
        let y = if y { S::one() } else { S::zero() };
        loss += softplus(z) - y * z;
        grads.push((exact_sigmoid(z) - y) / m);
    }
    Ok(BceOutput {
        loss: loss / m,
        logit_grads: Vector::from_vec(grads),
    })
}

/// BCE from probabilities. Scores must lie strictly inside `(0, 1)`; they are
/// mapped back to logits and evaluated in logit space.
pub fn bce_loss<S: Scalar>(scores: &Vector<S>, labels: &DomainLabelVector) -> Result<BceOutput<S>> {
    let mut logits = Vec::with_capacity(scores.dim());
    for &p in scores.iter() {
        if !(p > S::zero() && p < S::one()) {
            return Err(Error::numerical(format!(
                "gate score {p} outside the open interval (0, 1)"
            )));
        }
        logits.push((p / (S::one() - p)).ln());
    }
    bce_with_logits(&logits, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecmath::Rng;

    fn v(x: &[f64]) -> Vector<f64> {
        Vector::from_f64(x)
    }

    #[test]
    fn uniform_similarities_give_ln_b() {
        let q = vec![v(&[1.0, 0.0]), v(&[1.0, 0.0])];
        let d = vec![v(&[0.5, 2.0]), v(&[0.5, -3.0])];
        let out = contrastive_loss(&q, &d, 1.0, Similarity::Dot).unwrap();
        assert!((out.loss - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn separated_batch_has_tiny_loss() {
        let q = vec![v(&[10.0, 0.0]), v(&[-10.0, 0.0])];
        let d = vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0])];
        let out = contrastive_loss(&q, &d, 1.0, Similarity::Dot).unwrap();
        // ln(1 + e^-20)
        assert!((out.loss - 2.061_153_618_190_204_4e-9).abs() < 1e-15, "{}", out.loss);
        assert!(out.loss >= 0.0);
    }

    #[test]
    fn batch_of_one_rejected() {
        let q = vec![v(&[1.0])];
        assert!(matches!(
            contrastive_loss(&q, &q, 1.0, Similarity::Dot),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn non_finite_similarity_is_numerical() {
        let q = vec![v(&[f64::INFINITY]), v(&[1.0])];
        let d = vec![v(&[1.0]), v(&[1.0])];
        assert!(contrastive_loss(&q, &d, 1.0, Similarity::Dot).unwrap_err().is_numerical());
    }

    fn fd_check(similarity: Similarity, temperature: f64, seed: u64) {
        let mut rng = Rng::new(seed);
        let (b, dim) = (4, 8);
        let mut rand_vec = || v(&(0..dim).map(|_| rng.normal()).collect::<Vec<_>>());
        let q: Vec<Vector<f64>> = (0..b).map(|_| rand_vec()).collect();
        let d: Vec<Vector<f64>> = (0..b).map(|_| rand_vec()).collect();
        let out = contrastive_loss(&q, &d, temperature, similarity).unwrap();
        let h = 1e-4;
        for i in 0..b {
            for k in 0..dim {
                let mut plus = q.clone();
                plus[i][k] += h;
                let mut minus = q.clone();
                minus[i][k] -= h;
                let lp = contrastive_loss(&plus, &d, temperature, similarity).unwrap().loss;
                let lm = contrastive_loss(&minus, &d, temperature, similarity).unwrap().loss;
                let numeric = (lp - lm) / (2.0 * h);
                let analytic = out.grads[i][k];
                let err = (numeric - analytic).abs();
                assert!(
                    err <= 1e-6 || err / numeric.abs().max(analytic.abs()) <= 1e-4,
                    "{similarity} q[{i}][{k}]: analytic {analytic} numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            fd_check(Similarity::Dot, 1.0, seed);
            fd_check(Similarity::Cosine, 0.5, seed);
            fd_check(Similarity::Dot, 2.5, seed);
        }
    }

    #[test]
    fn permuting_the_batch_keeps_the_loss() {
        let mut rng = Rng::new(8);
        let q: Vec<Vector<f64>> = (0..5).map(|_| v(&[rng.normal(), rng.normal(), rng.normal()])).collect();
        let d: Vec<Vector<f64>> = (0..5).map(|_| v(&[rng.normal(), rng.normal(), rng.normal()])).collect();
        let base = contrastive_loss(&q, &d, 1.0, Similarity::Dot).unwrap().loss;
        let order = [3, 0, 4, 1, 2];
        let qp: Vec<_> = order.iter().map(|&i| q[i].clone()).collect();
        let dp: Vec<_> = order.iter().map(|&i| d[i].clone()).collect();
        let permuted = contrastive_loss(&qp, &dp, 1.0, Similarity::Dot).unwrap().loss;
        assert!((base - permuted).abs() < 1e-12);
    }

    #[test]
    fn bce_hand_values() {
        let half = bce_loss(&v(&[0.5, 0.5]), &DomainLabelVector::from_bits(vec![true, false])).unwrap();
        assert!((half.loss - 2f64.ln()).abs() < 1e-12);

        let out = bce_loss(&v(&[0.75, 0.25]), &DomainLabelVector::from_bits(vec![true, true])).unwrap();
        let expected = (-(0.75f64.ln()) - 0.25f64.ln()) / 2.0;
        assert!((out.loss - expected).abs() < 1e-12);
        assert!((out.loss - 0.836_988).abs() < 1e-6);
        assert!((out.logit_grads[0] - (0.75 - 1.0) / 2.0).abs() < 1e-12);
        assert!((out.logit_grads[1] - (0.25 - 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn bce_perfect_prediction_limit() {
        let labels = DomainLabelVector::from_bits(vec![true, false]);
        let out = bce_with_logits(&[40.0f64, -40.0], &labels).unwrap();
        assert!(out.loss < 1e-15);
        let mild = bce_with_logits(&[5.0f64, -5.0], &labels).unwrap();
        assert!(mild.loss > out.loss);
    }

    #[test]
    fn bce_saturated_scores_rejected() {
        let labels = DomainLabelVector::from_bits(vec![true, false]);
        assert!(bce_loss(&v(&[1.0, 0.5]), &labels).unwrap_err().is_numerical());
        assert!(bce_loss(&v(&[0.5, 0.0]), &labels).unwrap_err().is_numerical());
        // Far-saturated logits are fine in logit space.
        let out = bce_with_logits(&[-800.0f64, 800.0], &labels).unwrap();
        assert!((out.loss - 800.0).abs() < 1e-9);
    }
}
