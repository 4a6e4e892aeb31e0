//! The query-side mixture-of-experts module.
//!
//! A multi-label gating classifier scores the query against `M` domains with
//! independent sigmoids. Each domain owns a bottleneck specializer
//! (`d -> d/2 -> d`). The pooled specializer outputs are added to the query
//! through a skip connection, so a query the gate assigns to no domain comes
//! out (nearly) unchanged. Document embeddings never pass through here.

pub mod checkpoint;

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;
use crate::vecmath::{glorot_uniform_init, relu, sigmoid, Matrix, Rng, Vector};

/// Number of specializers used for the Wikipedia top-level categories.
pub const DEFAULT_NUM_DOMAINS: usize = 37;

/// An affine layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<S> {
    pub weight: Matrix<S>,
    pub bias: Vector<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Dense {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: Vector::zeros(out_dim),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(out_dim: usize, in_dim: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Dense {
            weight: glorot_uniform_init(out_dim, in_dim, rng)?,
            bias: Vector::zeros(out_dim),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub(crate) fn forward(&self, x: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.out_dim()];
        self.weight.matvec_into(x, &mut out);
        for (o, &b) in out.iter_mut().zip(self.bias.iter()) {
            *o += b;
        }
        out
    }

    fn zeros_like(&self) -> Self {
        Dense::zeros(self.out_dim(), self.in_dim())
    }
}

/// One domain specializer: down-projection to `d/2`, ReLU, up-projection
/// back to `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecializerParams<S> {
    pub down: Dense<S>,
    pub up: Dense<S>,
}

impl<S: Scalar> SpecializerParams<S> {
    pub fn zeros(dim: usize) -> Self {
        SpecializerParams {
            down: Dense::zeros(dim / 2, dim),
            up: Dense::zeros(dim, dim / 2),
        }
    }

    pub fn dim(&self) -> usize {
        self.down.in_dim()
    }

    /// `w_up · relu(w_down · x + b_down) + b_up`.
    pub fn forward(&self, x: &Vector<S>) -> Result<Vector<S>> {
        check_dim("specializer input", self.dim(), x.dim())?;
        Ok(Vector::from_vec(self.forward_slice(x)))
    }

    pub(crate) fn forward_slice(&self, x: &[S]) -> Vec<S> {
        let hidden: Vec<S> = self.down.forward(x).into_iter().map(relu).collect();
        self.up.forward(&hidden)
    }

    fn zeros_like(&self) -> Self {
        SpecializerParams {
            down: self.down.zeros_like(),
            up: self.up.zeros_like(),
        }
    }
}

/// The gating classifier: two up-projections (`d -> 2d -> 4d`, ReLU after
/// each) and a down-projection to `M` logits.
#[derive(Debug, Clone, PartialEq)]
pub struct GatingParams<S> {
    pub hidden: Dense<S>,
    pub expand: Dense<S>,
    pub output: Dense<S>,
}

impl<S: Scalar> GatingParams<S> {
    pub fn zeros(dim: usize, num_domains: usize) -> Self {
        GatingParams {
            hidden: Dense::zeros(2 * dim, dim),
            expand: Dense::zeros(4 * dim, 2 * dim),
            output: Dense::zeros(num_domains, 4 * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.hidden.in_dim()
    }

    pub fn num_domains(&self) -> usize {
        self.output.out_dim()
    }

    /// Pre-sigmoid domain logits.
    pub fn logits(&self, x: &Vector<S>) -> Result<Vector<S>> {
        check_dim("gate input", self.dim(), x.dim())?;
        Ok(Vector::from_vec(self.logits_slice(x)))
    }

    pub(crate) fn logits_slice(&self, x: &[S]) -> Vec<S> {
        let h1: Vec<S> = self.hidden.forward(x).into_iter().map(relu).collect();
        let h2: Vec<S> = self.expand.forward(&h1).into_iter().map(relu).collect();
        self.output.forward(&h2)
    }

    /// Independent per-domain probabilities in `(0, 1)`. They are not
    /// normalized and need not sum to one.
    pub fn forward(&self, x: &Vector<S>) -> Result<Vector<S>> {
        let logits = self.logits(x)?;
        Ok(Vector::from_vec(logits.iter().map(|&z| sigmoid(z)).collect()))
    }

    fn zeros_like(&self) -> Self {
        GatingParams {
            hidden: self.hidden.zeros_like(),
            expand: self.expand.zeros_like(),
            output: self.output.zeros_like(),
        }
    }
}

/// How specializer outputs are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    /// Gate-weighted sum of all specializer outputs.
    #[default]
    Weighted,
    /// Output of the highest-scoring specializer only (lowest index on ties).
    Top1,
}

/// Optional rescaling of gate scores before weighted pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateNormalization {
    /// Raw sigmoid scores. All-low scores leave the query near its input.
    #[default]
    None,
    /// Scores divided by their sum.
    SumToOne,
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted" => Ok(Pooling::Weighted),
            "top1" => Ok(Pooling::Top1),
            other => Err(Error::invalid(format!("unknown pooling '{other}' (weighted|top1)"))),
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Weighted => "weighted",
            Pooling::Top1 => "top1",
        })
    }
}

impl FromStr for GateNormalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(GateNormalization::None),
            "sum-to-one" | "sum" => Ok(GateNormalization::SumToOne),
            other => Err(Error::invalid(format!(
                "unknown gate normalization '{other}' (none|sum-to-one)"
            ))),
        }
    }
}

impl fmt::Display for GateNormalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateNormalization::None => "none",
            GateNormalization::SumToOne => "sum-to-one",
        })
    }
}

/// Mode flags stored alongside the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MoeMode {
    pub pooling: Pooling,
    pub normalization: GateNormalization,
}

/// All learnable weights of the module.
#[derive(Debug, Clone, PartialEq)]
pub struct MoeParams<S> {
    dim: usize,
    num_domains: usize,
    pub mode: MoeMode,
    pub gating: GatingParams<S>,
    pub specializers: Vec<SpecializerParams<S>>,
}

fn validate_shape(dim: usize, num_domains: usize) -> Result<()> {
    if dim < 2 || !dim.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "embedding dimension must be even and at least 2, got {dim}"
        )));
    }
    if num_domains == 0 {
        return Err(Error::invalid("number of domains must be at least 1"));
    }
    Ok(())
}

impl<S: Scalar> MoeParams<S> {
    /// All weights and biases zero. Gates are 0.5 everywhere and every
    /// specializer outputs zero, so the transform is the identity.
    pub fn zeros(dim: usize, num_domains: usize, mode: MoeMode) -> Result<Self> {
        validate_shape(dim, num_domains)?;
        Ok(MoeParams {
            dim,
            num_domains,
            mode,
            gating: GatingParams::zeros(dim, num_domains),
            specializers: (0..num_domains).map(|_| SpecializerParams::zeros(dim)).collect(),
        })
    }

    /// Glorot-uniform weights and zero biases, drawn in checkpoint order.
    pub fn init(dim: usize, num_domains: usize, mode: MoeMode, rng: &mut Rng) -> Result<Self> {
        validate_shape(dim, num_domains)?;
        let gating = GatingParams {
            hidden: Dense::glorot(2 * dim, dim, rng)?,
            expand: Dense::glorot(4 * dim, 2 * dim, rng)?,
            output: Dense::glorot(num_domains, 4 * dim, rng)?,
        };
        let specializers = (0..num_domains)
            .map(|_| {
                Ok(SpecializerParams {
                    down: Dense::glorot(dim / 2, dim, rng)?,
                    up: Dense::glorot(dim, dim / 2, rng)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MoeParams {
            dim,
            num_domains,
            mode,
            gating,
            specializers,
        })
    }

    /// Assembles parameters from parts, checking every shape.
    pub fn from_parts(
        mode: MoeMode,
        gating: GatingParams<S>,
        specializers: Vec<SpecializerParams<S>>,
    ) -> Result<Self> {
        let dim = gating.dim();
        let num_domains = gating.num_domains();
        validate_shape(dim, num_domains)?;
        check_dim("specializer count", num_domains, specializers.len())?;
        let expected = Self::zeros(dim, num_domains, mode)?;
        let candidate = MoeParams {
            dim,
            num_domains,
            mode,
            gating,
            specializers,
        };
        for (name, (a, b)) in expected
            .tensor_names()
            .into_iter()
            .zip(expected.tensor_shapes().into_iter().zip(candidate.tensor_shapes()))
        {
            if a != b {
                return Err(Error::invalid(format!(
                    "tensor {name} has shape {b:?}, expected {a:?}"
                )));
            }
        }
        Ok(candidate)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_domains(&self) -> usize {
        self.num_domains
    }

    /// Same shapes and mode, all zeros. Used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        MoeParams {
            dim: self.dim,
            num_domains: self.num_domains,
            mode: self.mode,
            gating: self.gating.zeros_like(),
            specializers: self.specializers.iter().map(SpecializerParams::zeros_like).collect(),
        }
    }

    /// Zeroes every specializer weight and bias, turning the transform into
    /// the identity map regardless of the gate.
    pub fn zero_specializers(&mut self) {
        for s in &mut self.specializers {
            *s = s.zeros_like();
        }
    }

    /// Flat parameter tensors in checkpoint order: gating hidden, expand and
    /// output (weight then bias each), then every specializer's down and up
    /// layers.
    pub fn tensors(&self) -> Vec<&[S]> {
        let mut out: Vec<&[S]> = Vec::with_capacity(6 + 4 * self.num_domains);
        for layer in [&self.gating.hidden, &self.gating.expand, &self.gating.output] {
            out.push(layer.weight.as_slice());
            out.push(layer.bias.as_slice());
        }
        for s in &self.specializers {
            for layer in [&s.down, &s.up] {
                out.push(layer.weight.as_slice());
                out.push(layer.bias.as_slice());
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [S]> {
        let mut out: Vec<&mut [S]> = Vec::with_capacity(6 + 4 * self.num_domains);
        let g = &mut self.gating;
        for layer in [&mut g.hidden, &mut g.expand, &mut g.output] {
            out.push(layer.weight.as_mut_slice());
            out.push(&mut layer.bias);
        }
        for s in &mut self.specializers {
            for layer in [&mut s.down, &mut s.up] {
                out.push(layer.weight.as_mut_slice());
                out.push(&mut layer.bias);
            }
        }
        out
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(6 + 4 * self.num_domains);
        for layer in ["hidden", "expand", "output"] {
            out.push(format!("gating.{layer}.weight"));
            out.push(format!("gating.{layer}.bias"));
        }
        for i in 0..self.num_domains {
            for layer in ["down", "up"] {
                out.push(format!("specializer[{i}].{layer}.weight"));
                out.push(format!("specializer[{i}].{layer}.bias"));
            }
        }
        out
    }

    fn tensor_shapes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(6 + 4 * self.specializers.len());
        let mut push = |layer: &Dense<S>| {
            out.push((layer.weight.rows(), layer.weight.cols()));
            out.push((layer.bias.dim(), 1));
        };
        push(&self.gating.hidden);
        push(&self.gating.expand);
        push(&self.gating.output);
        for s in &self.specializers {
            push(&s.down);
            push(&s.up);
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn cast<T: Scalar>(&self) -> MoeParams<T> {
        let cast_dense = |l: &Dense<S>| Dense {
            weight: l.weight.cast(),
            bias: l.bias.cast(),
        };
        MoeParams {
            dim: self.dim,
            num_domains: self.num_domains,
            mode: self.mode,
            gating: GatingParams {
                hidden: cast_dense(&self.gating.hidden),
                expand: cast_dense(&self.gating.expand),
                output: cast_dense(&self.gating.output),
            },
            specializers: self
                .specializers
                .iter()
                .map(|s| SpecializerParams {
                    down: cast_dense(&s.down),
                    up: cast_dense(&s.up),
                })
                .collect(),
        }
    }

    /// Gate scores for `x`.
    pub fn gate(&self, x: &Vector<S>) -> Result<Vector<S>> {
        self.gating.forward(x)
    }

    /// Transforms a query with the stored pooling mode.
    pub fn transform(&self, x: &Vector<S>) -> Result<Vector<S>> {
        self.transform_with(x, self.mode.pooling)
    }

    pub fn transform_with(&self, x: &Vector<S>, pooling: Pooling) -> Result<Vector<S>> {
        let gates = self.gate(x)?;
        self.transform_with_gates(x, &gates, pooling)
    }

    /// `x + pool(gates, specializer outputs)` with externally supplied gate
    /// scores. Random gating (RND-G) goes through here.
    pub fn transform_with_gates(
        &self,
        x: &Vector<S>,
        gates: &Vector<S>,
        pooling: Pooling,
    ) -> Result<Vector<S>> {
        check_dim("query dimension", self.dim, x.dim())?;
        check_dim("gate scores", self.num_domains, gates.dim())?;
        let delta = match pooling {
            Pooling::Top1 => {
                let best = argmax(gates);
                self.specializers[best].forward_slice(x)
            }
            Pooling::Weighted => {
                let weights = normalize_gates(gates, self.mode.normalization);
                let mut acc = vec![S::zero(); self.dim];
                for (w, s) in weights.iter().zip(&self.specializers) {
                    if *w == S::zero() {
                        continue;
                    }
                    for (a, o) in acc.iter_mut().zip(s.forward_slice(x)) {
                        *a += *w * o;
                    }
                }
                acc
            }
        };
        Ok(Vector::from_vec(x.iter().zip(delta).map(|(&a, b)| a + b).collect()))
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax<S: Scalar>(scores: &[S]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn normalize_gates<S: Scalar>(gates: &[S], normalization: GateNormalization) -> Vec<S> {
    match normalization {
        GateNormalization::None => gates.to_vec(),
        GateNormalization::SumToOne => {
            let total: S = gates.iter().copied().sum();
            if total > S::zero() {
                gates.iter().map(|&g| g / total).collect()
            } else {
                vec![S::zero(); gates.len()]
            }
        }
    }
}

fn check_pool_inputs<S: Scalar>(scores: &Vector<S>, outputs: &[Vector<S>]) -> Result<usize> {
    check_dim("pooling: scores vs outputs", scores.dim(), outputs.len())?;
    let dim = outputs
        .first()
        .map(Vector::dim)
        .ok_or_else(|| Error::invalid("pooling needs at least one specializer output"))?;
    for o in outputs {
        check_dim("pooling: output dimension", dim, o.dim())?;
    }
    Ok(dim)
}

/// `Σ_i scores[i] · outputs[i]`.
pub fn pool_weighted<S: Scalar>(scores: &Vector<S>, outputs: &[Vector<S>]) -> Result<Vector<S>> {
    let dim = check_pool_inputs(scores, outputs)?;
    let mut acc = vec![S::zero(); dim];
    for (&w, o) in scores.iter().zip(outputs) {
        for (a, &v) in acc.iter_mut().zip(o.iter()) {
            *a += w * v;
        }
    }
    Ok(Vector::from_vec(acc))
}

/// `outputs[argmax(scores)]`.
pub fn pool_top1<S: Scalar>(scores: &Vector<S>, outputs: &[Vector<S>]) -> Result<Vector<S>> {
    check_pool_inputs(scores, outputs)?;
    Ok(outputs[argmax(scores)].clone())
}

/// Uniform random gate scores in `(0, 1)`, the RND-G baseline.
pub fn random_gate<S: Scalar>(num_domains: usize, rng: &mut Rng) -> Result<Vector<S>> {
    if num_domains < 1 {
        return Err(Error::invalid("random gate needs at least one domain"));
    }
    Ok(Vector::from_vec(
        (0..num_domains).map(|_| S::of(rng.uniform_open())).collect(),
    ))
}

pub fn specializer_forward<S: Scalar>(x: &Vector<S>, p: &SpecializerParams<S>) -> Result<Vector<S>> {
    p.forward(x)
}

pub fn gate_forward<S: Scalar>(x: &Vector<S>, g: &GatingParams<S>) -> Result<Vector<S>> {
    g.forward(x)
}

pub fn moe_transform<S: Scalar>(x: &Vector<S>, params: &MoeParams<S>, pooling: Pooling) -> Result<Vector<S>> {
    params.transform_with(x, pooling)
}
