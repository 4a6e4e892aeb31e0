use crate::error::{check_dim, Result};
use crate::moe::MoeParams;
use crate::scalar::Scalar;

/// Adam moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<S>>,
    second: Vec<Vec<S>>,
}

impl<S: Scalar> AdamState<S> {
    /// Zeroed state for tensors of the given lengths.
    pub fn new(shapes: &[usize]) -> Self {
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: shapes.iter().map(|&n| vec![S::zero(); n]).collect(),
            second: shapes.iter().map(|&n| vec![S::zero(); n]).collect(),
        }
    }

    pub fn for_params(params: &MoeParams<S>) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        Self::new(&shapes)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update over a list of tensors.
    pub fn step(&mut self, params: &mut [&mut [S]], grads: &[&[S]], lr: f64) -> Result<()> {
        check_dim("adam: tensor count", self.first.len(), params.len())?;
        check_dim("adam: gradient count", self.first.len(), grads.len())?;
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            check_dim("adam: parameter tensor", m.len(), p.len())?;
            check_dim("adam: gradient tensor", m.len(), g.len())?;
        }

        self.step += 1;
        let t = self.step as i32;
        let b1 = S::of(self.beta1);
        let b2 = S::of(self.beta2);
        let one = S::one();
        let c1 = one - S::of(self.beta1.powi(t));
        let c2 = one - S::of(self.beta2.powi(t));
        let lr = S::of(lr);
        let eps = S::of(self.epsilon);

        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            for (((p, &g), m), v) in p.iter_mut().zip(*g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Applies one Adam update of `grads` to `params`.
pub fn adam_step<S: Scalar>(
    params: &mut MoeParams<S>,
    grads: &MoeParams<S>,
    state: &mut AdamState<S>,
    lr: f64,
) -> Result<()> {
    check_dim("adam: model dim", params.dim(), grads.dim())?;
    check_dim("adam: model domains", params.num_domains(), grads.num_domains())?;
    let grad_tensors = grads.tensors();
    let mut param_tensors = params.tensors_mut();
    state.step(&mut param_tensors, &grad_tensors, lr)
}
