//! Fully connected blocks (linear, batch normalization, activation) with
//! hand-derived backward passes, plus a finite-difference gradient checker.

mod activation;
mod batchnorm;
mod block;
mod gradcheck;
mod linear;

pub use activation::{softmax_rows, ActivationKind};
pub use batchnorm::{BatchNormCache, BatchNormLayer, BN_EPSILON, BN_MOMENTUM};
pub use block::FcBlock;
pub use gradcheck::{gradient_check, GradCheckOptions, GradCheckReport};
pub use linear::LinearLayer;

/// Forward-pass mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, stochastic latent sampling, caches stored for backward.
    Train,
    /// Running statistics, deterministic, no state mutation.
    Infer,
}

/// Uniform access to learnable parameters and persistent buffers.
///
/// Visitation order is fixed per architecture; optimizer state and checkpoint
/// layouts rely on it.
pub trait Parameterized {
    /// Visit every learnable tensor as `(name, values, gradients)`.
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64], &mut [f64]));

    /// Visit every persisted tensor (parameters and running statistics) read-only.
    fn visit_tensors(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64]));

    /// Mutable counterpart of [`Parameterized::visit_tensors`], same order.
    fn visit_tensors_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64]));

    fn zero_grad(&mut self) {
        self.visit_params("", &mut |_, _, g| g.fill(0.0));
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params("", &mut |_, v, _| n += v.len());
        n
    }
}

pub fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
