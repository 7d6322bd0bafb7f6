use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    /// Row-wise; only used as the terminal classifier activation.
    Softmax,
    /// Only used on latent heads.
    Identity,
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

impl ActivationKind {
    pub fn apply(self, pre: &Matrix) -> Matrix {
        match self {
            ActivationKind::Relu => pre.map(|v| v.max(0.0)),
            ActivationKind::Sigmoid => pre.map(sigmoid),
            ActivationKind::Softmax => softmax_rows(pre),
            ActivationKind::Identity => pre.clone(),
        }
    }

    /// Pull `upstream` (gradient w.r.t. the activation output) back to the
    /// pre-activation, given the cached pre-activation and output.
    pub fn backward(self, pre: &Matrix, out: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        if upstream.shape() != out.shape() {
            return Err(Error::shape(
                "activation backward",
                format!("upstream {:?} vs output {:?}", upstream.shape(), out.shape()),
            ));
        }
        match self {
            ActivationKind::Relu => pre.zip_map(upstream, |p, g| if p > 0.0 { g } else { 0.0 }),
            ActivationKind::Sigmoid => out.zip_map(upstream, |s, g| g * s * (1.0 - s)),
            ActivationKind::Identity => Ok(upstream.clone()),
            ActivationKind::Softmax => {
                let mut grad = upstream.clone();
                for r in 0..grad.rows() {
                    let p = out.row(r);
                    let g = upstream.row(r);
                    let inner: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
                    for (d, (&pi, &gi)) in grad.row_mut(r).iter_mut().zip(p.iter().zip(g)) {
                        *d = pi * (gi - inner);
                    }
                }
                Ok(grad)
            }
        }
    }
}
