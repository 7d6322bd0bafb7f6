use super::{join, Parameterized};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngState};

/// Affine map `y = x·Wᵀ + b` over a batch of row vectors.
#[derive(Clone, Debug)]
pub struct LinearLayer {
    /// `out_dim × in_dim`.
    pub weights: Matrix,
    /// Absent when the layer feeds a batch normalization, whose shift subsumes it.
    pub bias: Option<Vec<f64>>,
    pub grad_weights: Matrix,
    pub grad_bias: Option<Vec<f64>>,
}

impl LinearLayer {
    /// Glorot-uniform weights, zero bias.
    pub fn new(in_dim: usize, out_dim: usize, with_bias: bool, rng: &mut RngState) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = Matrix::from_fn(out_dim, in_dim, |_, _| rng.uniform_range(-limit, limit));
        LinearLayer {
            weights,
            bias: with_bias.then(|| vec![0.0; out_dim]),
            grad_weights: Matrix::zeros(out_dim, in_dim),
            grad_bias: with_bias.then(|| vec![0.0; out_dim]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(Error::shape(
                "linear forward",
                format!("input has {} features, layer expects {}", x.cols(), self.in_dim()),
            ));
        }
        let mut y = x.matmul_bt(&self.weights)?;
        if let Some(bias) = &self.bias {
            for r in 0..y.rows() {
                for (v, b) in y.row_mut(r).iter_mut().zip(bias) {
                    *v += b;
                }
            }
        }
        Ok(y)
    }

    /// Accumulate parameter gradients for input `x` and return the input gradient.
    pub fn backward(&mut self, x: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        if upstream.cols() != self.out_dim() || upstream.rows() != x.rows() {
            return Err(Error::shape(
                "linear backward",
                format!("upstream {:?} for input {:?}", upstream.shape(), x.shape()),
            ));
        }
        let gw = upstream.matmul_at(x)?;
        self.grad_weights.add_assign(&gw)?;
        if let Some(gb) = &mut self.grad_bias {
            for (g, s) in gb.iter_mut().zip(upstream.col_sums()) {
                *g += s;
            }
        }
        upstream.matmul(&self.weights)
    }
}

impl Parameterized for LinearLayer {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64], &mut [f64])) {
        f(
            &join(prefix, "weight"),
            self.weights.data_mut(),
            self.grad_weights.data_mut(),
        );
        if let (Some(b), Some(g)) = (&mut self.bias, &mut self.grad_bias) {
            f(&join(prefix, "bias"), b, g);
        }
    }

    fn visit_tensors(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        let (r, c) = self.weights.shape();
        f(&join(prefix, "weight"), &[r, c], self.weights.data());
        if let Some(b) = &self.bias {
            f(&join(prefix, "bias"), &[b.len()], b);
        }
    }

    fn visit_tensors_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        let (r, c) = self.weights.shape();
        f(&join(prefix, "weight"), &[r, c], self.weights.data_mut());
        if let Some(b) = &mut self.bias {
            let n = b.len();
            f(&join(prefix, "bias"), &[n], b);
        }
    }
}
