use super::{join, Parameterized};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const BN_EPSILON: f64 = 1e-5;
/// Weight of the current batch in the running-statistics update.
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-feature batch normalization.
#[derive(Clone, Debug)]
pub struct BatchNormLayer {
    pub gamma: Vec<f64>,
    pub beta_shift: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
    pub grad_gamma: Vec<f64>,
    pub grad_beta_shift: Vec<f64>,
}

/// Saved from a training-mode forward pass.
#[derive(Clone, Debug)]
pub struct BatchNormCache {
    pub normalized: Matrix,
    pub inv_std: Vec<f64>,
}

impl BatchNormLayer {
    pub fn new(dim: usize) -> Self {
        BatchNormLayer {
            gamma: vec![1.0; dim],
            beta_shift: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: BN_MOMENTUM,
            epsilon: BN_EPSILON,
            grad_gamma: vec![0.0; dim],
            grad_beta_shift: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.dim() {
            return Err(Error::shape(
                "batch norm",
                format!("input has {} features, layer expects {}", x.cols(), self.dim()),
            ));
        }
        Ok(())
    }

    /// Normalize with batch statistics and fold them into the running estimates
    /// (running variance uses the unbiased batch variance).
    pub fn forward_train(&mut self, x: &Matrix) -> Result<(Matrix, BatchNormCache)> {
        self.check(x)?;
        let n = x.rows();
        if n < 2 {
            return Err(Error::shape(
                "batch norm",
                "training mode needs a batch of at least 2 samples",
            ));
        }
        let mean = x.col_means();
        let mut var = vec![0.0; self.dim()];
        for r in 0..n {
            for ((v, &xv), &m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                *v += (xv - m) * (xv - m);
            }
        }
        for v in &mut var {
            *v /= n as f64;
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut normalized = x.clone();
        let mut out = x.clone();
        for r in 0..n {
            let xr = x.row(r);
            for j in 0..self.dim() {
                let xhat = (xr[j] - mean[j]) * inv_std[j];
                normalized.set(r, j, xhat);
                out.set(r, j, self.gamma[j] * xhat + self.beta_shift[j]);
            }
        }
        let unbias = n as f64 / (n as f64 - 1.0);
        for j in 0..self.dim() {
            self.running_mean[j] = (1.0 - self.momentum) * self.running_mean[j] + self.momentum * mean[j];
            self.running_var[j] =
                (1.0 - self.momentum) * self.running_var[j] + self.momentum * var[j] * unbias;
        }
        Ok((out, BatchNormCache { normalized, inv_std }))
    }

    pub fn forward_infer(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let scale: Vec<f64> = self
            .running_var
            .iter()
            .zip(&self.gamma)
            .map(|(v, g)| g / (v + self.epsilon).sqrt())
            .collect();
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.running_mean[j]) * scale[j] + self.beta_shift[j];
            }
        }
        Ok(out)
    }

    pub fn backward(&mut self, cache: &BatchNormCache, upstream: &Matrix) -> Result<Matrix> {
        if upstream.shape() != cache.normalized.shape() {
            return Err(Error::shape(
                "batch norm backward",
                format!("upstream {:?} vs cache {:?}", upstream.shape(), cache.normalized.shape()),
            ));
        }
        let n = upstream.rows() as f64;
        let d = self.dim();
        let mut sum_dy = vec![0.0; d];
        let mut sum_dy_xhat = vec![0.0; d];
        for r in 0..upstream.rows() {
            let dy = upstream.row(r);
            let xh = cache.normalized.row(r);
            for j in 0..d {
                sum_dy[j] += dy[j];
                sum_dy_xhat[j] += dy[j] * xh[j];
            }
        }
        for j in 0..d {
            self.grad_gamma[j] += sum_dy_xhat[j];
            self.grad_beta_shift[j] += sum_dy[j];
        }
        let mut dx = upstream.clone();
        for r in 0..upstream.rows() {
            let xh = cache.normalized.row(r);
            let dy = upstream.row(r);
            for (j, out) in dx.row_mut(r).iter_mut().enumerate() {
                *out = self.gamma[j] * cache.inv_std[j] / n
                    * (n * dy[j] - sum_dy[j] - xh[j] * sum_dy_xhat[j]);
            }
        }
        Ok(dx)
    }
}

impl Parameterized for BatchNormLayer {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64], &mut [f64])) {
        f(&join(prefix, "gamma"), &mut self.gamma, &mut self.grad_gamma);
        f(&join(prefix, "beta"), &mut self.beta_shift, &mut self.grad_beta_shift);
    }

    fn visit_tensors(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        let d = [self.dim()];
        f(&join(prefix, "gamma"), &d, &self.gamma);
        f(&join(prefix, "beta"), &d, &self.beta_shift);
        f(&join(prefix, "running_mean"), &d, &self.running_mean);
        f(&join(prefix, "running_var"), &d, &self.running_var);
    }

    fn visit_tensors_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        let d = [self.dim()];
        f(&join(prefix, "gamma"), &d, &mut self.gamma);
        f(&join(prefix, "beta"), &d, &mut self.beta_shift);
        f(&join(prefix, "running_mean"), &d, &mut self.running_mean);
        f(&join(prefix, "running_var"), &d, &mut self.running_var);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;

    #[test]
    fn train_output_is_standardized() {
        let mut rng = RngState::new(4);
        let x = rng.gaussian(16, 6).map(|v| 3.0 * v + 2.0);
        let mut bn = BatchNormLayer::new(6);
        let (y, _) = bn.forward_train(&x).unwrap();
        for (j, m) in y.col_means().iter().enumerate() {
            assert!(m.abs() < 1e-6);
            let var = y.column(j).iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 16.0;
            // variance is var/(var+eps), within eps of 1
            assert!((var - 1.0).abs() < 1e-5, "var {var}");
        }
        assert!(bn.running_var.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn batch_of_one_rejected() {
        let mut bn = BatchNormLayer::new(3);
        assert!(bn.forward_train(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn infer_uses_running_statistics() {
        let mut bn = BatchNormLayer::new(2);
        bn.running_mean = vec![1.0, -1.0];
        bn.running_var = vec![4.0 - BN_EPSILON, 1.0 - BN_EPSILON];
        let y = bn.forward_infer(&Matrix::row_vector(&[3.0, 0.0])).unwrap();
        assert!((y.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((y.get(0, 1) - 1.0).abs() < 1e-12);
    }
}
