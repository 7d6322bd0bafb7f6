//! Multinomial logistic regression on low-dimensional embeddings.

use crate::error::{Error, Result};
use crate::layers::softmax_rows;
use crate::numerics::{sym_eig, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub l2: f64,
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            l2: 1e-4,
            tolerance: 1e-6,
            max_iters: 5000,
        }
    }
}

/// Fitted on standardized inputs; `weights` is (dims + 1) × classes with the
/// intercept in the last row.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeClassifier {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Matrix,
    pub iterations: usize,
    pub final_grad_norm: f64,
    /// Penalized training loss after each iteration, starting at the initial point.
    pub loss_trace: Vec<f64>,
}

fn design(x: &Matrix, mean: &[f64], scale: &[f64]) -> Matrix {
    let d = x.cols();
    Matrix::from_fn(x.rows(), d + 1, |i, j| {
        if j == d {
            1.0
        } else {
            (x.get(i, j) - mean[j]) / scale[j]
        }
    })
}

/// Penalized mean cross-entropy and its gradient. The intercept row is not penalized.
fn objective(a: &Matrix, y: &[usize], w: &Matrix, l2: f64) -> Result<(f64, Matrix)> {
    let n = a.rows() as f64;
    let probs = softmax_rows(&a.matmul(w)?);
    let mut loss = 0.0;
    let mut resid = probs.clone();
    for (i, &c) in y.iter().enumerate() {
        loss -= probs.get(i, c).max(f64::MIN_POSITIVE).ln();
        resid.set(i, c, resid.get(i, c) - 1.0);
    }
    loss /= n;
    let mut grad = a.matmul_at(&resid)?.scale(1.0 / n);
    let d = w.rows() - 1;
    for j in 0..d {
        for c in 0..w.cols() {
            let wj = w.get(j, c);
            loss += 0.5 * l2 * wj * wj;
            grad.set(j, c, grad.get(j, c) + l2 * wj);
        }
    }
    Ok((loss, grad))
}

/// Full-batch gradient descent from zero with step 1/L, where
/// L = λmax(AᵀA/n)/2 + l2 bounds the curvature of the objective.
pub fn probe_fit(x: &Matrix, labels: &[usize], num_classes: usize, config: &ProbeConfig) -> Result<ProbeClassifier> {
    if x.rows() != labels.len() {
        return Err(Error::shape(
            "probe fit",
            format!("{} rows against {} labels", x.rows(), labels.len()),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::Label(format!("label {bad} outside {num_classes} classes")));
    }
    let first = labels.first().copied();
    if labels.iter().all(|&l| Some(l) == first) {
        return Err(Error::Label("probe training data has a single class".into()));
    }
    let x = x.clone().ensure_finite("probe input")?;
    let n = x.rows() as f64;
    let mean = x.col_means();
    let scale: Vec<f64> = (0..x.cols())
        .map(|j| {
            let var = (0..x.rows()).map(|i| (x.get(i, j) - mean[j]).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let a = design(&x, &mean, &scale);
    let curvature = sym_eig(&a.matmul_at(&a)?.scale(1.0 / n))?.values[0];
    let step = 1.0 / (0.5 * curvature + config.l2);

    let mut w = Matrix::zeros(a.cols(), num_classes);
    let (mut loss, mut grad) = objective(&a, labels, &w, config.l2)?;
    let mut trace = vec![loss];
    let mut iterations = 0;
    while grad.frobenius_norm() >= config.tolerance && iterations < config.max_iters {
        w = w.sub(&grad.scale(step))?;
        (loss, grad) = objective(&a, labels, &w, config.l2)?;
        trace.push(loss);
        iterations += 1;
    }
    Ok(ProbeClassifier {
        mean,
        scale,
        weights: w,
        iterations,
        final_grad_norm: grad.frobenius_norm(),
        loss_trace: trace,
    })
}

impl ProbeClassifier {
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::shape(
                "probe predict",
                format!("{} dims against {} fitted", x.cols(), self.mean.len()),
            ));
        }
        Ok(softmax_rows(&design(x, &self.mean, &self.scale).matmul(&self.weights)?))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok((0..p.rows())
            .map(|i| {
                let row = p.row(i);
                (0..row.len()).fold(0, |best, c| if row[c] > row[best] { c } else { best })
            })
            .collect())
    }
}
