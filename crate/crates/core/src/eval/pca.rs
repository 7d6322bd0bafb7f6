//! Principal component analysis by symmetric eigendecomposition.

use crate::error::{Error, Result};
use crate::numerics::{dot, sym_eig, Matrix};

/// Which matrix to decompose.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcaMethod {
    /// Gram route when features outnumber samples, covariance otherwise.
    Auto,
    /// features × features covariance.
    Covariance,
    /// samples × samples Gram matrix of the centered data.
    Gram,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// features × components, orthonormal columns.
    pub axes: Matrix,
    /// Sample variance (n − 1 denominator) along each axis.
    pub explained_variance: Vec<f64>,
    /// Sum of per-feature sample variances.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn components(&self) -> usize {
        self.axes.cols()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| if self.total_variance > 0.0 { v / self.total_variance } else { 0.0 })
            .collect()
    }

    pub fn transform(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.mean.len() {
            return Err(Error::shape(
                "pca transform",
                format!("{} features against {} fitted", data.cols(), self.mean.len()),
            ));
        }
        center(data, &self.mean).matmul(&self.axes)
    }
}

fn center(data: &Matrix, mean: &[f64]) -> Matrix {
    Matrix::from_fn(data.rows(), data.cols(), |i, j| data.get(i, j) - mean[j])
}

/// Flip the axis so its largest-magnitude loading (first on ties) is positive.
fn fix_sign(axis: &mut [f64]) {
    let mut best = 0;
    for (j, v) in axis.iter().enumerate() {
        if v.abs() > axis[best].abs() {
            best = j;
        }
    }
    if axis[best] < 0.0 {
        axis.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Unit vector orthogonal to `basis`, from the first coordinate axis with a
/// usable residual. Fills directions the data does not span.
fn complete(basis: &[Vec<f64>], dim: usize) -> Vec<f64> {
    for e in 0..dim {
        let mut v = vec![0.0; dim];
        v[e] = 1.0;
        for b in basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
    unreachable!("fewer components than dimensions were requested")
}

pub fn pca_fit(data: &Matrix, components: usize) -> Result<PcaModel> {
    pca_fit_with(data, components, PcaMethod::Auto)
}

pub fn pca_fit_with(data: &Matrix, components: usize, method: PcaMethod) -> Result<PcaModel> {
    let (n, f) = data.shape();
    if components == 0 || components > n.min(f) {
        return Err(Error::Config(format!(
            "{components} components requested from {n} samples × {f} features"
        )));
    }
    if n < 2 {
        return Err(Error::Empty("PCA needs at least 2 samples".into()));
    }
    data.clone().ensure_finite("pca input")?;
    let mean = data.col_means();
    let xc = center(data, &mean);
    let denom = (n - 1) as f64;
    let total_variance = xc.data().iter().map(|v| v * v).sum::<f64>() / denom;

    let gram = match method {
        PcaMethod::Auto => f > n,
        PcaMethod::Covariance => false,
        PcaMethod::Gram => true,
    };
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(components);
    let mut explained = Vec::with_capacity(components);
    if gram {
        let eig = sym_eig(&xc.matmul_bt(&xc)?)?;
        let scale = eig.values[0].abs().max(f64::MIN_POSITIVE);
        for c in 0..components {
            let lambda = eig.values[c];
            if lambda > 1e-12 * scale {
                let u = eig.vectors.column(c);
                let s = lambda.sqrt();
                let axis: Vec<f64> = (0..f).map(|j| (0..n).map(|i| xc.get(i, j) * u[i]).sum::<f64>() / s).collect();
                axes.push(axis);
                explained.push(lambda / denom);
            } else {
                axes.push(complete(&axes, f));
                explained.push(0.0);
            }
        }
    } else {
        let eig = sym_eig(&xc.matmul_at(&xc)?.scale(1.0 / denom))?;
        for c in 0..components {
            axes.push(eig.vectors.column(c));
            explained.push(eig.values[c].max(0.0));
        }
    }
    for a in &mut axes {
        fix_sign(a);
    }
    let axes = Matrix::from_fn(f, components, |j, c| axes[c][j]);
    Ok(PcaModel {
        mean,
        axes,
        explained_variance: explained,
        total_variance,
    })
}
