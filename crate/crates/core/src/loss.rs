//! Reconstruction, KL, and classification losses with analytic gradients.
//!
//! Reductions: binary cross-entropy is averaged over features (or summed, see
//! [`Reduction`]) and then over the batch; the KL term is summed over latent
//! dimensions and averaged over the batch; classification cross-entropy is
//! averaged over the batch.

use crate::error::{Error, Result};
use crate::layers::softmax_rows;
use crate::numerics::Matrix;

/// Probabilities are clamped to `[CLAMP, 1 − CLAMP]` before taking logs.
pub const CLAMP: f64 = 1e-7;

fn same_shape(a: &Matrix, b: &Matrix, op: &'static str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(CLAMP, 1.0 - CLAMP)
}

/// How reconstruction BCE is reduced over the features of a sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    /// Sum over features: the reconstruction term of the usual evidence lower bound.
    /// Averaging instead lets the KL term swamp reconstruction on wide inputs.
    #[default]
    Sum,
}

impl Reduction {
    pub fn name(self) -> &'static str {
        match self {
            Reduction::Mean => "mean",
            Reduction::Sum => "sum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(Reduction::Mean),
            "sum" => Some(Reduction::Sum),
            _ => None,
        }
    }

    /// Factor turning a feature mean into this reduction.
    pub fn factor(self, features: usize) -> f64 {
        match self {
            Reduction::Mean => 1.0,
            Reduction::Sum => features as f64,
        }
    }
}

/// Mean binary cross-entropy between `target ∈ [0,1]` and `pred ∈ (0,1)`.
pub fn bce(target: &Matrix, pred: &Matrix) -> Result<f64> {
    same_shape(target, pred, "bce")?;
    if target.rows() == 0 || target.cols() == 0 {
        return Ok(0.0);
    }
    let total: f64 = target
        .data()
        .iter()
        .zip(pred.data())
        .map(|(&t, &p)| {
            let p = clamp_prob(p);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / target.data().len() as f64)
}

/// `∂ bce / ∂ pred`; zero where the prediction sits in the clamp region.
pub fn bce_grad(target: &Matrix, pred: &Matrix) -> Result<Matrix> {
    same_shape(target, pred, "bce_grad")?;
    let n = target.data().len().max(1) as f64;
    target.zip_map(pred, |t, p| {
        if p <= CLAMP || p >= 1.0 - CLAMP {
            0.0
        } else {
            (p - t) / (p * (1.0 - p)) / n
        }
    })
}

/// Gradient of `bce(target, sigmoid(a))` w.r.t. the logits `a`, given
/// `pred = sigmoid(a)`, scaled by `weight`.
pub fn bce_sigmoid_grad(target: &Matrix, pred: &Matrix, weight: f64) -> Result<Matrix> {
    same_shape(target, pred, "bce_sigmoid_grad")?;
    let scale = weight / target.data().len().max(1) as f64;
    target.zip_map(pred, |t, p| {
        if p <= CLAMP || p >= 1.0 - CLAMP {
            0.0
        } else {
            (p - t) * scale
        }
    })
}

/// KL divergence from `N(μ, exp(logvar))` to `N(0, I)`, summed over latent
/// dimensions and averaged over the batch.
pub fn kl_gaussian(mu: &Matrix, logvar: &Matrix) -> Result<f64> {
    same_shape(mu, logvar, "kl_gaussian")?;
    if mu.rows() == 0 {
        return Ok(0.0);
    }
    let total: f64 = mu
        .data()
        .iter()
        .zip(logvar.data())
        .map(|(&m, &lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv))
        .sum();
    Ok(total / mu.rows() as f64)
}

/// Gradients of [`kl_gaussian`] w.r.t. `μ` and `logvar`.
pub fn kl_grads(mu: &Matrix, logvar: &Matrix) -> Result<(Matrix, Matrix)> {
    same_shape(mu, logvar, "kl_grads")?;
    let b = mu.rows().max(1) as f64;
    Ok((mu.scale(1.0 / b), logvar.map(|lv| 0.5 * (lv.exp() - 1.0) / b)))
}

/// The three terms of the VAE objective.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VaeComponents {
    /// Mean of the per-block methylation BCEs (0 when methylation is absent).
    pub recon_methyl: f64,
    pub recon_expr: f64,
    pub kl: f64,
}

impl VaeComponents {
    pub fn vae(&self) -> f64 {
        self.recon_methyl + self.recon_expr + self.kl
    }
}

pub fn vae_loss(
    methyl_targets: &[Matrix],
    methyl_preds: &[Matrix],
    expr: Option<(&Matrix, &Matrix)>,
    mu: &Matrix,
    logvar: &Matrix,
) -> Result<VaeComponents> {
    vae_loss_with(methyl_targets, methyl_preds, expr, mu, logvar, Reduction::Mean)
}

pub fn vae_loss_with(
    methyl_targets: &[Matrix],
    methyl_preds: &[Matrix],
    expr: Option<(&Matrix, &Matrix)>,
    mu: &Matrix,
    logvar: &Matrix,
    reduction: Reduction,
) -> Result<VaeComponents> {
    if methyl_targets.len() != methyl_preds.len() {
        return Err(Error::shape(
            "vae_loss",
            format!(
                "{} methylation targets vs {} reconstructions",
                methyl_targets.len(),
                methyl_preds.len()
            ),
        ));
    }
    let mut recon_methyl = 0.0;
    for (t, p) in methyl_targets.iter().zip(methyl_preds) {
        recon_methyl += reduction.factor(t.cols()) * bce(t, p)?;
    }
    if !methyl_targets.is_empty() {
        recon_methyl /= methyl_targets.len() as f64;
    }
    let recon_expr = match expr {
        Some((t, p)) => reduction.factor(t.cols()) * bce(t, p)?,
        None => 0.0,
    };
    Ok(VaeComponents {
        recon_methyl,
        recon_expr,
        kl: kl_gaussian(mu, logvar)?,
    })
}

fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::shape(
            "classification_loss",
            format!("{} labels for {rows} rows", labels.len()),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Label(format!("label {bad} outside 0..{classes}")));
    }
    Ok(())
}

/// Mean negative log-probability of the true class.
pub fn classification_loss(labels: &[usize], probs: &Matrix) -> Result<f64> {
    check_labels(labels, probs.rows(), probs.cols())?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &l)| -probs.get(r, l).max(f64::MIN_POSITIVE).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

/// Cross-entropy computed from logits via log-sum-exp, with its gradient
/// w.r.t. the logits (`(softmax − onehot) / batch`).
pub fn classification_loss_from_logits(labels: &[usize], logits: &Matrix) -> Result<(f64, Matrix)> {
    check_labels(labels, logits.rows(), logits.cols())?;
    let b = labels.len().max(1) as f64;
    let mut total = 0.0;
    for (r, &l) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[l];
    }
    let mut grad = softmax_rows(logits);
    for (r, &l) in labels.iter().enumerate() {
        let v = grad.get(r, l);
        grad.set(r, l, v - 1.0);
    }
    Ok((total / b, grad.scale(1.0 / b)))
}

/// Weights of the VAE and classification terms in the total objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0) || alpha + beta <= 0.0 {
            return Err(Error::Config(format!(
                "loss weights must be non-negative with positive sum, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(LossWeights { alpha, beta })
    }

    /// Reconstruction only.
    pub fn unsupervised() -> Self {
        LossWeights { alpha: 1.0, beta: 0.0 }
    }

    pub fn supervised() -> Self {
        LossWeights { alpha: 1.0, beta: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub recon_methyl: f64,
    pub recon_expr: f64,
    pub kl: f64,
    pub vae: f64,
    pub classification: f64,
    pub total: f64,
}

pub fn total_loss(components: VaeComponents, classification: f64, weights: LossWeights) -> Result<LossReport> {
    let weights = LossWeights::new(weights.alpha, weights.beta)?;
    let vae = components.vae();
    let total = weights.alpha * vae + weights.beta * classification;
    if !total.is_finite() {
        return Err(Error::NonFinite("total loss"));
    }
    Ok(LossReport {
        recon_methyl: components.recon_methyl,
        recon_expr: components.recon_expr,
        kl: components.kl,
        vae,
        classification,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn bce_closed_forms() {
        let half = Matrix::filled(3, 4, 0.5);
        assert!((bce(&half, &half).unwrap() - LN2).abs() < 1e-12);
        let t = Matrix::row_vector(&[0.0, 1.0, 1.0, 0.0]);
        assert!(bce(&t, &t).unwrap() <= 1e-6);
        let z = Matrix::row_vector(&[0.0]);
        let p = Matrix::row_vector(&[0.9]);
        assert!((bce(&z, &p).unwrap() - 10f64.ln()).abs() < 1e-12);
        assert!(bce(&z, &half).is_err());
    }

    #[test]
    fn kl_closed_forms() {
        let zero = Matrix::zeros(2, 3);
        assert_eq!(kl_gaussian(&zero, &zero).unwrap(), 0.0);
        let one = Matrix::row_vector(&[1.0]);
        let lv = Matrix::row_vector(&[0.0]);
        assert_eq!(kl_gaussian(&one, &lv).unwrap(), 0.5);
    }

    #[test]
    fn kl_matches_monte_carlo() {
        // E_q[log q(z) − log p(z)] with z = μ + σε
        let mut rng = RngState::new(99);
        for _ in 0..3 {
            let mu = rng.gaussian(1, 3);
            let logvar = rng.gaussian(1, 3).scale(0.5);
            let n = 200_000;
            let mut acc = 0.0;
            for _ in 0..n {
                for d in 0..3 {
                    let (m, lv) = (mu.get(0, d), logvar.get(0, d));
                    let e = rng.normal();
                    let z = m + (0.5 * lv).exp() * e;
                    acc += -0.5 * lv - 0.5 * e * e + 0.5 * z * z;
                }
            }
            let mc = acc / n as f64;
            let exact = kl_gaussian(&mu, &logvar).unwrap();
            assert!((mc - exact).abs() < 2e-2, "{mc} vs {exact}");
        }
    }

    #[test]
    fn vae_loss_reductions() {
        let t = Matrix::filled(2, 3, 0.0);
        let p2 = Matrix::filled(2, 3, 1.0 - (-0.2f64).exp());
        let p4 = Matrix::filled(2, 3, 1.0 - (-0.4f64).exp());
        let zero = Matrix::zeros(2, 1);
        let c = vae_loss(&[t.clone(), t.clone()], &[p2.clone(), p4], None, &zero, &zero).unwrap();
        assert!((c.recon_methyl - 0.3).abs() < 1e-12);
        assert_eq!(c.recon_expr, 0.0);
        let single = vae_loss(std::slice::from_ref(&t), std::slice::from_ref(&p2), None, &zero, &zero).unwrap();
        assert_eq!(single.recon_methyl, bce(&t, &p2).unwrap());
        let expr_only = vae_loss(&[], &[], Some((&t, &p2)), &zero, &zero).unwrap();
        assert_eq!(expr_only.recon_methyl, 0.0);
        assert_eq!(expr_only.vae(), bce(&t, &p2).unwrap());
        assert!(vae_loss(std::slice::from_ref(&t), &[], None, &zero, &zero).is_err());
    }

    #[test]
    fn classification_closed_forms() {
        let perfect = Matrix::row_vector(&[0.0, 1.0, 0.0]);
        assert_eq!(classification_loss(&[1], &perfect).unwrap(), 0.0);
        let uniform = Matrix::filled(2, 34, 1.0 / 34.0);
        assert!((classification_loss(&[0, 33], &uniform).unwrap() - 34f64.ln()).abs() < 1e-12);
        let quarter = Matrix::row_vector(&[0.25, 0.75]);
        assert!((classification_loss(&[0], &quarter).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!(matches!(classification_loss(&[2], &quarter), Err(Error::Label(_))));
    }

    #[test]
    fn logits_form_agrees_with_probability_form() {
        let mut rng = RngState::new(5);
        let logits = rng.gaussian(6, 4).scale(3.0);
        let labels = [0, 3, 1, 1, 2, 0];
        let (fused, _) = classification_loss_from_logits(&labels, &logits).unwrap();
        let plain = classification_loss(&labels, &softmax_rows(&logits)).unwrap();
        assert!((fused - plain).abs() < 1e-12);
    }

    #[test]
    fn total_loss_combines_linearly() {
        let c = VaeComponents { recon_methyl: 0.5, recon_expr: 1.0, kl: 0.5 };
        let r = total_loss(c, 0.7, LossWeights::unsupervised()).unwrap();
        assert_eq!(r.total, 2.0);
        let r = total_loss(c, 0.5, LossWeights::supervised()).unwrap();
        assert_eq!(r.total, 2.5);
        assert!((r.vae - (r.recon_methyl + r.recon_expr + r.kl)).abs() <= 1e-12);
        assert!(LossWeights::new(-1.0, 1.0).is_err());
        assert!(LossWeights::new(0.0, 0.0).is_err());
    }

    fn central<F: Fn(&Matrix) -> f64>(f: F, at: &Matrix, i: usize) -> f64 {
        let h = 1e-6;
        let mut p = at.clone();
        p.data_mut()[i] += h;
        let mut m = at.clone();
        m.data_mut()[i] -= h;
        (f(&p) - f(&m)) / (2.0 * h)
    }

    fn rel(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1e-12)
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = RngState::new(8);
        let t = Matrix::from_fn(3, 4, |_, _| rng.uniform());
        let p = Matrix::from_fn(3, 4, |_, _| rng.uniform_range(0.05, 0.95));
        let g = bce_grad(&t, &p).unwrap();
        for i in 0..12 {
            let n = central(|x| bce(&t, x).unwrap(), &p, i);
            assert!(rel(g.data()[i], n) < 1e-6);
        }
        let a = p.map(|v| (v / (1.0 - v)).ln());
        let gs = bce_sigmoid_grad(&t, &p, 1.0).unwrap();
        for i in 0..12 {
            let n = central(|x| bce(&t, &crate::layers::ActivationKind::Sigmoid.apply(x)).unwrap(), &a, i);
            assert!(rel(gs.data()[i], n) < 1e-6);
        }
        let mu = rng.gaussian(3, 2);
        let lv = rng.gaussian(3, 2);
        let (gm, gl) = kl_grads(&mu, &lv).unwrap();
        for i in 0..6 {
            assert!(rel(gm.data()[i], central(|x| kl_gaussian(x, &lv).unwrap(), &mu, i)) < 1e-6);
            assert!(rel(gl.data()[i], central(|x| kl_gaussian(&mu, x).unwrap(), &lv, i)) < 1e-6);
        }
        let logits = rng.gaussian(3, 5);
        let labels = [4, 0, 2];
        let (_, gz) = classification_loss_from_logits(&labels, &logits).unwrap();
        for i in 0..15 {
            let n = central(|x| classification_loss_from_logits(&labels, x).unwrap().0, &logits, i);
            assert!(rel(gz.data()[i], n) < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn kl_is_non_negative(mu in proptest::collection::vec(-3.0f64..3.0, 4),
                              lv in proptest::collection::vec(-3.0f64..3.0, 4)) {
            let m = Matrix::new(2, 2, mu).unwrap();
            let l = Matrix::new(2, 2, lv).unwrap();
            prop_assert!(kl_gaussian(&m, &l).unwrap() >= 0.0);
        }

        #[test]
        fn target_minimizes_bce(t in proptest::collection::vec(0.0f64..=1.0, 6),
                                p in proptest::collection::vec(0.0f64..=1.0, 6)) {
            let t = Matrix::new(2, 3, t).unwrap();
            let p = Matrix::new(2, 3, p).unwrap();
            let best = bce(&t, &t.map(clamp_prob)).unwrap();
            prop_assert!(bce(&t, &p).unwrap() >= best - 1e-12);
        }
    }
}
