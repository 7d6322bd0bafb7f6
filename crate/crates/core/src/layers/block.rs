use super::{join, ActivationKind, BatchNormCache, BatchNormLayer, LinearLayer, Mode, Parameterized};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngState};

#[derive(Clone, Debug)]
struct FcCache {
    input: Matrix,
    pre_activation: Matrix,
    output: Matrix,
    norm: Option<BatchNormCache>,
}

/// Linear layer, optional batch normalization, activation.
#[derive(Clone, Debug)]
pub struct FcBlock {
    pub linear: LinearLayer,
    pub norm: Option<BatchNormLayer>,
    pub activation: ActivationKind,
    cache: Option<FcCache>,
}

impl FcBlock {
    /// A block with batch norm carries no linear bias.
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        batch_norm: bool,
        activation: ActivationKind,
        rng: &mut RngState,
    ) -> Self {
        FcBlock {
            linear: LinearLayer::new(in_dim, out_dim, !batch_norm, rng),
            norm: batch_norm.then(|| BatchNormLayer::new(out_dim)),
            activation,
            cache: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.linear.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.linear.out_dim()
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        match mode {
            Mode::Infer => self.infer(x),
            Mode::Train => self.forward_train(x),
        }
    }

    fn forward_train(&mut self, x: &Matrix) -> Result<Matrix> {
        let linear_out = self.linear.forward(x)?;
        let (pre, norm_cache) = match &mut self.norm {
            Some(bn) => {
                let (y, c) = bn.forward_train(&linear_out)?;
                (y, Some(c))
            }
            None => (linear_out, None),
        };
        let output = self.activation.apply(&pre).ensure_finite("fc forward")?;
        self.cache = Some(FcCache {
            input: x.clone(),
            pre_activation: pre,
            output: output.clone(),
            norm: norm_cache,
        });
        Ok(output)
    }

    /// Inference-mode forward: running statistics, no mutation.
    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = self.linear.forward(x)?;
        if let Some(bn) = &self.norm {
            y = bn.forward_infer(&y)?;
        }
        self.activation.apply(&y).ensure_finite("fc infer")
    }

    /// Backpropagate a gradient w.r.t. the block output; consumes the cache.
    pub fn backward(&mut self, upstream: &Matrix) -> Result<Matrix> {
        let cache = self.cache.as_ref().ok_or(Error::MissingCache)?;
        let grad_pre = self
            .activation
            .backward(&cache.pre_activation, &cache.output, upstream)?;
        self.backward_from_pre_activation(&grad_pre)
    }

    /// Backpropagate a gradient already taken w.r.t. the pre-activation, for
    /// losses fused with their output activation (sigmoid + BCE, softmax + CE).
    pub fn backward_from_pre_activation(&mut self, grad_pre: &Matrix) -> Result<Matrix> {
        let cache = self.cache.take().ok_or(Error::MissingCache)?;
        if grad_pre.shape() != cache.output.shape() {
            return Err(Error::shape(
                "fc backward",
                format!("upstream {:?} vs output {:?}", grad_pre.shape(), cache.output.shape()),
            ));
        }
        let grad_linear = match (&mut self.norm, &cache.norm) {
            (Some(bn), Some(nc)) => bn.backward(nc, grad_pre)?,
            _ => grad_pre.clone(),
        };
        self.linear.backward(&cache.input, &grad_linear)
    }

    /// Pre-activation of the last training-mode forward, if its cache is still held.
    pub fn cached_pre_activation(&self) -> Option<&Matrix> {
        self.cache.as_ref().map(|c| &c.pre_activation)
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

impl Parameterized for FcBlock {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64], &mut [f64])) {
        self.linear.visit_params(&join(prefix, "linear"), f);
        if let Some(bn) = &mut self.norm {
            bn.visit_params(&join(prefix, "norm"), f);
        }
    }

    fn visit_tensors(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.linear.visit_tensors(&join(prefix, "linear"), f);
        if let Some(bn) = &self.norm {
            bn.visit_tensors(&join(prefix, "norm"), f);
        }
    }

    fn visit_tensors_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        self.linear.visit_tensors_mut(&join(prefix, "linear"), f);
        if let Some(bn) = &mut self.norm {
            bn.visit_tensors_mut(&join(prefix, "norm"), f);
        }
    }
}
