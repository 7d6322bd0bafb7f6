//! The multi-omics VAE: per-chromosome methylation sub-encoders and a two-layer
//! expression encoder feeding a fusion layer and Gaussian latent heads, a
//! mirrored decoder with sigmoid outputs, and a softmax classifier on `μ`.

mod config;

pub use config::ModelConfig;

use crate::error::{Error, Result};
use crate::layers::{join, ActivationKind, FcBlock, LinearLayer, Mode, Parameterized};
use crate::loss::{self, LossReport, LossWeights, VaeComponents};
use crate::numerics::{Matrix, RngState};

/// One batch of model inputs, rows aligned across modalities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelInput {
    pub expr: Option<Matrix>,
    /// One matrix per chromosome block; empty when methylation is disabled.
    pub methyl: Vec<Matrix>,
}

impl ModelInput {
    pub fn rows(&self) -> usize {
        self.expr
            .as_ref()
            .map(Matrix::rows)
            .or_else(|| self.methyl.first().map(Matrix::rows))
            .unwrap_or(0)
    }

    /// Stack the rows of several inputs with identical modality layout.
    pub fn concat(parts: &[&ModelInput]) -> Result<ModelInput> {
        let Some(first) = parts.first() else {
            return Ok(ModelInput::default());
        };
        let expr = match &first.expr {
            Some(_) => {
                let mats = parts
                    .iter()
                    .map(|p| p.expr.as_ref().ok_or_else(|| Error::shape("concat", "expression missing")))
                    .collect::<Result<Vec<_>>>()?;
                Some(Matrix::vcat(&mats)?)
            }
            None => None,
        };
        let mut methyl = Vec::with_capacity(first.methyl.len());
        for j in 0..first.methyl.len() {
            let mats = parts
                .iter()
                .map(|p| p.methyl.get(j).ok_or_else(|| Error::shape("concat", "block count differs")))
                .collect::<Result<Vec<_>>>()?;
            methyl.push(Matrix::vcat(&mats)?);
        }
        Ok(ModelInput { expr, methyl })
    }

    pub fn select_rows(&self, indices: &[usize]) -> ModelInput {
        ModelInput {
            expr: self.expr.as_ref().map(|m| m.select_rows(indices)),
            methyl: self.methyl.iter().map(|m| m.select_rows(indices)).collect(),
        }
    }
}

/// Reparameterized latent draw.
#[derive(Clone, Debug)]
pub struct LatentSample {
    pub mu: Matrix,
    pub logvar: Matrix,
    pub epsilon: Matrix,
    pub z: Matrix,
}

/// `z = μ + exp(logvar / 2) ⊙ ε`, with `ε ~ N(0, I)` in training mode and `ε = 0` otherwise.
pub fn reparameterize(mu: &Matrix, logvar: &Matrix, rng: &mut RngState, mode: Mode) -> Result<LatentSample> {
    if mu.shape() != logvar.shape() {
        return Err(Error::shape(
            "reparameterize",
            format!("mu {:?} vs logvar {:?}", mu.shape(), logvar.shape()),
        ));
    }
    let epsilon = match mode {
        Mode::Train => rng.gaussian(mu.rows(), mu.cols()),
        Mode::Infer => Matrix::zeros(mu.rows(), mu.cols()),
    };
    let z = sample_with(mu, logvar, &epsilon)?;
    Ok(LatentSample {
        mu: mu.clone(),
        logvar: logvar.clone(),
        epsilon,
        z,
    })
}

/// `μ + exp(logvar / 2) ⊙ ε` for a given noise matrix.
pub fn sample_with(mu: &Matrix, logvar: &Matrix, epsilon: &Matrix) -> Result<Matrix> {
    let sigma_eps = logvar.zip_map(epsilon, |lv, e| (0.5 * lv).exp() * e)?;
    mu.add(&sigma_eps)?.ensure_finite("reparameterize")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub expr: Option<Matrix>,
    pub methyl: Vec<Matrix>,
}

/// Everything produced by one training-mode forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub latent: LatentSample,
    pub recon: Reconstruction,
    /// Present when the classification term was active.
    pub class_probs: Option<Matrix>,
}

/// Deterministic inference-mode outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    pub mu: Matrix,
    pub logvar: Matrix,
    pub recon: Reconstruction,
    pub class_probs: Matrix,
}

#[derive(Clone, Debug)]
pub struct OmiVaeModel {
    config: ModelConfig,
    methyl_encoders: Vec<FcBlock>,
    methyl_merge: Option<FcBlock>,
    expr_encoder_1: Option<FcBlock>,
    expr_encoder_2: Option<FcBlock>,
    fusion: FcBlock,
    mu_head: LinearLayer,
    logvar_head: LinearLayer,
    decoder_latent: FcBlock,
    decoder_split: FcBlock,
    decoder_methyl_expand: Option<FcBlock>,
    decoder_methyl_out: Vec<FcBlock>,
    decoder_expr_expand: Option<FcBlock>,
    decoder_expr_out: Option<FcBlock>,
    classifier: Vec<FcBlock>,
    fusion_output: Option<Matrix>,
}

fn relu_block(i: usize, o: usize, rng: &mut RngState) -> FcBlock {
    FcBlock::new(i, o, true, ActivationKind::Relu, rng)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl OmiVaeModel {
    pub fn build(config: ModelConfig, rng: &mut RngState) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let m = c.num_blocks();
        let methyl = c.methylation_enabled();
        let expr = c.expression_enabled();

        let methyl_encoders = (0..m)
            .map(|j| relu_block(c.methyl_block_dims[j], c.per_block_hidden, rng))
            .collect();
        let methyl_merge = methyl.then(|| relu_block(m * c.per_block_hidden, c.modality_dim, rng));
        let expr_encoder_1 = expr.then(|| relu_block(c.expr_dim, c.expr_hidden, rng));
        let expr_encoder_2 = expr.then(|| relu_block(c.expr_hidden, c.modality_dim, rng));
        let joint = c.active_modalities() * c.modality_dim;
        let fusion = relu_block(joint, c.fusion_dim, rng);
        let mu_head = LinearLayer::new(c.fusion_dim, c.latent_dim, true, rng);
        let logvar_head = LinearLayer::new(c.fusion_dim, c.latent_dim, true, rng);

        let decoder_latent = relu_block(c.latent_dim, c.fusion_dim, rng);
        let decoder_split = relu_block(c.fusion_dim, joint, rng);
        let decoder_methyl_expand =
            methyl.then(|| relu_block(c.modality_dim, m * c.per_block_hidden, rng));
        let decoder_methyl_out = (0..m)
            .map(|j| {
                FcBlock::new(
                    c.per_block_hidden,
                    c.methyl_block_dims[j],
                    false,
                    ActivationKind::Sigmoid,
                    rng,
                )
            })
            .collect();
        let decoder_expr_expand = expr.then(|| relu_block(c.modality_dim, c.expr_hidden, rng));
        let decoder_expr_out = expr
            .then(|| FcBlock::new(c.expr_hidden, c.expr_dim, false, ActivationKind::Sigmoid, rng));

        let mut classifier = Vec::new();
        let mut width = c.latent_dim;
        for &h in &c.classifier_hidden {
            classifier.push(relu_block(width, h, rng));
            width = h;
        }
        classifier.push(FcBlock::new(width, c.num_classes, false, ActivationKind::Softmax, rng));

        Ok(OmiVaeModel {
            config,
            methyl_encoders,
            methyl_merge,
            expr_encoder_1,
            expr_encoder_2,
            fusion,
            mu_head,
            logvar_head,
            decoder_latent,
            decoder_split,
            decoder_methyl_expand,
            decoder_methyl_out,
            decoder_expr_expand,
            decoder_expr_out,
            classifier,
            fusion_output: None,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Input widths of the per-chromosome encoder blocks.
    pub fn methyl_encoder_in_dims(&self) -> Vec<usize> {
        self.methyl_encoders.iter().map(FcBlock::in_dim).collect()
    }

    /// Output widths of the decoder, per chromosome block then expression.
    pub fn decoder_out_dims(&self) -> (Vec<usize>, Option<usize>) {
        (
            self.decoder_methyl_out.iter().map(FcBlock::out_dim).collect(),
            self.decoder_expr_out.as_ref().map(FcBlock::out_dim),
        )
    }

    /// Closed-form count of learnable scalars for a configuration.
    pub fn expected_param_count(c: &ModelConfig) -> usize {
        // linear without bias + batch norm (gamma, beta)
        let bn = |i: usize, o: usize| i * o + 2 * o;
        let plain = |i: usize, o: usize| i * o + o;
        let m = c.num_blocks();
        let joint = c.active_modalities() * c.modality_dim;
        let mut n = 0;
        if c.methylation_enabled() {
            n += c.methyl_block_dims.iter().map(|&d| bn(d, c.per_block_hidden)).sum::<usize>();
            n += bn(m * c.per_block_hidden, c.modality_dim);
            n += bn(c.modality_dim, m * c.per_block_hidden);
            n += c.methyl_block_dims.iter().map(|&d| plain(c.per_block_hidden, d)).sum::<usize>();
        }
        if c.expression_enabled() {
            n += bn(c.expr_dim, c.expr_hidden) + bn(c.expr_hidden, c.modality_dim);
            n += bn(c.modality_dim, c.expr_hidden) + plain(c.expr_hidden, c.expr_dim);
        }
        n += bn(joint, c.fusion_dim) + 2 * plain(c.fusion_dim, c.latent_dim);
        n += bn(c.latent_dim, c.fusion_dim) + bn(c.fusion_dim, joint);
        let mut width = c.latent_dim;
        for &h in &c.classifier_hidden {
            n += bn(width, h);
            width = h;
        }
        n + plain(width, c.num_classes)
    }

    fn check_input(&self, input: &ModelInput) -> Result<()> {
        let c = &self.config;
        let rows = input.rows();
        if c.expression_enabled() {
            match &input.expr {
                None => return Err(Error::shape("encode", "expression input missing")),
                Some(x) if x.cols() != c.expr_dim || x.rows() != rows => {
                    return Err(Error::shape(
                        "encode",
                        format!("expression input {:?}, expected {} features", x.shape(), c.expr_dim),
                    ))
                }
                _ => {}
            }
        }
        if c.methylation_enabled() {
            if input.methyl.len() != c.num_blocks() {
                return Err(Error::shape(
                    "encode",
                    format!("{} methylation blocks, expected {}", input.methyl.len(), c.num_blocks()),
                ));
            }
            for (j, (x, &d)) in input.methyl.iter().zip(&c.methyl_block_dims).enumerate() {
                if x.cols() != d || x.rows() != rows {
                    return Err(Error::shape(
                        "encode",
                        format!("methylation block {j} is {:?}, expected {d} features", x.shape()),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Encode to `(μ, logvar)`. Training mode keeps caches for backward.
    pub fn encode(&mut self, input: &ModelInput, mode: Mode) -> Result<(Matrix, Matrix)> {
        if mode == Mode::Infer {
            return self.encode_infer(input);
        }
        self.check_input(input)?;
        let mut parts = Vec::with_capacity(2);
        if let Some(merge) = &mut self.methyl_merge {
            let hidden = self
                .methyl_encoders
                .iter_mut()
                .zip(&input.methyl)
                .map(|(b, x)| b.forward(x, mode))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Matrix> = hidden.iter().collect();
            parts.push(merge.forward(&Matrix::hcat(&refs)?, mode)?);
        }
        if let (Some(e1), Some(e2), Some(x)) = (&mut self.expr_encoder_1, &mut self.expr_encoder_2, &input.expr) {
            let h = e1.forward(x, mode)?;
            parts.push(e2.forward(&h, mode)?);
        }
        let refs: Vec<&Matrix> = parts.iter().collect();
        let fused = self.fusion.forward(&Matrix::hcat(&refs)?, mode)?;
        let mu = self.mu_head.forward(&fused)?.ensure_finite("mu head")?;
        let logvar = self.logvar_head.forward(&fused)?.ensure_finite("logvar head")?;
        self.fusion_output = Some(fused);
        Ok((mu, logvar))
    }

    pub fn encode_infer(&self, input: &ModelInput) -> Result<(Matrix, Matrix)> {
        self.check_input(input)?;
        let mut parts = Vec::with_capacity(2);
        if let Some(merge) = &self.methyl_merge {
            let hidden = self
                .methyl_encoders
                .iter()
                .zip(&input.methyl)
                .map(|(b, x)| b.infer(x))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Matrix> = hidden.iter().collect();
            parts.push(merge.infer(&Matrix::hcat(&refs)?)?);
        }
        if let (Some(e1), Some(e2), Some(x)) = (&self.expr_encoder_1, &self.expr_encoder_2, &input.expr) {
            parts.push(e2.infer(&e1.infer(x)?)?);
        }
        let refs: Vec<&Matrix> = parts.iter().collect();
        let fused = self.fusion.infer(&Matrix::hcat(&refs)?)?;
        let mu = self.mu_head.forward(&fused)?.ensure_finite("mu head")?;
        let logvar = self.logvar_head.forward(&fused)?.ensure_finite("logvar head")?;
        Ok((mu, logvar))
    }

    fn split_widths(&self) -> Vec<usize> {
        vec![self.config.modality_dim; self.config.active_modalities()]
    }

    fn check_latent(&self, z: &Matrix, op: &'static str) -> Result<()> {
        if z.cols() != self.config.latent_dim {
            return Err(Error::shape(
                op,
                format!("latent has {} columns, expected {}", z.cols(), self.config.latent_dim),
            ));
        }
        Ok(())
    }

    pub fn decode(&mut self, z: &Matrix, mode: Mode) -> Result<Reconstruction> {
        if mode == Mode::Infer {
            return self.decode_infer(z);
        }
        self.check_latent(z, "decode")?;
        let h = self.decoder_latent.forward(z, mode)?;
        let joint = self.decoder_split.forward(&h, mode)?;
        let mut parts = joint.split_cols(&self.split_widths())?.into_iter();
        let mut methyl = Vec::new();
        if let Some(expand) = &mut self.decoder_methyl_expand {
            let hm = expand.forward(&parts.next().expect("methylation slice"), mode)?;
            let chunks = hm.split_cols(&vec![self.config.per_block_hidden; self.config.num_blocks()])?;
            for (block, chunk) in self.decoder_methyl_out.iter_mut().zip(&chunks) {
                methyl.push(block.forward(chunk, mode)?);
            }
        }
        let expr = match (&mut self.decoder_expr_expand, &mut self.decoder_expr_out) {
            (Some(expand), Some(out)) => {
                let he = expand.forward(&parts.next().expect("expression slice"), mode)?;
                Some(out.forward(&he, mode)?)
            }
            _ => None,
        };
        Ok(Reconstruction { expr, methyl })
    }

    pub fn decode_infer(&self, z: &Matrix) -> Result<Reconstruction> {
        self.check_latent(z, "decode")?;
        let joint = self.decoder_split.infer(&self.decoder_latent.infer(z)?)?;
        let mut parts = joint.split_cols(&self.split_widths())?.into_iter();
        let mut methyl = Vec::new();
        if let Some(expand) = &self.decoder_methyl_expand {
            let hm = expand.infer(&parts.next().expect("methylation slice"))?;
            let chunks = hm.split_cols(&vec![self.config.per_block_hidden; self.config.num_blocks()])?;
            for (block, chunk) in self.decoder_methyl_out.iter().zip(&chunks) {
                methyl.push(block.infer(chunk)?);
            }
        }
        let expr = match (&self.decoder_expr_expand, &self.decoder_expr_out) {
            (Some(expand), Some(out)) => Some(out.infer(&expand.infer(&parts.next().expect("expression slice"))?)?),
            _ => None,
        };
        Ok(Reconstruction { expr, methyl })
    }

    /// Class probabilities from `μ`.
    pub fn classify(&mut self, mu: &Matrix, mode: Mode) -> Result<Matrix> {
        if mode == Mode::Infer {
            return self.classify_infer(mu);
        }
        self.check_latent(mu, "classify")?;
        let mut h = mu.clone();
        for block in &mut self.classifier {
            h = block.forward(&h, mode)?;
        }
        Ok(h)
    }

    pub fn classify_infer(&self, mu: &Matrix) -> Result<Matrix> {
        self.check_latent(mu, "classify")?;
        let mut h = mu.clone();
        for block in &self.classifier {
            h = block.infer(&h)?;
        }
        Ok(h)
    }

    /// Deterministic forward pass (running statistics, `z = μ`).
    pub fn infer(&self, input: &ModelInput) -> Result<Inference> {
        let (mu, logvar) = self.encode_infer(input)?;
        let recon = self.decode_infer(&mu)?;
        let class_probs = self.classify_infer(&mu)?;
        Ok(Inference {
            mu,
            logvar,
            recon,
            class_probs,
        })
    }

    pub fn predict(&self, input: &ModelInput) -> Result<Vec<usize>> {
        let (mu, _) = self.encode_infer(input)?;
        let probs = self.classify_infer(&mu)?;
        Ok((0..probs.rows()).map(|r| argmax(probs.row(r))).collect())
    }

    /// Inference-mode loss on a held-out batch, with `z = μ`.
    pub fn evaluate_loss(
        &self,
        input: &ModelInput,
        labels: Option<&[usize]>,
        weights: LossWeights,
    ) -> Result<(LossReport, Inference)> {
        let out = self.infer(input)?;
        let components = self.vae_components(input, &out.recon, &out.mu, &out.logvar)?;
        let classification = match labels {
            Some(l) if weights.beta > 0.0 => loss::classification_loss(l, &out.class_probs)?,
            _ => 0.0,
        };
        Ok((loss::total_loss(components, classification, weights)?, out))
    }

    fn vae_components(
        &self,
        input: &ModelInput,
        recon: &Reconstruction,
        mu: &Matrix,
        logvar: &Matrix,
    ) -> Result<VaeComponents> {
        let methyl_targets: &[Matrix] = if self.config.methylation_enabled() {
            &input.methyl
        } else {
            &[]
        };
        let expr = match (&input.expr, &recon.expr) {
            (Some(t), Some(p)) if self.config.expression_enabled() => Some((t, p)),
            _ => None,
        };
        loss::vae_loss_with(methyl_targets, &recon.methyl, expr, mu, logvar, self.config.recon_reduction)
    }

    /// Training-mode forward pass and backward pass of
    /// `α·(recon + KL) + β·classification`; gradients are accumulated.
    ///
    /// The classifier reads `μ`, so the classification gradient reaches the
    /// encoder without passing through the sampling step.
    pub fn forward_backward(
        &mut self,
        input: &ModelInput,
        labels: Option<&[usize]>,
        weights: LossWeights,
        rng: &mut RngState,
    ) -> Result<(ForwardPass, LossReport)> {
        let weights = LossWeights::new(weights.alpha, weights.beta)?;
        let supervised = weights.beta > 0.0;
        if supervised && labels.is_none() {
            return Err(Error::Label("classification weight is positive but no labels were given".into()));
        }
        let batch = input.rows();

        let (mu, logvar) = self.encode(input, Mode::Train)?;
        let latent = reparameterize(&mu, &logvar, rng, Mode::Train)?;
        let recon = self.decode(&latent.z, Mode::Train)?;
        let components = self.vae_components(input, &recon, &mu, &logvar)?;

        let mut class_probs = None;
        let mut classification = 0.0;
        let mut grad_logits = None;
        if supervised {
            let labels = labels.expect("checked above");
            let probs = self.classify(&mu, Mode::Train)?;
            let logits = self
                .classifier
                .last()
                .and_then(FcBlock::cached_pre_activation)
                .expect("classifier cache after training forward");
            let (ce, g) = loss::classification_loss_from_logits(labels, logits)?;
            classification = ce;
            grad_logits = Some(g.scale(weights.beta));
            class_probs = Some(probs);
        }
        let report = loss::total_loss(components, classification, weights)?;

        // decoder
        let mut grad_z = Matrix::zeros(batch, self.config.latent_dim);
        if weights.alpha > 0.0 {
            grad_z = self.backward_decoder(input, &recon, weights.alpha)?;
        } else {
            self.clear_decoder_caches();
        }

        // latent: dz/dμ = 1, dz/dlogvar = ½ σ ε
        let (kl_mu, kl_logvar) = loss::kl_grads(&mu, &logvar)?;
        let mut grad_mu = grad_z.add(&kl_mu.scale(weights.alpha))?;
        let half_sigma_eps = logvar.zip_map(&latent.epsilon, |lv, e| 0.5 * (0.5 * lv).exp() * e)?;
        let grad_logvar = grad_z
            .zip_map(&half_sigma_eps, |g, s| g * s)?
            .add(&kl_logvar.scale(weights.alpha))?;

        if let Some(g) = grad_logits {
            let n = self.classifier.len();
            let mut g = self.classifier[n - 1].backward_from_pre_activation(&g)?;
            for block in self.classifier[..n - 1].iter_mut().rev() {
                g = block.backward(&g)?;
            }
            grad_mu.add_assign(&g)?;
        }

        self.backward_encoder(&grad_mu, &grad_logvar)?;

        let forward = ForwardPass {
            latent,
            recon,
            class_probs,
        };
        Ok((forward, report))
    }

    fn backward_decoder(&mut self, input: &ModelInput, recon: &Reconstruction, alpha: f64) -> Result<Matrix> {
        let mut grads = Vec::with_capacity(2);
        if let Some(expand) = &mut self.decoder_methyl_expand {
            let m = self.decoder_methyl_out.len() as f64;
            let mut chunk_grads = Vec::with_capacity(self.decoder_methyl_out.len());
            for ((block, target), pred) in self.decoder_methyl_out.iter_mut().zip(&input.methyl).zip(&recon.methyl) {
                let w = alpha / m * self.config.recon_reduction.factor(target.cols());
                let g = loss::bce_sigmoid_grad(target, pred, w)?;
                chunk_grads.push(block.backward_from_pre_activation(&g)?);
            }
            let refs: Vec<&Matrix> = chunk_grads.iter().collect();
            grads.push(expand.backward(&Matrix::hcat(&refs)?)?);
        }
        if let (Some(expand), Some(out), Some(target), Some(pred)) = (
            &mut self.decoder_expr_expand,
            &mut self.decoder_expr_out,
            &input.expr,
            &recon.expr,
        ) {
            let w = alpha * self.config.recon_reduction.factor(target.cols());
            let g = loss::bce_sigmoid_grad(target, pred, w)?;
            let g = out.backward_from_pre_activation(&g)?;
            grads.push(expand.backward(&g)?);
        }
        let refs: Vec<&Matrix> = grads.iter().collect();
        let g = self.decoder_split.backward(&Matrix::hcat(&refs)?)?;
        self.decoder_latent.backward(&g)
    }

    fn backward_encoder(&mut self, grad_mu: &Matrix, grad_logvar: &Matrix) -> Result<()> {
        let fused = self.fusion_output.take().ok_or(Error::MissingCache)?;
        let mut g = self.mu_head.backward(&fused, grad_mu)?;
        g.add_assign(&self.logvar_head.backward(&fused, grad_logvar)?)?;
        let g = self.fusion.backward(&g)?;
        let mut parts = g.split_cols(&self.split_widths())?.into_iter();
        if let Some(merge) = &mut self.methyl_merge {
            let g = merge.backward(&parts.next().expect("methylation slice"))?;
            let chunks = g.split_cols(&vec![self.config.per_block_hidden; self.config.num_blocks()])?;
            for (block, chunk) in self.methyl_encoders.iter_mut().zip(&chunks) {
                block.backward(chunk)?;
            }
        }
        if let (Some(e1), Some(e2)) = (&mut self.expr_encoder_1, &mut self.expr_encoder_2) {
            let g = e2.backward(&parts.next().expect("expression slice"))?;
            e1.backward(&g)?;
        }
        Ok(())
    }

    /// Visit parameters of one component: `"encoder"`, `"decoder"`, or `"classifier"`.
    pub fn visit_component_params(&mut self, component: &str, f: &mut dyn FnMut(&str, &mut [f64], &mut [f64])) {
        for (name, layer) in self.layers_mut() {
            if name.split('.').next() == Some(component) {
                layer.visit_params(&name, f);
            }
        }
    }

    /// Every layer in the fixed visitation order, named by role.
    fn layers(&self) -> Vec<(String, &dyn Parameterized)> {
        let mut v: Vec<(String, &dyn Parameterized)> = Vec::new();
        for (j, b) in self.methyl_encoders.iter().enumerate() {
            v.push((format!("encoder.methyl.{j}"), b));
        }
        if let Some(b) = &self.methyl_merge {
            v.push(("encoder.methyl_merge".into(), b));
        }
        if let Some(b) = &self.expr_encoder_1 {
            v.push(("encoder.expr_1".into(), b));
        }
        if let Some(b) = &self.expr_encoder_2 {
            v.push(("encoder.expr_2".into(), b));
        }
        v.push(("encoder.fusion".into(), &self.fusion));
        v.push(("encoder.mu".into(), &self.mu_head));
        v.push(("encoder.logvar".into(), &self.logvar_head));
        v.push(("decoder.latent".into(), &self.decoder_latent));
        v.push(("decoder.split".into(), &self.decoder_split));
        if let Some(b) = &self.decoder_methyl_expand {
            v.push(("decoder.methyl_expand".into(), b));
        }
        for (j, b) in self.decoder_methyl_out.iter().enumerate() {
            v.push((format!("decoder.methyl_out.{j}"), b));
        }
        if let Some(b) = &self.decoder_expr_expand {
            v.push(("decoder.expr_expand".into(), b));
        }
        if let Some(b) = &self.decoder_expr_out {
            v.push(("decoder.expr_out".into(), b));
        }
        for (j, b) in self.classifier.iter().enumerate() {
            v.push((format!("classifier.{j}"), b));
        }
        v
    }

    /// Mutable counterpart of [`OmiVaeModel::layers`], same order.
    fn layers_mut(&mut self) -> Vec<(String, &mut dyn Parameterized)> {
        let mut v: Vec<(String, &mut dyn Parameterized)> = Vec::new();
        for (j, b) in self.methyl_encoders.iter_mut().enumerate() {
            v.push((format!("encoder.methyl.{j}"), b));
        }
        if let Some(b) = &mut self.methyl_merge {
            v.push(("encoder.methyl_merge".into(), b));
        }
        if let Some(b) = &mut self.expr_encoder_1 {
            v.push(("encoder.expr_1".into(), b));
        }
        if let Some(b) = &mut self.expr_encoder_2 {
            v.push(("encoder.expr_2".into(), b));
        }
        v.push(("encoder.fusion".into(), &mut self.fusion));
        v.push(("encoder.mu".into(), &mut self.mu_head));
        v.push(("encoder.logvar".into(), &mut self.logvar_head));
        v.push(("decoder.latent".into(), &mut self.decoder_latent));
        v.push(("decoder.split".into(), &mut self.decoder_split));
        if let Some(b) = &mut self.decoder_methyl_expand {
            v.push(("decoder.methyl_expand".into(), b));
        }
        for (j, b) in self.decoder_methyl_out.iter_mut().enumerate() {
            v.push((format!("decoder.methyl_out.{j}"), b));
        }
        if let Some(b) = &mut self.decoder_expr_expand {
            v.push(("decoder.expr_expand".into(), b));
        }
        if let Some(b) = &mut self.decoder_expr_out {
            v.push(("decoder.expr_out".into(), b));
        }
        for (j, b) in self.classifier.iter_mut().enumerate() {
            v.push((format!("classifier.{j}"), b));
        }
        v
    }

    fn clear_decoder_caches(&mut self) {
        self.decoder_latent.clear_cache();
        self.decoder_split.clear_cache();
        let optional = [&mut self.decoder_methyl_expand, &mut self.decoder_expr_expand, &mut self.decoder_expr_out];
        for b in optional.into_iter().flatten() {
            b.clear_cache();
        }
        for b in &mut self.decoder_methyl_out {
            b.clear_cache();
        }
    }
}

impl Parameterized for OmiVaeModel {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64], &mut [f64])) {
        for (name, layer) in self.layers_mut() {
            layer.visit_params(&join(prefix, &name), f);
        }
    }

    fn visit_tensors(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        for (name, layer) in self.layers() {
            layer.visit_tensors(&join(prefix, &name), f);
        }
    }

    fn visit_tensors_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        for (name, layer) in self.layers_mut() {
            layer.visit_tensors_mut(&join(prefix, &name), f);
        }
    }
}
