use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::loss::Reduction;

/// Network widths and modality layout.
///
/// Only the per-chromosome width (256), the per-modality width (1024), and the
/// latent width (128, or 2 for visualization) are fixed by the reference
/// architecture; the remaining widths are configurable guesses.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Feature count of each methylation chromosome block, in chromosome order.
    pub methyl_block_dims: Vec<usize>,
    pub expr_dim: usize,
    pub per_block_hidden: usize,
    /// First hidden width of the expression encoder.
    pub expr_hidden: usize,
    pub modality_dim: usize,
    pub fusion_dim: usize,
    pub latent_dim: usize,
    pub classifier_hidden: Vec<usize>,
    pub num_classes: usize,
    pub use_expression: bool,
    pub use_methylation: bool,
    /// Reduction of reconstruction BCE over features.
    pub recon_reduction: Reduction,
}

impl ModelConfig {
    /// Full-size widths for TCGA-shaped inputs.
    pub fn full_scale(methyl_block_dims: Vec<usize>, expr_dim: usize, num_classes: usize) -> Self {
        ModelConfig {
            use_methylation: !methyl_block_dims.is_empty(),
            recon_reduction: Reduction::Sum,
            use_expression: expr_dim > 0,
            methyl_block_dims,
            expr_dim,
            per_block_hidden: 256,
            expr_hidden: 4096,
            modality_dim: 1024,
            fusion_dim: 512,
            latent_dim: 128,
            classifier_hidden: vec![128, 64],
            num_classes,
        }
    }

    /// Desk-scale widths for synthetic experiments.
    pub fn small(methyl_block_dims: Vec<usize>, expr_dim: usize, num_classes: usize) -> Self {
        ModelConfig {
            per_block_hidden: 16,
            expr_hidden: 64,
            modality_dim: 64,
            fusion_dim: 32,
            latent_dim: 16,
            classifier_hidden: vec![32, 16],
            ..Self::full_scale(methyl_block_dims, expr_dim, num_classes)
        }
    }

    pub fn methylation_enabled(&self) -> bool {
        self.use_methylation
    }

    pub fn expression_enabled(&self) -> bool {
        self.use_expression
    }

    pub fn num_blocks(&self) -> usize {
        if self.use_methylation {
            self.methyl_block_dims.len()
        } else {
            0
        }
    }

    pub fn active_modalities(&self) -> usize {
        usize::from(self.use_methylation) + usize::from(self.use_expression)
    }

    /// Total reconstructed feature count.
    pub fn input_dim(&self) -> usize {
        let m: usize = if self.use_methylation {
            self.methyl_block_dims.iter().sum()
        } else {
            0
        };
        m + if self.use_expression { self.expr_dim } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.active_modalities() == 0 {
            return bad("at least one modality must be enabled".into());
        }
        if self.use_methylation {
            if self.methyl_block_dims.is_empty() {
                return bad("methylation enabled but no chromosome blocks given".into());
            }
            if self.methyl_block_dims.contains(&0) {
                return bad("every methylation block needs at least one feature".into());
            }
        }
        if self.use_expression && self.expr_dim == 0 {
            return bad("expression enabled with zero features".into());
        }
        for (name, v) in [
            ("per_block_hidden", self.per_block_hidden),
            ("expr_hidden", self.expr_hidden),
            ("modality_dim", self.modality_dim),
            ("fusion_dim", self.fusion_dim),
            ("latent_dim", self.latent_dim),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.classifier_hidden.contains(&0) {
            return bad("classifier hidden widths must be at least 1".into());
        }
        if self.num_classes < 2 {
            return bad(format!("num_classes must be at least 2, got {}", self.num_classes));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set_list("methyl_block_dims", &self.methyl_block_dims);
        doc.set("expr_dim", self.expr_dim);
        doc.set("per_block_hidden", self.per_block_hidden);
        doc.set("expr_hidden", self.expr_hidden);
        doc.set("modality_dim", self.modality_dim);
        doc.set("fusion_dim", self.fusion_dim);
        doc.set("latent_dim", self.latent_dim);
        doc.set_list("classifier_hidden", &self.classifier_hidden);
        doc.set("num_classes", self.num_classes);
        doc.set("use_expression", self.use_expression);
        doc.set("use_methylation", self.use_methylation);
        doc.set("recon_reduction", self.recon_reduction.name());
        doc
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let cfg = ModelConfig {
            methyl_block_dims: doc.get_list("methyl_block_dims")?,
            expr_dim: doc.get("expr_dim")?,
            per_block_hidden: doc.get("per_block_hidden")?,
            expr_hidden: doc.get("expr_hidden")?,
            modality_dim: doc.get("modality_dim")?,
            fusion_dim: doc.get("fusion_dim")?,
            latent_dim: doc.get("latent_dim")?,
            classifier_hidden: doc.get_list("classifier_hidden")?,
            num_classes: doc.get("num_classes")?,
            use_expression: doc.get("use_expression")?,
            use_methylation: doc.get("use_methylation")?,
            recon_reduction: match doc.get_str("recon_reduction") {
                None => Reduction::default(),
                Some(r) => Reduction::parse(r).ok_or_else(|| Error::Config(format!("unknown reduction `{r}`")))?,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
