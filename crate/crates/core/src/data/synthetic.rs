//! Seeded class-conditioned surrogate data with both modalities.

use std::f64::consts::TAU;

use super::preprocess::{preprocess, PreprocessConfig, RawOmics};
use super::tsv::{Chromosome, FeatureAnnotation, RawMatrix};
use super::OmicsDataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngState};

/// How class identity reaches the features.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticMode {
    /// Per-class mean offsets on a random subset of features.
    Offsets,
    /// Offsets where expression only sees `class % r` and methylation only
    /// `class / r` (`r = ceil(sqrt(classes))`): neither modality alone
    /// identifies the class.
    SplitModalities,
    /// Classes sit on a 1-D coordinate that every feature sees through a
    /// periodic squashing at several frequencies; linear projections fold
    /// distant classes onto each other.
    NonlinearMix,
}

impl SyntheticMode {
    pub fn name(self) -> &'static str {
        match self {
            SyntheticMode::Offsets => "offsets",
            SyntheticMode::SplitModalities => "split",
            SyntheticMode::NonlinearMix => "nonlinear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "offsets" => Some(SyntheticMode::Offsets),
            "split" => Some(SyntheticMode::SplitModalities),
            "nonlinear" => Some(SyntheticMode::NonlinearMix),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub samples_per_class: usize,
    /// Methylation blocks, mapped to chromosomes 1, 2, ... in order (at most 23).
    pub num_blocks: usize,
    pub features_per_block: usize,
    pub expr_features: usize,
    /// Offset magnitude (offset modes) or wave amplitude (nonlinear mode).
    pub class_signal: f64,
    /// Fraction of features carrying an offset for a given class.
    pub informative_fraction: f64,
    pub mode: SyntheticMode,
    /// Spread of the class coordinate within a class (nonlinear mode).
    pub latent_jitter: f64,
    pub noise_sd: f64,
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_classes: 10,
            samples_per_class: 60,
            num_blocks: 5,
            features_per_block: 200,
            expr_features: 400,
            class_signal: 0.2,
            informative_fraction: 0.2,
            mode: SyntheticMode::Offsets,
            latent_jitter: 0.01,
            noise_sd: 0.1,
            missing_rate: 0.0,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_classes < 2 || self.samples_per_class < 1 {
            return bad("need at least 2 classes and 1 sample per class".into());
        }
        if self.num_blocks > 23 {
            return bad(format!("at most 23 methylation blocks, got {}", self.num_blocks));
        }
        if self.num_blocks * self.features_per_block + self.expr_features == 0 {
            return bad("no features requested".into());
        }
        if !(0.0..=1.0).contains(&self.missing_rate) || !(0.0..=1.0).contains(&self.informative_fraction) {
            return bad("missing_rate and informative_fraction must lie in [0, 1]".into());
        }
        if !(self.noise_sd >= 0.0 && self.latent_jitter >= 0.0 && self.class_signal.is_finite()) {
            return bad("noise_sd and latent_jitter must be non-negative".into());
        }
        Ok(())
    }

    pub fn methyl_features(&self) -> usize {
        self.num_blocks * self.features_per_block
    }
}

/// Generated raw inputs, shaped like real files before preprocessing.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub expression: Option<RawMatrix>,
    pub methylation: Option<RawMatrix>,
    pub annotation: FeatureAnnotation,
    pub labels: Vec<(String, String)>,
}

impl SyntheticData {
    pub fn raw(&self) -> RawOmics {
        RawOmics {
            expression: self.expression.clone(),
            methylation: self.methylation.clone(),
            annotation: self.annotation.clone(),
            labels: Some(self.labels.clone()),
        }
    }

    /// Run default preprocessing.
    pub fn dataset(&self) -> Result<OmicsDataset> {
        Ok(preprocess(&self.raw(), &PreprocessConfig::default())?.0)
    }
}

/// Per-feature recipe drawn once per dataset.
enum FeatureModel {
    Offsets { base: f64, offsets: Vec<f64> },
    Wave { freq: f64, phase: f64 },
}

fn offsets_model(groups: usize, spec: &SyntheticSpec, rng: &mut RngState) -> FeatureModel {
    let base = rng.uniform_range(0.3, 0.7);
    let offsets = (0..groups)
        .map(|_| {
            if rng.uniform() < spec.informative_fraction {
                if rng.uniform() < 0.5 {
                    -spec.class_signal
                } else {
                    spec.class_signal
                }
            } else {
                0.0
            }
        })
        .collect();
    FeatureModel::Offsets { base, offsets }
}

const FREQUENCIES: [f64; 4] = [2.0, 3.0, 4.0, 5.0];

fn wave_model(rng: &mut RngState) -> FeatureModel {
    FeatureModel::Wave {
        freq: FREQUENCIES[rng.below(FREQUENCIES.len())],
        phase: rng.uniform_range(0.0, TAU),
    }
}

pub fn synthesize(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let k = spec.num_classes;
    let n = k * spec.samples_per_class;
    let root = RngState::new(spec.seed);
    let mut structure = root.derive(1);
    let mut sampling = root.derive(2);
    let mut masking = root.derive(3);

    let r = (k as f64).sqrt().ceil() as usize;
    let (expr_group, methyl_group): (Box<dyn Fn(usize) -> usize>, Box<dyn Fn(usize) -> usize>) = match spec.mode {
        SyntheticMode::SplitModalities => (Box::new(move |c| c % r), Box::new(move |c| c / r)),
        _ => (Box::new(|c| c), Box::new(|c| c)),
    };
    let groups = k.max(r);
    let model = |rng: &mut RngState| match spec.mode {
        SyntheticMode::NonlinearMix => wave_model(rng),
        _ => offsets_model(groups, spec, rng),
    };
    let expr_models: Vec<FeatureModel> = (0..spec.expr_features).map(|_| model(&mut structure)).collect();
    let methyl_models: Vec<FeatureModel> = (0..spec.methyl_features()).map(|_| model(&mut structure)).collect();

    let classes: Vec<usize> = (0..n).map(|i| i % k).collect();
    let coords: Vec<f64> = classes
        .iter()
        .map(|&c| (c as f64 + 0.5) / k as f64 + spec.latent_jitter * sampling.normal())
        .collect();

    let mut generate = |models: &[FeatureModel], group: &dyn Fn(usize) -> usize| {
        Matrix::from_fn(n, models.len(), |i, j| {
            let clean = match &models[j] {
                FeatureModel::Offsets { base, offsets } => base + offsets[group(classes[i])],
                FeatureModel::Wave { freq, phase } => 0.5 + spec.class_signal * (TAU * freq * coords[i] + phase).sin(),
            };
            (clean + spec.noise_sd * sampling.normal()).clamp(0.0, 1.0)
        })
    };
    // Row-major fill order keeps the draw sequence independent of modality sizes per sample.
    let expr_values = generate(&expr_models, &*expr_group);
    let methyl_values = generate(&methyl_models, &*methyl_group);

    let mut mask = |m: &Matrix| -> Vec<bool> {
        (0..m.data().len())
            .map(|_| spec.missing_rate > 0.0 && masking.uniform() < spec.missing_rate)
            .collect()
    };
    let sample_ids: Vec<String> = (0..n).map(|i| format!("S{:05}", i + 1)).collect();
    let expression = if spec.expr_features > 0 {
        let ids = (0..spec.expr_features).map(|j| format!("gene_{:05}", j + 1)).collect();
        let m = mask(&expr_values);
        Some(RawMatrix::new(sample_ids.clone(), ids, expr_values, m)?)
    } else {
        None
    };

    let order = Chromosome::grouping_order();
    let mut annotation = FeatureAnnotation::default();
    let mut methyl_ids = Vec::with_capacity(spec.methyl_features());
    for b in 0..spec.num_blocks {
        for j in 0..spec.features_per_block {
            let id = format!("cg{:02}_{:05}", b + 1, j + 1);
            annotation.insert(id.clone(), Some(order[b]));
            methyl_ids.push(id);
        }
    }
    let methylation = if spec.methyl_features() > 0 {
        let m = mask(&methyl_values);
        Some(RawMatrix::new(sample_ids.clone(), methyl_ids, methyl_values, m)?)
    } else {
        None
    };

    let labels = sample_ids
        .iter()
        .zip(&classes)
        .map(|(s, &c)| (s.clone(), format!("class_{c:02}")))
        .collect();
    Ok(SyntheticData {
        expression,
        methylation,
        annotation,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: SyntheticMode) -> SyntheticSpec {
        SyntheticSpec {
            num_classes: 4,
            samples_per_class: 5,
            num_blocks: 3,
            features_per_block: 8,
            expr_features: 10,
            mode,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn shapes_and_range() {
        let d = synthesize(&small(SyntheticMode::Offsets)).unwrap();
        let e = d.expression.as_ref().unwrap();
        let m = d.methylation.as_ref().unwrap();
        assert_eq!(e.values.shape(), (20, 10));
        assert_eq!(m.values.shape(), (20, 24));
        assert!(e.values.data().iter().chain(m.values.data()).all(|v| (0.0..=1.0).contains(v)));
        let ds = d.dataset().unwrap();
        assert_eq!(ds.methyl_block_dims(), [8, 8, 8]);
        assert_eq!(ds.num_classes(), 4);
        assert_eq!(ds.class_counts(), [5; 4]);
    }

    #[test]
    fn noiseless_classes_are_identical() {
        let spec = SyntheticSpec {
            noise_sd: 0.0,
            ..small(SyntheticMode::Offsets)
        };
        let d = synthesize(&spec).unwrap();
        for m in [&d.expression, &d.methylation] {
            let v = &m.as_ref().unwrap().values;
            for i in 0..v.rows() {
                assert_eq!(v.row(i), v.row(i % 4));
            }
        }
    }

    #[test]
    fn split_mode_hides_class_in_each_modality() {
        let spec = SyntheticSpec {
            noise_sd: 0.0,
            ..small(SyntheticMode::SplitModalities)
        };
        let d = synthesize(&spec).unwrap();
        let e = &d.expression.as_ref().unwrap().values;
        let m = &d.methylation.as_ref().unwrap().values;
        // r = 2: classes 0 and 2 share expression, 0 and 1 share methylation.
        assert_eq!(e.row(0), e.row(2));
        assert_eq!(m.row(0), m.row(1));
        assert_ne!(m.row(0), m.row(2));
    }

    #[test]
    fn deterministic_and_seeded() {
        let s = small(SyntheticMode::NonlinearMix);
        assert_eq!(synthesize(&s).unwrap(), synthesize(&s).unwrap());
        let other = SyntheticSpec { seed: 2, ..s.clone() };
        assert_ne!(synthesize(&s).unwrap(), synthesize(&other).unwrap());
    }

    #[test]
    fn missing_rate_is_respected() {
        let spec = SyntheticSpec {
            missing_rate: 0.05,
            ..SyntheticSpec::default()
        };
        let d = synthesize(&spec).unwrap();
        let (mut miss, mut total) = (0, 0);
        for m in [&d.expression, &d.methylation] {
            let m = m.as_ref().unwrap();
            miss += m.missing_count();
            total += m.missing.len();
        }
        let rate = miss as f64 / total as f64;
        assert!((rate - 0.05).abs() < 0.01, "{rate}");
    }

    #[test]
    fn rejects_bad_specs() {
        for spec in [
            SyntheticSpec { num_blocks: 24, ..SyntheticSpec::default() },
            SyntheticSpec { num_classes: 1, ..SyntheticSpec::default() },
            SyntheticSpec { missing_rate: 1.5, ..SyntheticSpec::default() },
        ] {
            assert!(synthesize(&spec).is_err());
        }
    }
}
