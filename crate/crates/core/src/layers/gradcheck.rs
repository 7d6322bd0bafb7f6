use super::Parameterized;
use crate::error::{Error, Result};
use crate::numerics::RngState;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Tensors larger than this are checked on a seeded random subset of entries.
    pub max_entries_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            max_entries_per_tensor: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// `max |a − n| / max(|a|, |n|, 1e-12)` over checked entries.
    pub max_rel_error: f64,
    /// Tensor name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compare analytic gradients with central finite differences.
///
/// `loss(target, with_grad)` must be deterministic; when `with_grad` is true it
/// must also accumulate gradients into the target's buffers. Gradients are
/// zeroed before the analytic pass.
pub fn gradient_check<T, F>(target: &mut T, mut loss: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    T: Parameterized,
    F: FnMut(&mut T, bool) -> Result<f64>,
{
    target.zero_grad();
    let base = loss(target, true)?;
    if !base.is_finite() {
        return Err(Error::NonFinite("gradient_check loss"));
    }

    let mut tensors: Vec<(String, Vec<f64>)> = Vec::new();
    target.visit_params("", &mut |name, _, g| tensors.push((name.to_string(), g.to_vec())));

    let mut rng = RngState::new(opts.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (t_idx, (name, analytic)) in tensors.iter().enumerate() {
        let mut entries: Vec<usize> = (0..analytic.len()).collect();
        if entries.len() > opts.max_entries_per_tensor {
            rng.shuffle(&mut entries);
            entries.truncate(opts.max_entries_per_tensor);
            entries.sort_unstable();
        }
        for &i in &entries {
            let original = nudge(target, t_idx, i, None);
            nudge(target, t_idx, i, Some(original + opts.step));
            let plus = loss(target, false)?;
            nudge(target, t_idx, i, Some(original - opts.step));
            let minus = loss(target, false)?;
            nudge(target, t_idx, i, Some(original));
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite("gradient_check loss"));
            }
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((name.clone(), i));
            }
        }
    }
    Ok(report)
}

/// Read entry `index` of the `tensor`-th parameter, optionally overwriting it.
fn nudge<T: Parameterized>(target: &mut T, tensor: usize, index: usize, value: Option<f64>) -> f64 {
    let mut seen = 0;
    let mut old = 0.0;
    target.visit_params("", &mut |_, v, _| {
        if seen == tensor {
            old = v[index];
            if let Some(new) = value {
                v[index] = new;
            }
        }
        seen += 1;
    });
    old
}
