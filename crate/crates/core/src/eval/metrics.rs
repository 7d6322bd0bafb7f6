//! Multi-class confusion counts and support-weighted metrics.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

/// `num / den`, or 0 when the denominator vanishes.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(truth: &[usize], predicted: &[usize], num_classes: usize) -> Result<EvalReport> {
    if truth.len() != predicted.len() {
        return Err(Error::Label(format!(
            "{} true labels against {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= num_classes || p >= num_classes {
            return Err(Error::Label(format!("label {} outside {num_classes} classes", t.max(p))));
        }
        confusion[t][p] += 1;
    }
    let n = truth.len();
    let tp: Vec<usize> = (0..num_classes).map(|c| confusion[c][c]).collect();
    let support: Vec<usize> = confusion.iter().map(|row| row.iter().sum()).collect();
    let predicted_count: Vec<usize> = (0..num_classes).map(|c| confusion.iter().map(|row| row[c]).sum()).collect();

    let per_class = (0..num_classes)
        .map(|c| ClassMetrics {
            precision: ratio(tp[c], predicted_count[c]),
            recall: ratio(tp[c], support[c]),
            f1: ratio(2 * tp[c], predicted_count[c] + support[c]),
            support: support[c],
        })
        .collect();
    // Each weighted term support·num/den is formed with integer numerators,
    // so support·recall collapses to the exact true-positive count.
    let weighted = |num: &dyn Fn(usize) -> usize, den: &dyn Fn(usize) -> usize| {
        let total: f64 = (0..num_classes).map(|c| ratio(support[c] * num(c), den(c))).sum();
        if n == 0 { 0.0 } else { total / n as f64 }
    };
    Ok(EvalReport {
        accuracy: ratio(tp.iter().sum(), n),
        weighted_precision: weighted(&|c| tp[c], &|c| predicted_count[c]),
        weighted_recall: weighted(&|c| tp[c], &|c| support[c]),
        weighted_f1: weighted(&|c| 2 * tp[c], &|c| predicted_count[c] + support[c]),
        confusion,
        per_class,
    })
}

impl EvalReport {
    pub fn num_classes(&self) -> usize {
        self.confusion.len()
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// `key = value` lines; class names label the per-class entries.
    pub fn to_text(&self, class_names: &[String]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "samples = {}", self.total());
        let _ = writeln!(out, "accuracy = {}", self.accuracy);
        let _ = writeln!(out, "weighted_precision = {}", self.weighted_precision);
        let _ = writeln!(out, "weighted_recall = {}", self.weighted_recall);
        let _ = writeln!(out, "weighted_f1 = {}", self.weighted_f1);
        for (c, m) in self.per_class.iter().enumerate() {
            let name = class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
            let _ = writeln!(out, "class.{name}.precision = {}", m.precision);
            let _ = writeln!(out, "class.{name}.recall = {}", m.recall);
            let _ = writeln!(out, "class.{name}.f1 = {}", m.f1);
            let _ = writeln!(out, "class.{name}.support = {}", m.support);
        }
        out
    }

    /// Rows are true classes, columns predictions.
    pub fn confusion_tsv(&self, class_names: &[String]) -> String {
        let name = |c: usize| class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
        let mut out = String::from("true\\predicted");
        for c in 0..self.num_classes() {
            let _ = write!(out, "\t{}", name(c));
        }
        out.push('\n');
        for (t, row) in self.confusion.iter().enumerate() {
            out.push_str(&name(t));
            for v in row {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 2, 2, 1];
        let r = compute_metrics(&y, &y, 3).unwrap();
        assert_eq!(
            (r.accuracy, r.weighted_precision, r.weighted_recall, r.weighted_f1),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn hand_worked_two_class() {
        // confusion [[3, 1], [2, 4]]
        let truth = [0, 0, 0, 0, 1, 1, 1, 1, 1, 1];
        let pred = [0, 0, 0, 1, 0, 0, 1, 1, 1, 1];
        let r = compute_metrics(&truth, &pred, 2).unwrap();
        assert_eq!(r.confusion, vec![vec![3, 1], vec![2, 4]]);
        assert!((r.accuracy - 0.7).abs() < 1e-15);
        let f0 = 2.0 * 0.6 * 0.75 / (0.6 + 0.75);
        let f1 = 2.0 * 0.8 * (4.0 / 6.0) / (0.8 + 4.0 / 6.0);
        assert!((r.per_class[0].f1 - f0).abs() < 1e-12);
        assert!((r.weighted_f1 - (4.0 * f0 + 6.0 * f1) / 10.0).abs() < 1e-12);
        assert!((r.weighted_f1 - 0.703).abs() < 5e-4);
    }

    #[test]
    fn single_predicted_class() {
        let truth = [0, 1, 2, 0, 1, 2];
        let r = compute_metrics(&truth, &[1; 6], 3).unwrap();
        assert!((r.accuracy - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_class[0].precision, 0.0);
        assert_eq!(r.per_class[1].recall, 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(compute_metrics(&[0, 1], &[0], 2).is_err());
        assert!(compute_metrics(&[0, 3], &[0, 1], 2).is_err());
    }

    #[test]
    fn text_outputs() {
        let r = compute_metrics(&[0, 1, 1], &[0, 1, 0], 2).unwrap();
        let names = vec!["A".to_string(), "B".to_string()];
        assert!(r.to_text(&names).contains("class.B.support = 2"));
        assert_eq!(r.confusion_tsv(&names), "true\\predicted\tA\tB\nA\t1\t0\nB\t1\t1\n");
    }

    proptest! {
        #[test]
        fn weighted_recall_is_accuracy(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..200)) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let r = compute_metrics(&t, &p, 5).unwrap();
            prop_assert_eq!(r.weighted_recall, r.accuracy);
            prop_assert_eq!(r.total(), t.len());
            for m in [r.accuracy, r.weighted_precision, r.weighted_f1] {
                prop_assert!((0.0..=1.0).contains(&m));
            }
        }
    }
}
