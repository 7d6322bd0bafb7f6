//! Stratified k-fold assignment.

use crate::error::{Error, Result};
use crate::numerics::RngState;

/// `k` disjoint folds of sample indices covering every sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    pub folds: Vec<Vec<usize>>,
}

/// Index sets of one cross-validation round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldRound {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Round `r`: fold `r` is the test set, fold `(r + 1) % k` the validation
    /// set, the rest is training data. Indices are sorted.
    pub fn round(&self, r: usize) -> FoldRound {
        let k = self.k();
        let val = (r + 1) % k;
        let mut train: Vec<usize> = (0..k)
            .filter(|&f| f != r && f != val)
            .flat_map(|f| self.folds[f].iter().copied())
            .collect();
        train.sort_unstable();
        let sorted = |v: &Vec<usize>| {
            let mut v = v.clone();
            v.sort_unstable();
            v
        };
        FoldRound {
            train,
            validation: sorted(&self.folds[val]),
            test: sorted(&self.folds[r]),
        }
    }
}

/// Shuffle each class independently, then deal its members round-robin over
/// the folds. The dealing position carries over from one class to the next so
/// fold sizes stay balanced overall.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 3 {
        return Err(Error::Config(format!(
            "k must be at least 3 (test, validation and training folds), got {k}"
        )));
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut members = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    for (class, m) in members.iter().enumerate() {
        if !m.is_empty() && m.len() < k {
            return Err(Error::ClassTooSmall {
                class,
                count: m.len(),
                k,
            });
        }
    }
    let mut rng = RngState::new(seed).derive(0x5f01d);
    let mut folds = vec![Vec::new(); k];
    let mut pos = 0;
    for mut m in members {
        rng.shuffle(&mut m);
        for i in m {
            folds[pos % k].push(i);
            pos += 1;
        }
    }
    Ok(FoldSplit { folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn class_counts(split: &FoldSplit, labels: &[usize], class: usize) -> Vec<usize> {
        split
            .folds
            .iter()
            .map(|f| f.iter().filter(|&&i| labels[i] == class).count())
            .collect()
    }

    #[test]
    fn exact_division() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let s = stratified_kfold(&labels, 10, 1).unwrap();
        for c in 0..2 {
            assert_eq!(class_counts(&s, &labels, c), vec![5; 10]);
        }
    }

    #[test]
    fn remainder_goes_to_first_fold() {
        let labels = vec![0; 11];
        let s = stratified_kfold(&labels, 10, 1).unwrap();
        let mut expected = vec![1; 10];
        expected[0] = 2;
        assert_eq!(class_counts(&s, &labels, 0), expected);
    }

    #[test]
    fn seeds() {
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        assert_eq!(stratified_kfold(&labels, 5, 4).unwrap(), stratified_kfold(&labels, 5, 4).unwrap());
        assert_ne!(stratified_kfold(&labels, 5, 4).unwrap(), stratified_kfold(&labels, 5, 5).unwrap());
    }

    #[test]
    fn small_class_rejected() {
        let mut labels = vec![0; 20];
        labels.extend([1; 4]);
        assert!(matches!(
            stratified_kfold(&labels, 5, 0),
            Err(Error::ClassTooSmall { class: 1, count: 4, k: 5 })
        ));
        assert!(stratified_kfold(&labels, 2, 0).is_err());
    }

    #[test]
    fn rounds_assign_roles() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let s = stratified_kfold(&labels, 5, 2).unwrap();
        let r = s.round(4);
        let mut test = s.folds[4].clone();
        test.sort_unstable();
        let mut val = s.folds[0].clone();
        val.sort_unstable();
        assert_eq!(r.test, test);
        assert_eq!(r.validation, val);
        assert_eq!(r.train.len(), 18);
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance(sizes in prop::collection::vec(5usize..40, 1..8), k in 3usize..6, seed in any::<u64>()) {
            let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
            let s = stratified_kfold(&labels, k, seed).unwrap();
            let mut all: Vec<usize> = s.folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for c in 0..sizes.len() {
                let counts = class_counts(&s, &labels, c);
                prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
            }
            for r in 0..k {
                let round = s.round(r);
                prop_assert_eq!(round.train.len() + round.validation.len() + round.test.len(), labels.len());
            }
        }
    }
}
