//! Stratified train/test splits and k-fold partitions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

fn shuffled_classes(data: &LabeledDataset, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    data.class_indices()
        .into_iter()
        .map(|mut idx| {
            idx.shuffle(&mut rng);
            idx
        })
        .collect()
}

/// Splits each class so that `round(test_fraction * class_count)` of its
/// records land in the test set.
pub fn stratified_split(
    data: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let counts = data.class_counts();
    if let Some((c, n)) = counts.iter().enumerate().find(|(_, &n)| n < 2) {
        return Err(Error::Split(format!(
            "class {c} has {n} record(s), at least 2 required"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for idx in shuffled_classes(data, seed) {
        let n_test = ((idx.len() as f64) * test_fraction).round() as usize;
        let n_test = n_test.clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

/// Stratified k-fold partition. Records are dealt round-robin class after
/// class, so fold sizes differ by at most one and each class is spread
/// evenly.
pub fn kfold_indices(data: &LabeledDataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Split(format!("k = {k}, need k >= 2")));
    }
    let counts = data.class_counts();
    if let Some((c, n)) = counts.iter().enumerate().find(|(_, &n)| n < k) {
        return Err(Error::Split(format!(
            "class {c} has {n} record(s), fewer than k = {k}"
        )));
    }
    let mut buckets = vec![Vec::new(); k];
    let mut slot = 0;
    for idx in shuffled_classes(data, seed) {
        for i in idx {
            buckets[slot % k].push(i);
            slot += 1;
        }
    }
    let n = data.len();
    Ok(buckets
        .into_iter()
        .map(|mut validation| {
            validation.sort_unstable();
            let mut in_val = vec![false; n];
            for &i in &validation {
                in_val[i] = true;
            }
            let train = (0..n).filter(|&i| !in_val[i]).collect();
            Fold { train, validation }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Record;
    use crate::schema::{ClassLabel, DatasetSchema, FeatureKind};

    fn dataset(counts: [usize; 3]) -> LabeledDataset {
        let schema = DatasetSchema::from_kinds(&[("x", FeatureKind::Real)]).unwrap();
        let mut records = Vec::new();
        let mut labels = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                records.push(Record::new(format!("r{}", records.len()), vec![c as f64]));
                labels.push(ClassLabel::new(c).unwrap());
            }
        }
        LabeledDataset::new(schema, records, labels).unwrap()
    }

    #[test]
    fn thyroid_sized_split() {
        let d = dataset([6385, 582, 175]);
        let (train, test) = stratified_split(&d, 0.2, 1).unwrap();
        assert!((test.len() as i64 - 1428).abs() <= 2, "{}", test.len());
        assert!((test.class_counts()[2] as i64 - 35).abs() <= 1);
        assert_eq!(train.len() + test.len(), d.len());
        for (c, &n) in d.class_counts().iter().enumerate() {
            let expect = 0.2 * n as f64;
            assert!((test.class_counts()[c] as f64 - expect).abs() <= 1.0);
        }
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let d = dataset([50, 20, 10]);
        let (a_train, a_test) = stratified_split(&d, 0.2, 9).unwrap();
        let (b_train, b_test) = stratified_split(&d, 0.2, 9).unwrap();
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
        let ids: std::collections::HashSet<_> = a_train.records().iter().map(|r| &r.id).collect();
        assert!(a_test.records().iter().all(|r| !ids.contains(&r.id)));
        let (_, c_test) = stratified_split(&d, 0.2, 10).unwrap();
        assert_ne!(a_test, c_test);
    }

    #[test]
    fn split_rejects_singleton_class() {
        assert!(stratified_split(&dataset([10, 10, 1]), 0.2, 0).is_err());
        assert!(stratified_split(&dataset([10, 10, 10]), 1.0, 0).is_err());
    }

    #[test]
    fn ten_folds_of_thyroid_size() {
        let d = dataset([6385, 582, 175]);
        let folds = kfold_indices(&d, 10, 3).unwrap();
        assert_eq!(folds.len(), 10);
        let mut seen = vec![0u8; d.len()];
        for f in &folds {
            assert!(f.validation.len() == 714 || f.validation.len() == 715);
            assert_eq!(f.train.len() + f.validation.len(), d.len());
            for &i in &f.validation {
                seen[i] += 1;
            }
            let hypo = f.validation.iter().filter(|&&i| d.labels()[i].index() == 2).count();
            assert!(hypo == 17 || hypo == 18, "{hypo}");
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn two_folds_minimal() {
        let d = dataset([2, 2, 2]);
        let folds = kfold_indices(&d, 2, 0).unwrap();
        assert_eq!(folds[0].validation.len(), 3);
        assert_eq!(folds[1].validation.len(), 3);
        assert!(folds[0].validation.iter().all(|i| !folds[1].validation.contains(i)));
    }

    #[test]
    fn kfold_errors() {
        assert!(kfold_indices(&dataset([20, 20, 5]), 10, 0).is_err());
        assert!(kfold_indices(&dataset([20, 20, 20]), 1, 0).is_err());
    }
}
