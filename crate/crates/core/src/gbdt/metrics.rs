//! Evaluation metrics, cross-validation and a small hyper-parameter grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, TrainConfig};
use crate::classifier::Classifier;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::schema::NUM_CLASSES;
use crate::split::kfold_indices;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: [f64; NUM_CLASSES],
    pub recall: [f64; NUM_CLASSES],
    pub f1: [f64; NUM_CLASSES],
    /// `confusion[true][predicted]`
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

impl EvalReport {
    pub fn from_confusion(confusion: [[usize; NUM_CLASSES]; NUM_CLASSES]) -> Self {
        let total: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..NUM_CLASSES).map(|c| confusion[c][c]).sum();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let mut precision = [0.0; NUM_CLASSES];
        let mut recall = [0.0; NUM_CLASSES];
        let mut f1 = [0.0; NUM_CLASSES];
        for c in 0..NUM_CLASSES {
            let predicted: usize = (0..NUM_CLASSES).map(|t| confusion[t][c]).sum();
            let actual: usize = confusion[c].iter().sum();
            precision[c] = ratio(confusion[c][c], predicted);
            recall[c] = ratio(confusion[c][c], actual);
            let (p, r) = (precision[c], recall[c]);
            f1[c] = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        }
        EvalReport {
            accuracy: ratio(correct, total),
            precision,
            recall,
            f1,
            confusion,
        }
    }
}

pub fn evaluate<C: Classifier + ?Sized>(model: &C, test: &LabeledDataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    for (record, label) in test.iter() {
        let predicted = model.predict_class(&record.values);
        confusion[label.index()][predicted.index()] += 1;
    }
    Ok(EvalReport::from_confusion(confusion))
}

/// Unweighted means over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub precision: [f64; NUM_CLASSES],
    pub recall: [f64; NUM_CLASSES],
    pub f1: [f64; NUM_CLASSES],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<EvalReport>,
    pub mean: MeanMetrics,
}

pub fn cross_validate(
    data: &LabeledDataset,
    config: &TrainConfig,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    config.validate()?;
    let folds = kfold_indices(data, k, seed)?;
    let reports = folds
        .par_iter()
        .map(|fold| {
            let model = train(&data.subset(&fold.train), config)?;
            evaluate(&model, &data.subset(&fold.validation))
        })
        .collect::<Result<Vec<_>>>()?;
    let kf = reports.len() as f64;
    let mean_of = |get: &dyn Fn(&EvalReport) -> [f64; NUM_CLASSES]| {
        let mut m = [0.0; NUM_CLASSES];
        for r in &reports {
            for (acc, v) in m.iter_mut().zip(get(r)) {
                *acc += v / kf;
            }
        }
        m
    };
    let mean = MeanMetrics {
        accuracy: reports.iter().map(|r| r.accuracy).sum::<f64>() / kf,
        precision: mean_of(&|r| r.precision),
        recall: mean_of(&|r| r.recall),
        f1: mean_of(&|r| r.f1),
    };
    Ok(CvReport {
        k,
        seed,
        folds: reports,
        mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub config: TrainConfig,
    pub mean_accuracy: f64,
    pub mean_f1: f64,
}

/// Scores every (max_depth, learning_rate) pair by k-fold CV and returns all
/// points, best first (macro F1, then accuracy; earlier grid order wins ties).
pub fn grid_search(
    data: &LabeledDataset,
    base: &TrainConfig,
    depths: &[usize],
    learning_rates: &[f64],
    k: usize,
    seed: u64,
) -> Result<Vec<GridPoint>> {
    let mut points = Vec::new();
    for &max_depth in depths {
        for &learning_rate in learning_rates {
            let config = TrainConfig {
                max_depth,
                learning_rate,
                ..base.clone()
            };
            let cv = cross_validate(data, &config, k, seed)?;
            points.push(GridPoint {
                mean_f1: cv.mean.f1.iter().sum::<f64>() / NUM_CLASSES as f64,
                mean_accuracy: cv.mean.accuracy,
                config,
            });
        }
    }
    points.sort_by(|a, b| {
        b.mean_f1
            .total_cmp(&a.mean_f1)
            .then(b.mean_accuracy.total_cmp(&a.mean_accuracy))
    });
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::FnClassifier;
    use crate::dataset::Record;
    use crate::schema::{ClassLabel, DatasetSchema, FeatureKind};

    fn fixture() -> LabeledDataset {
        let schema = DatasetSchema::from_kinds(&[("x", FeatureKind::Real)]).unwrap();
        let records = (0..6).map(|i| Record::new(format!("r{i}"), vec![(i % 3) as f64])).collect();
        let labels = (0..6).map(|i| ClassLabel::new(i % 3).unwrap()).collect();
        LabeledDataset::new(schema, records, labels).unwrap()
    }

    fn one_hot(c: usize) -> [f64; 3] {
        let mut p = [0.0; 3];
        p[c] = 1.0;
        p
    }

    #[test]
    fn perfect_predictions() {
        let m = FnClassifier(|x: &[f64]| one_hot(x[0] as usize));
        let r = evaluate(&m, &fixture()).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.f1, [1.0; 3]);
    }

    #[test]
    fn all_wrong_predictions() {
        let m = FnClassifier(|x: &[f64]| one_hot((x[0] as usize + 1) % 3));
        let r = evaluate(&m, &fixture()).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.f1, [0.0; 3]);
    }

    #[test]
    fn metric_identities_hold() {
        let r = EvalReport::from_confusion([[50, 3, 2], [4, 20, 1], [6, 0, 9]]);
        let trace = 79.0;
        assert!((r.accuracy - trace / 95.0).abs() < 1e-15);
        assert!((r.precision[0] - 50.0 / 60.0).abs() < 1e-15);
        assert!((r.recall[2] - 9.0 / 15.0).abs() < 1e-15);
        for c in 0..3 {
            let (p, q) = (r.precision[c], r.recall[c]);
            assert!((r.f1[c] - 2.0 * p * q / (p + q)).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_test_set() {
        let m = FnClassifier(|_: &[f64]| one_hot(0));
        assert!(evaluate(&m, &fixture().subset(&[])).is_err());
    }
}
