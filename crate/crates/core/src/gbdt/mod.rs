//! Multi-class gradient-boosted decision trees.
//!
//! Each boosting round fits one regression tree per class to the gradient of
//! the softmax cross-entropy, using second-order (gradient/hessian) split
//! gains and L2-regularized Newton leaf values. Splits are exact greedy over
//! midpoints between consecutive distinct values.

mod metrics;
mod model;
mod tree;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{cross_validate, evaluate, grid_search, CvReport, EvalReport, GridPoint, MeanMetrics};
pub use model::{load_model, save_model, GbdtModel, MODEL_FORMAT, MODEL_VERSION};
pub use tree::{Node, Tree};

use crate::classifier::softmax;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::schema::{ClassLabel, NUM_CLASSES};
use tree::{Columns, GrowParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub subsample_fraction: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_rounds: 100,
            max_depth: 4,
            learning_rate: 0.1,
            min_samples_leaf: 5,
            subsample_fraction: 1.0,
            lambda: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.n_rounds == 0 {
            return bad("n_rounds must be positive");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive");
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return bad("subsample_fraction must be in (0, 1]");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a non-negative number");
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A trained model together with the training loss after each round.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GbdtModel,
    /// Mean cross-entropy on the training set; entry 0 is the prior model.
    pub loss_history: Vec<f64>,
}

pub fn train(data: &LabeledDataset, config: &TrainConfig) -> Result<GbdtModel> {
    train_with_history(data, config).map(|o| o.model)
}

pub fn train_with_history(data: &LabeledDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let counts = data.class_counts();
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        let label = ClassLabel::new(c)?;
        return Err(Error::ClassAbsent(data.schema().class_name(label).to_owned()));
    }

    let n = data.len();
    let rows: Vec<&[f64]> = data.records().iter().map(|r| r.values.as_slice()).collect();
    let cols = Columns::new(&rows, data.schema().len());
    let labels: Vec<usize> = data.labels().iter().map(|l| l.index()).collect();

    let log_prior = counts.map(|c| (c as f64 / n as f64).ln());
    let centre = log_prior.iter().sum::<f64>() / NUM_CLASSES as f64;
    let base_scores = log_prior.map(|l| l - centre);

    let params = GrowParams {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        lambda: config.lambda,
        learning_rate: config.learning_rate,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut scores = vec![base_scores; n];
    let mut trees: Vec<Vec<Tree>> = (0..NUM_CLASSES).map(|_| Vec::with_capacity(config.n_rounds)).collect();
    let mut loss_history = vec![cross_entropy(&scores, &labels)];
    let mut in_bag = vec![true; n];

    for _round in 0..config.n_rounds {
        if config.subsample_fraction < 1.0 {
            for b in in_bag.iter_mut() {
                *b = rng.random::<f64>() < config.subsample_fraction;
            }
        }
        let proba: Vec<[f64; NUM_CLASSES]> = scores.iter().map(softmax).collect();
        let round: Vec<Tree> = (0..NUM_CLASSES)
            .into_par_iter()
            .map(|c| {
                let mut grad = Vec::with_capacity(n);
                let mut hess = Vec::with_capacity(n);
                for (p, &y) in proba.iter().zip(&labels) {
                    let target = if y == c { 1.0 } else { 0.0 };
                    grad.push(p[c] - target);
                    hess.push((p[c] * (1.0 - p[c])).max(1e-16));
                }
                tree::grow(&cols, &grad, &hess, &in_bag, &params)
            })
            .collect();
        for (c, t) in round.into_iter().enumerate() {
            for (s, row) in scores.iter_mut().zip(&rows) {
                s[c] += t.predict(row);
            }
            trees[c].push(t);
        }
        loss_history.push(cross_entropy(&scores, &labels));
    }

    let model = GbdtModel::from_parts(data.schema(), config.clone(), base_scores, trees);
    Ok(TrainOutcome {
        model,
        loss_history,
    })
}

fn cross_entropy(scores: &[[f64; NUM_CLASSES]], labels: &[usize]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(s, &y)| {
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - s[y]
        })
        .sum();
    total / scores.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Classifier;
    use crate::dataset::Record;
    use crate::schema::{DatasetSchema, FeatureKind};

    /// Three well separated clusters along x; y is noise.
    fn separable(n_per_class: usize) -> LabeledDataset {
        let schema =
            DatasetSchema::from_kinds(&[("x", FeatureKind::Real), ("y", FeatureKind::Real)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut records = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3 {
            for _ in 0..n_per_class {
                let x = c as f64 * 10.0 + rng.random::<f64>() * 3.0;
                let y = rng.random::<f64>();
                records.push(Record::new(format!("r{}", records.len()), vec![x, y]));
                labels.push(ClassLabel::new(c).unwrap());
            }
        }
        LabeledDataset::new(schema, records, labels).unwrap()
    }

    fn small_config(rounds: usize) -> TrainConfig {
        TrainConfig {
            n_rounds: rounds,
            min_samples_leaf: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let d = separable(30);
        let m = train(&d, &small_config(20)).unwrap();
        let report = evaluate(&m, &d).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(m.n_rounds(), 20);
    }

    #[test]
    fn training_is_deterministic() {
        let d = separable(20);
        let cfg = TrainConfig {
            subsample_fraction: 0.7,
            seed: 11,
            ..small_config(15)
        };
        let a = train(&d, &cfg).unwrap().to_bytes();
        let b = train(&d, &cfg).unwrap().to_bytes();
        assert_eq!(a, b);
        let c = train(&d, &TrainConfig { seed: 12, ..cfg }).unwrap().to_bytes();
        assert_ne!(a, c);
    }

    #[test]
    fn loss_never_increases() {
        let d = separable(25);
        let out = train_with_history(&d, &small_config(40)).unwrap();
        assert_eq!(out.loss_history.len(), 41);
        for w in out.loss_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn balanced_prior_model_is_uniform() {
        let d = separable(4);
        let cfg = small_config(1);
        let m = train(&d, &cfg).unwrap();
        assert_eq!(m.base_scores(), [0.0; 3]);
        let prior = GbdtModel::constant(d.schema(), m.base_scores());
        let p = prior.predict_proba(&[1.0, 2.0]);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn absent_class_is_rejected() {
        let d = separable(5);
        let idx: Vec<usize> = (0..10).collect();
        let two_classes = d.subset(&idx);
        assert!(matches!(
            train(&two_classes, &small_config(3)),
            Err(Error::ClassAbsent(_))
        ));
    }

    #[test]
    fn config_validation() {
        for cfg in [
            TrainConfig { n_rounds: 0, ..Default::default() },
            TrainConfig { max_depth: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { learning_rate: 1.5, ..Default::default() },
            TrainConfig { subsample_fraction: 0.0, ..Default::default() },
            TrainConfig { min_samples_leaf: 0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        let parsed = TrainConfig::from_toml("n_rounds = 50\nmax_depth = 3\n").unwrap();
        assert_eq!(parsed.n_rounds, 50);
        assert_eq!(parsed.learning_rate, 0.1);
        assert!(TrainConfig::from_toml("rounds = 5").is_err());
    }

    #[test]
    fn far_class_one_record_is_class_one() {
        let d = separable(30);
        let m = train(&d, &small_config(20)).unwrap();
        // class-1 cluster occupies x in [10, 13]
        assert_eq!(m.predict_class(&[11.5, 0.5]), ClassLabel::HYPERTHYROID);
    }
}
