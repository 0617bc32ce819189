//! Small problems with a finite grid on which the exact optimum can be
//! enumerated. Used to check the search against [`brute_force_oracle`].

use serde::{Deserialize, Serialize};

use super::{brute_force_oracle, generate_counterexamples, CfConfig, DistanceProfile, ExampleCase, OracleOutcome};
use crate::classifier::{softmax, Classifier, FnClassifier, Proba};
use crate::dataset::{LabeledDataset, Record};
use crate::error::Result;
use crate::gbdt::{train, TrainConfig};
use crate::schema::{ClassLabel, DatasetSchema, FeatureKind};
use crate::stats::FeatureStats;

pub type BoxedClassifier = Box<dyn Classifier + Send + Sync>;

pub struct ToyProblem {
    pub name: &'static str,
    pub schema: DatasetSchema,
    pub model: BoxedClassifier,
    pub query: Vec<f64>,
    pub target: ClassLabel,
    /// One axis of admissible values per feature.
    pub grid: Vec<Vec<f64>>,
    /// Every grid point, labeled by the model.
    pub data: LabeledDataset,
}

impl ToyProblem {
    fn new(
        name: &'static str,
        features: &[(&str, FeatureKind)],
        model: BoxedClassifier,
        query: Vec<f64>,
        target: ClassLabel,
        grid: Vec<Vec<f64>>,
    ) -> Self {
        let schema = DatasetSchema::from_kinds(features).expect("toy schema is valid");
        let points = cartesian(&grid);
        let labels = points.iter().map(|p| model.predict_class(p)).collect();
        let records = points
            .into_iter()
            .enumerate()
            .map(|(i, p)| Record::new(format!("g{i}"), p))
            .collect();
        let data = LabeledDataset::new(schema.clone(), records, labels).expect("toy data is valid");
        ToyProblem {
            name,
            schema,
            model,
            query,
            target,
            grid,
            data,
        }
    }

    pub fn query_record(&self) -> Record {
        Record::new("query", self.query.clone())
    }

    pub fn profile(&self) -> DistanceProfile {
        let stats = FeatureStats::from_records(&self.schema, self.data.records()).expect("toy data is non-empty");
        DistanceProfile::new(&self.schema, &stats).expect("stats match schema")
    }

    pub fn oracle(&self) -> Result<OracleOutcome> {
        brute_force_oracle(&*self.model, &self.query, self.target, &self.grid, &self.profile(), &[])
    }
}

fn cartesian(grid: &[Vec<f64>]) -> Vec<Vec<f64>> {
    grid.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

fn ints(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(f64::from).collect()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Probability mass split between `yes` and `no` by a signed margin.
fn binary(margin: f64, yes: usize, no: usize) -> Proba {
    let mut p = [0.0; 3];
    let s = sigmoid(2.0 * margin);
    p[yes] = s;
    p[no] = 1.0 - s;
    p
}

/// One integer feature; class 1 when x > 5.
pub fn threshold() -> ToyProblem {
    ToyProblem::new(
        "threshold",
        &[("x", FeatureKind::Integer)],
        Box::new(FnClassifier(|v: &[f64]| binary(v[0] - 5.5, 1, 0))),
        vec![3.0],
        ClassLabel::HYPERTHYROID,
        vec![ints(0, 10)],
    )
}

/// Class 1 inside the box x >= 6, y >= 4.
pub fn boxed() -> ToyProblem {
    ToyProblem::new(
        "box",
        &[("x", FeatureKind::Integer), ("y", FeatureKind::Integer)],
        Box::new(FnClassifier(|v: &[f64]| binary((v[0] - 5.5).min(v[1] - 3.5), 1, 0))),
        vec![2.0, 1.0],
        ClassLabel::HYPERTHYROID,
        vec![ints(0, 10), ints(0, 10)],
    )
}

/// Three bands of a + b + 2c: below 10, 10 to 14, 15 and above.
pub fn weighted_sum() -> ToyProblem {
    ToyProblem::new(
        "weighted-sum",
        &[
            ("a", FeatureKind::Integer),
            ("b", FeatureKind::Integer),
            ("c", FeatureKind::Integer),
        ],
        Box::new(FnClassifier(|v: &[f64]| {
            let s = v[0] + v[1] + 2.0 * v[2];
            softmax(&[7.0, 12.0, 17.0].map(|c: f64| -(s - c).abs()))
        })),
        vec![1.0, 2.0, 1.0],
        ClassLabel::HYPOTHYROID,
        vec![ints(0, 9), ints(0, 9), ints(0, 9)],
    )
}

/// A boolean gate: class 2 when f and x >= 7, class 1 when not f and y >= 8.
pub fn mixed() -> ToyProblem {
    ToyProblem::new(
        "mixed",
        &[
            ("f", FeatureKind::Boolean),
            ("x", FeatureKind::Integer),
            ("y", FeatureKind::Integer),
        ],
        Box::new(FnClassifier(|v: &[f64]| {
            let class = if v[0] == 1.0 && v[1] >= 7.0 {
                2
            } else if v[0] == 0.0 && v[2] >= 8.0 {
                1
            } else {
                0
            };
            let mut p = [0.15; 3];
            p[class] = 0.7;
            p
        })),
        vec![0.0, 2.0, 3.0],
        ClassLabel::HYPOTHYROID,
        vec![vec![0.0, 1.0], ints(0, 10), ints(0, 10)],
    )
}

/// A small boosted model trained on bands of a + b + c over 0..=7.
pub fn gbdt() -> ToyProblem {
    let features = [
        ("a", FeatureKind::Integer),
        ("b", FeatureKind::Integer),
        ("c", FeatureKind::Integer),
    ];
    let grid = vec![ints(0, 7), ints(0, 7), ints(0, 7)];
    let schema = DatasetSchema::from_kinds(&features).expect("toy schema is valid");
    let points = cartesian(&grid);
    let labels = points
        .iter()
        .map(|p| {
            let s: f64 = p.iter().sum();
            ClassLabel::new(if s < 8.0 { 0 } else if s < 14.0 { 1 } else { 2 }).expect("valid")
        })
        .collect();
    let records = points
        .into_iter()
        .enumerate()
        .map(|(i, p)| Record::new(format!("t{i}"), p))
        .collect();
    let train_data = LabeledDataset::new(schema, records, labels).expect("toy data is valid");
    let config = TrainConfig {
        n_rounds: 40,
        max_depth: 3,
        learning_rate: 0.3,
        min_samples_leaf: 2,
        ..TrainConfig::default()
    };
    let model = train(&train_data, &config).expect("toy training succeeds");
    ToyProblem::new(
        "gbdt",
        &features,
        Box::new(model),
        vec![1.0, 2.0, 1.0],
        ClassLabel::HYPOTHYROID,
        grid,
    )
}

/// A target class the model never predicts.
pub fn infeasible() -> ToyProblem {
    let mut toy = threshold();
    toy.name = "infeasible";
    toy.target = ClassLabel::HYPOTHYROID;
    toy
}

/// The feasible toys, in a fixed order.
pub fn all() -> Vec<ToyProblem> {
    vec![threshold(), boxed(), weighted_sum(), mixed(), gbdt()]
}

pub fn by_name(name: &str) -> Option<ToyProblem> {
    match name {
        "threshold" => Some(threshold()),
        "box" => Some(boxed()),
        "weighted-sum" => Some(weighted_sum()),
        "mixed" => Some(mixed()),
        "gbdt" => Some(gbdt()),
        "infeasible" => Some(infeasible()),
        _ => None,
    }
}

pub const NAMES: [&str; 6] = ["threshold", "box", "weighted-sum", "mixed", "gbdt", "infeasible"];

/// Largest accepted ratio of search proximity to the exact optimum.
pub const MAX_PROXIMITY_RATIO: f64 = 1.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRun {
    pub seed: u64,
    pub proximity: Option<f64>,
    pub sparsity: Option<usize>,
    /// Search proximity over the optimum; absent when the search found
    /// nothing, which counts as an infinite ratio.
    pub ratio: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub toy: String,
    pub optimum: Option<ExampleCase>,
    pub runs: Vec<OracleRun>,
    pub pass: bool,
}

/// Compares the search against the exact optimum for each seed. A toy with
/// no feasible point passes vacuously.
pub fn oracle_check(toy: &ToyProblem, seeds: &[u64], base: &CfConfig) -> Result<OracleCheck> {
    let optimum = match toy.oracle()? {
        OracleOutcome::Found { optimum } => optimum,
        OracleOutcome::NoCounterfactualInGrid => {
            return Ok(OracleCheck {
                toy: toy.name.to_owned(),
                optimum: None,
                runs: Vec::new(),
                pass: true,
            })
        }
    };
    let profile = toy.profile();
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cfg = CfConfig {
            target_class: toy.target,
            seed,
            ..base.clone()
        };
        let out = generate_counterexamples(&*toy.model, &toy.query_record(), &cfg, &profile, &toy.data)?;
        let run = match out.cases.first() {
            None => OracleRun {
                seed,
                proximity: None,
                sparsity: None,
                ratio: None,
                pass: false,
            },
            Some(best) => {
                let ratio = best.proximity / optimum.proximity;
                OracleRun {
                    seed,
                    proximity: Some(best.proximity),
                    sparsity: Some(best.sparsity),
                    ratio: Some(ratio),
                    pass: ratio <= MAX_PROXIMITY_RATIO && best.sparsity <= optimum.sparsity + 1,
                }
            }
        };
        runs.push(run);
    }
    Ok(OracleCheck {
        toy: toy.name.to_owned(),
        pass: runs.iter().all(|r| r.pass),
        optimum: Some(optimum),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimum(toy: &ToyProblem) -> Vec<f64> {
        match toy.oracle().unwrap() {
            OracleOutcome::Found { optimum } => optimum.candidate.values,
            OracleOutcome::NoCounterfactualInGrid => panic!("{} has no optimum", toy.name),
        }
    }

    #[test]
    fn hand_derived_optima() {
        assert_eq!(optimum(&threshold()), [6.0]);
        assert_eq!(optimum(&boxed()), [6.0, 4.0]);
        assert_eq!(optimum(&weighted_sum()), [1.0, 2.0, 6.0]);
        assert_eq!(optimum(&mixed()), [1.0, 7.0, 3.0]);
    }

    #[test]
    fn gbdt_toy_is_feasible_and_query_is_not_target() {
        let toy = gbdt();
        assert_ne!(toy.model.predict_class(&toy.query), toy.target);
        let opt = optimum(&toy);
        assert_eq!(toy.model.predict_class(&opt), toy.target);
    }

    #[test]
    fn infeasible_has_no_optimum() {
        assert_eq!(infeasible().oracle().unwrap(), OracleOutcome::NoCounterfactualInGrid);
    }

    #[test]
    fn check_passes_and_negative_control_fails() {
        let base = CfConfig::default();
        let ok = oracle_check(&threshold(), &[0, 1], &base).unwrap();
        assert!(ok.pass);
        assert_eq!(ok.runs[0].ratio, Some(1.0));
        assert!(oracle_check(&infeasible(), &[0], &base).unwrap().pass);
        let broken = CfConfig {
            generations: 0,
            ..base
        };
        let bad = oracle_check(&threshold(), &[0], &broken).unwrap();
        assert!(!bad.pass);
        assert_eq!(bad.runs[0].ratio, None);
    }

    #[test]
    fn names_resolve() {
        for n in NAMES {
            assert_eq!(by_name(n).unwrap().name, n);
        }
        assert!(by_name("nope").is_none());
    }
}
