//! Exhaustive reference search over a finite grid. Test-only in spirit: it
//! shares nothing with the evolutionary search except the distance profile.

use serde::{Deserialize, Serialize};

use super::{Counterexample, DistanceProfile, DomainConstraint, ExampleCase};
use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::schema::ClassLabel;

pub const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OracleOutcome {
    Found { optimum: Counterexample },
    NoCounterfactualInGrid,
}

/// Enumerates every grid point and returns the valid one minimizing
/// (sparsity, proximity). The query itself is never a candidate, and frozen
/// features must keep the query's value.
pub fn brute_force_oracle<C: Classifier + ?Sized>(
    model: &C,
    query: &[f64],
    target: ClassLabel,
    grid: &[Vec<f64>],
    profile: &DistanceProfile,
    constraints: &[Box<dyn DomainConstraint>],
) -> Result<OracleOutcome> {
    if grid.len() != query.len() {
        return Err(Error::RecordShape(format!(
            "grid has {} axes, query has {} features",
            grid.len(),
            query.len()
        )));
    }
    if grid.iter().any(Vec::is_empty) {
        return Err(Error::InvalidConfig("grid axis is empty".into()));
    }
    let points = grid
        .iter()
        .try_fold(1usize, |acc, axis| acc.checked_mul(axis.len()))
        .filter(|&n| n <= MAX_GRID_POINTS)
        .ok_or_else(|| Error::InvalidConfig(format!("grid exceeds {MAX_GRID_POINTS} points")))?;

    let mut digits = vec![0usize; grid.len()];
    let mut point: Vec<f64> = grid.iter().map(|a| a[0]).collect();
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    for _ in 0..points {
        for (j, &d) in digits.iter().enumerate() {
            point[j] = grid[j][d];
        }
        let frozen_ok = (0..query.len())
            .all(|j| profile.is_mutable(j) || !profile.is_changed(j, query[j], point[j]));
        let sparsity = profile.sparsity(query, &point);
        if frozen_ok
            && sparsity > 0
            && constraints.iter().all(|c| c.admits(&point))
            && model.predict_class(&point) == target
        {
            let prox = profile.distance(query, &point);
            let better = match &best {
                None => true,
                Some((s, p, _)) => (sparsity, prox) < (*s, *p),
            };
            if better {
                best = Some((sparsity, prox, point.clone()));
            }
        }
        for j in (0..digits.len()).rev() {
            digits[j] += 1;
            if digits[j] < grid[j].len() {
                break;
            }
            digits[j] = 0;
        }
    }
    Ok(match best {
        None => OracleOutcome::NoCounterfactualInGrid,
        Some((_, _, values)) => OracleOutcome::Found {
            optimum: ExampleCase::build(query, values, "oracle".into(), target, profile),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::FnClassifier;
    use crate::dataset::Record;
    use crate::schema::{DatasetSchema, FeatureKind};
    use crate::stats::FeatureStats;

    fn threshold_setup() -> (DistanceProfile, impl Classifier) {
        let schema = DatasetSchema::from_kinds(&[("x", FeatureKind::Integer)]).unwrap();
        let recs: Vec<Record> = (0..=10).map(|i| Record::new(format!("{i}"), vec![i as f64])).collect();
        let stats = FeatureStats::from_records(&schema, &recs).unwrap();
        let model = FnClassifier(|x: &[f64]| {
            if x[0] > 5.0 {
                [0.0, 1.0, 0.0]
            } else {
                [1.0, 0.0, 0.0]
            }
        });
        (DistanceProfile::new(&schema, &stats).unwrap(), model)
    }

    #[test]
    fn threshold_optimum_by_hand() {
        let (p, m) = threshold_setup();
        let grid = vec![(0..=10).map(f64::from).collect()];
        let out = brute_force_oracle(&m, &[3.0], ClassLabel::HYPERTHYROID, &grid, &p, &[]).unwrap();
        let OracleOutcome::Found { optimum } = out else { panic!("expected optimum") };
        assert_eq!(optimum.candidate.values, [6.0]);
        assert_eq!(optimum.sparsity, 1);
        assert!((optimum.proximity - 0.3).abs() < 1e-15);
        assert_eq!(m.predict_class(&optimum.candidate.values), ClassLabel::HYPERTHYROID);
    }

    #[test]
    fn grid_of_query_only() {
        let (p, m) = threshold_setup();
        let out = brute_force_oracle(&m, &[3.0], ClassLabel::HYPERTHYROID, &[vec![3.0]], &p, &[]).unwrap();
        assert_eq!(out, OracleOutcome::NoCounterfactualInGrid);
    }

    #[test]
    fn frozen_features_are_respected() {
        let (p, m) = threshold_setup();
        let p = p.with_immutable(&["x"]).unwrap();
        let grid = vec![(0..=10).map(f64::from).collect()];
        let out = brute_force_oracle(&m, &[3.0], ClassLabel::HYPERTHYROID, &grid, &p, &[]).unwrap();
        assert_eq!(out, OracleOutcome::NoCounterfactualInGrid);
    }

    #[test]
    fn oversized_grid_rejected() {
        let (p, m) = threshold_setup();
        let _ = p;
        let schema = DatasetSchema::from_kinds(&[
            ("a", FeatureKind::Real),
            ("b", FeatureKind::Real),
        ])
        .unwrap();
        let recs = [Record::new("0", vec![0.0, 0.0]), Record::new("1", vec![1.0, 1.0])];
        let stats = FeatureStats::from_records(&schema, &recs).unwrap();
        let p2 = DistanceProfile::new(&schema, &stats).unwrap();
        let axis: Vec<f64> = (0..2000).map(f64::from).collect();
        let grid = vec![axis.clone(), axis];
        assert!(brute_force_oracle(&m, &[0.0, 0.0], ClassLabel::HYPERTHYROID, &grid, &p2, &[]).is_err());
    }
}
