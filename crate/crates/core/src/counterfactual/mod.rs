//! Example-based explanations: counterexamples predicted as a chosen
//! alternate class, and similar cases kept in the hypothesis class, both as
//! close to the query record as the search can find.

mod distance;
mod diversity;
mod oracle;
mod search;
pub mod toys;

use serde::{Deserialize, Serialize};

pub use distance::{DistanceProfile, CHANGE_EPSILON};
pub use diversity::diversity_select;
pub use oracle::{brute_force_oracle, OracleOutcome, MAX_GRID_POINTS};
pub use search::{generate_counterexamples, generate_similar_cases, generate_similar_cases_with};

use crate::classifier::Classifier;
use crate::dataset::Record;
use crate::error::{Error, Result};
use crate::schema::{ClassLabel, DatasetSchema};

/// Upper bound on requested explanations per kind.
pub const MAX_EXPLANATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureChange {
    pub name: String,
    pub old: f64,
    pub new: f64,
}

/// A synthesized record near the query together with its re-predicted class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleCase {
    pub candidate: Record,
    pub predicted_class: ClassLabel,
    pub changed_features: Vec<FeatureChange>,
    pub proximity: f64,
    pub sparsity: usize,
}

pub type Counterexample = ExampleCase;
pub type SimilarCase = ExampleCase;

impl ExampleCase {
    pub(crate) fn build(
        query: &[f64],
        values: Vec<f64>,
        id: String,
        predicted_class: ClassLabel,
        profile: &DistanceProfile,
    ) -> Self {
        let changed = profile.changed(query, &values);
        let changed_features = changed
            .iter()
            .map(|&j| FeatureChange {
                name: profile.name(j).to_owned(),
                old: query[j],
                new: values[j],
            })
            .collect();
        ExampleCase {
            proximity: profile.distance(query, &values),
            sparsity: changed.len(),
            changed_features,
            predicted_class,
            candidate: Record::new(id, values),
        }
    }

    /// Lexicographic (sparsity, proximity) order, best first.
    pub fn rank_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sparsity
            .cmp(&other.sparsity)
            .then(self.proximity.total_cmp(&other.proximity))
    }
}

/// Result of a search: at most `requested` cases, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub cases: Vec<ExampleCase>,
    pub requested: usize,
    /// Set when fewer than `requested` valid cases were found.
    pub budget_exhausted: bool,
}

impl SearchOutcome {
    pub(crate) fn empty(requested: usize) -> Self {
        SearchOutcome {
            cases: Vec::new(),
            requested,
            budget_exhausted: requested > 0,
        }
    }
}

/// Rejects clinically impossible candidates.
pub trait DomainConstraint: Send + Sync {
    fn name(&self) -> &str;
    fn admits(&self, values: &[f64]) -> bool;
}

/// No male patient may be pregnant. Expects `sex` with 1 = male.
#[derive(Debug, Clone)]
pub struct SexPregnancy {
    sex: usize,
    pregnant: usize,
}

impl SexPregnancy {
    pub fn for_schema(schema: &DatasetSchema) -> Option<Self> {
        Some(SexPregnancy {
            sex: schema.index_of("sex")?,
            pregnant: schema.index_of("pregnant")?,
        })
    }
}

impl DomainConstraint for SexPregnancy {
    fn name(&self) -> &str {
        "sex_pregnancy"
    }

    fn admits(&self, values: &[f64]) -> bool {
        !(values[self.sex] == 1.0 && values[self.pregnant] == 1.0)
    }
}

pub type Constraints = Vec<Box<dyn DomainConstraint>>;

/// Default constraint hooks for a schema.
pub fn default_constraints(schema: &DatasetSchema) -> Constraints {
    let mut out: Constraints = Vec::new();
    if let Some(c) = SexPregnancy::for_schema(schema) {
        out.push(Box::new(c));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CfConfig {
    pub target_class: ClassLabel,
    pub k: usize,
    pub population_size: usize,
    /// Generations of evaluation, the initial population included. Zero
    /// disables the search.
    pub generations: usize,
    /// Added to proximity per changed feature while evolving.
    pub sparsity_pressure: f64,
    pub seed: u64,
    pub immutable_features: Vec<String>,
    /// Apply [`default_constraints`].
    pub domain_constraints: bool,
}

impl Default for CfConfig {
    fn default() -> Self {
        CfConfig {
            target_class: ClassLabel::NEGATIVE,
            k: 3,
            population_size: 200,
            generations: 50,
            sparsity_pressure: 0.02,
            seed: 0,
            immutable_features: Vec::new(),
            domain_constraints: true,
        }
    }
}

impl CfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k > MAX_EXPLANATIONS {
            return Err(Error::InvalidCount(format!(
                "k = {} exceeds {MAX_EXPLANATIONS}",
                self.k
            )));
        }
        if self.population_size < 2 {
            return Err(Error::InvalidConfig("population_size must be at least 2".into()));
        }
        if !(self.sparsity_pressure >= 0.0 && self.sparsity_pressure.is_finite()) {
            return Err(Error::InvalidConfig("sparsity_pressure must be >= 0".into()));
        }
        Ok(())
    }
}

/// Whether `values` is an admissible answer for `target`.
pub(crate) struct Validity<'a, C: ?Sized> {
    pub model: &'a C,
    pub target: ClassLabel,
    pub constraints: &'a [Box<dyn DomainConstraint>],
}

impl<C: Classifier + ?Sized> Validity<'_, C> {
    pub fn check(&self, values: &[f64]) -> bool {
        self.constraints.iter().all(|c| c.admits(values))
            && self.model.predict_class(values) == self.target
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sex_pregnancy_hook() {
        let schema = DatasetSchema::thyroid();
        let hook = SexPregnancy::for_schema(&schema).unwrap();
        let mut v = vec![0.0; 20];
        v[1] = 1.0;
        assert!(hook.admits(&v));
        v[5] = 1.0;
        assert!(!hook.admits(&v));
        v[1] = 0.0;
        assert!(hook.admits(&v));
        assert_eq!(default_constraints(&schema).len(), 1);
    }

    #[test]
    fn k_bound() {
        let cfg = CfConfig {
            k: 11,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidCount(_))));
        assert!(CfConfig::default().validate().is_ok());
    }
}
