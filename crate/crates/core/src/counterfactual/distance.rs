use serde::{Deserialize, Serialize};

use crate::dataset::Record;
use crate::error::{Error, Result};
use crate::schema::{DatasetSchema, FeatureKind};
use crate::stats::FeatureStats;

/// Relative change below which a continuous feature counts as unchanged.
pub const CHANGE_EPSILON: f64 = 1e-9;

/// Per-feature normalization and mutability derived from training stats.
///
/// Continuous features are scaled by their observed range, booleans by 1.
/// Features with zero range are out of scope: they never contribute to the
/// distance and are frozen during search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    names: Vec<String>,
    kinds: Vec<FeatureKind>,
    scale: Vec<f64>,
    min: Vec<f64>,
    max: Vec<f64>,
    mutable: Vec<bool>,
    in_scope: usize,
}

impl DistanceProfile {
    pub fn new(schema: &DatasetSchema, stats: &FeatureStats) -> Result<Self> {
        if stats.len() != schema.len() {
            return Err(Error::RecordShape(format!(
                "stats cover {} features, schema has {}",
                stats.len(),
                schema.len()
            )));
        }
        let mut scale = Vec::with_capacity(schema.len());
        let mut mutable = Vec::with_capacity(schema.len());
        for (spec, st) in schema.features().iter().zip(&stats.features) {
            let s = if st.range() > 0.0 {
                match spec.kind {
                    FeatureKind::Boolean => 1.0,
                    _ => st.range(),
                }
            } else {
                0.0
            };
            scale.push(s);
            mutable.push(spec.mutable && s > 0.0);
        }
        let in_scope = scale.iter().filter(|&&s| s > 0.0).count();
        Ok(DistanceProfile {
            names: schema.names().map(str::to_owned).collect(),
            kinds: schema.features().iter().map(|f| f.kind).collect(),
            min: stats.features.iter().map(|s| s.min).collect(),
            max: stats.features.iter().map(|s| s.max).collect(),
            scale,
            mutable,
            in_scope,
        })
    }

    /// Freezes the named features in addition to the schema's own settings.
    pub fn with_immutable<S: AsRef<str>>(mut self, names: &[S]) -> Result<Self> {
        for n in names {
            let n = n.as_ref();
            let j = self
                .names
                .iter()
                .position(|x| x == n)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown feature {n:?}")))?;
            self.mutable[j] = false;
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn kind(&self, j: usize) -> FeatureKind {
        self.kinds[j]
    }

    pub fn scale(&self, j: usize) -> f64 {
        self.scale[j]
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.min[j], self.max[j])
    }

    pub fn is_mutable(&self, j: usize) -> bool {
        self.mutable[j]
    }

    pub fn mutable_features(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.mutable[j]).collect()
    }

    /// Mean per-feature distance over in-scope features.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        if self.in_scope == 0 {
            return 0.0;
        }
        let total: f64 = (0..self.len())
            .filter(|&j| self.scale[j] > 0.0)
            .map(|j| self.feature_distance(j, a[j], b[j]))
            .sum();
        total / self.in_scope as f64
    }

    pub fn distance_records(&self, a: &Record, b: &Record) -> Result<f64> {
        for r in [a, b] {
            if r.values.len() != self.len() {
                return Err(Error::RecordShape(format!(
                    "record {} has {} values, expected {}",
                    r.id,
                    r.values.len(),
                    self.len()
                )));
            }
        }
        Ok(self.distance(&a.values, &b.values))
    }

    fn feature_distance(&self, j: usize, a: f64, b: f64) -> f64 {
        match self.kinds[j] {
            FeatureKind::Boolean => {
                if a != b {
                    1.0
                } else {
                    0.0
                }
            }
            _ => (a - b).abs() / self.scale[j],
        }
    }

    pub fn is_changed(&self, j: usize, from: f64, to: f64) -> bool {
        match self.kinds[j] {
            FeatureKind::Boolean => from != to,
            _ if self.scale[j] > 0.0 => (from - to).abs() / self.scale[j] > CHANGE_EPSILON,
            _ => from != to,
        }
    }

    /// Indices of features that differ between `query` and `candidate`.
    pub fn changed(&self, query: &[f64], candidate: &[f64]) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| self.is_changed(j, query[j], candidate[j]))
            .collect()
    }

    pub fn sparsity(&self, query: &[f64], candidate: &[f64]) -> usize {
        (0..self.len())
            .filter(|&j| self.is_changed(j, query[j], candidate[j]))
            .count()
    }

    /// Snaps a value onto the feature's kind and observed range.
    pub fn conform(&self, j: usize, v: f64) -> f64 {
        self.kinds[j].conform(v.clamp(self.min[j], self.max[j]))
    }
}
