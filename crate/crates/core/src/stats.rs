//! Per-feature summary statistics used for perturbation scales and distance
//! normalization.

use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Record};
use crate::error::{Error, Result};
use crate::schema::{DatasetSchema, FeatureKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStat {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub median: f64,
    /// Median absolute deviation from the median.
    pub mad: f64,
    /// Fraction of ones; only for boolean features.
    pub frequency: Option<f64>,
}

impl FeatureStat {
    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub features: Vec<FeatureStat>,
}

impl FeatureStats {
    pub fn get(&self, index: usize) -> &FeatureStat {
        &self.features[index]
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn from_records(schema: &DatasetSchema, records: &[Record]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let features = schema
            .features()
            .iter()
            .enumerate()
            .map(|(j, spec)| {
                let column: Vec<f64> = records.iter().map(|r| r.values[j]).collect();
                column_stat(&column, spec.kind)
            })
            .collect();
        Ok(FeatureStats { features })
    }
}

pub fn compute_stats(data: &LabeledDataset) -> Result<FeatureStats> {
    FeatureStats::from_records(data.schema(), data.records())
}

fn column_stat(column: &[f64], kind: FeatureKind) -> FeatureStat {
    let n = column.len() as f64;
    let mean = column.iter().sum::<f64>() / n;
    let var = column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = median_of_sorted(&sorted);
    let mut deviations: Vec<f64> = sorted.iter().map(|v| (v - median).abs()).collect();
    deviations.sort_by(f64::total_cmp);
    FeatureStat {
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        mean,
        std: var.sqrt(),
        median,
        mad: median_of_sorted(&deviations),
        frequency: (kind == FeatureKind::Boolean).then_some(mean),
    }
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}
