//! Local feature importance toward a hypothesis class from a weighted linear
//! surrogate fitted on perturbations of one record.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::Classifier;
use crate::counterfactual::DistanceProfile;
use crate::dataset::Record;
use crate::error::{Error, Result};
use crate::schema::{ClassLabel, DatasetSchema, FeatureKind};
use crate::stats::FeatureStats;

pub const BOOLEAN_FLIP_PROB: f64 = 0.15;
pub const RIDGE_ALPHA: f64 = 1.0;
/// Weighted target variance below which the fit is reported as degenerate.
const DEGENERATE_VARIANCE: f64 = 1e-12;

pub fn default_kernel_width() -> f64 {
    0.75 * 20f64.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationConfig {
    pub n_samples: usize,
    pub kernel_width: f64,
    pub seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            n_samples: 5000,
            kernel_width: default_kernel_width(),
            seed: 0,
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be positive".into()));
        }
        if !(self.kernel_width > 0.0 && self.kernel_width.is_finite()) {
            return Err(Error::InvalidConfig("kernel_width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitQuality {
    Ok,
    /// The target barely varies over the perturbations; weights carry no signal.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeight {
    pub name: String,
    pub weight: f64,
}

/// Signed weights in schema order. Positive supports the hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub record_id: String,
    pub hypothesis: ClassLabel,
    pub weights: Vec<FeatureWeight>,
    pub intercept: f64,
    pub surrogate_r2: f64,
    pub quality: FitQuality,
}

impl ImportanceVector {
    pub fn weight(&self, name: &str) -> Option<f64> {
        self.weights.iter().find(|w| w.name == name).map(|w| w.weight)
    }

    /// Feature indices by decreasing |weight|; ties keep schema order.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.weights.len()).collect();
        idx.sort_by(|&a, &b| {
            self.weights[b]
                .weight
                .abs()
                .total_cmp(&self.weights[a].weight.abs())
                .then(a.cmp(&b))
        });
        idx
    }
}

/// Independent stream per feature so reordering the schema only reorders
/// the sampled columns.
fn feature_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

/// `n_samples` records around `record`; sample 0 is the record itself.
pub fn perturb_around(
    schema: &DatasetSchema,
    record: &Record,
    stats: &FeatureStats,
    config: &PerturbationConfig,
) -> Result<Vec<Record>> {
    config.validate()?;
    record.validate(schema)?;
    if stats.len() != schema.len() {
        return Err(Error::RecordShape(format!(
            "stats cover {} features, schema has {}",
            stats.len(),
            schema.len()
        )));
    }
    let n = config.n_samples;
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(schema.len());
    for (j, spec) in schema.features().iter().enumerate() {
        let x = record.values[j];
        let st = stats.get(j);
        let mut rng = feature_rng(config.seed, &spec.name);
        let mut col = Vec::with_capacity(n);
        col.push(x);
        match spec.kind {
            FeatureKind::Boolean => {
                let flip = Bernoulli::new(BOOLEAN_FLIP_PROB).expect("valid probability");
                col.extend((1..n).map(|_| if flip.sample(&mut rng) { 1.0 - x } else { x }));
            }
            kind if st.std > 0.0 => {
                let normal = Normal::new(x, st.std).expect("positive std");
                col.extend((1..n).map(|_| kind.conform(normal.sample(&mut rng).clamp(st.min, st.max))));
            }
            _ => col.extend(std::iter::repeat_n(x, n - 1)),
        }
        columns.push(col);
    }
    Ok((0..n)
        .map(|i| {
            Record::new(
                format!("{}~{i}", record.id),
                columns.iter().map(|c| c[i]).collect(),
            )
        })
        .collect())
}

/// exp(-d²/width²) with d the profile distance to `record`.
pub fn kernel_weights(record: &Record, samples: &[Record], profile: &DistanceProfile, kernel_width: f64) -> Vec<f64> {
    samples
        .iter()
        .map(|s| {
            let d = profile.distance(&record.values, &s.values);
            (-(d * d) / (kernel_width * kernel_width)).exp()
        })
        .collect()
}

/// Fits a weighted ridge surrogate of p(hypothesis) on perturbations of
/// `record`. Continuous features enter as offsets from the record in units
/// of training std, booleans as 0/1.
pub fn explain_importance<C: Classifier + ?Sized>(
    model: &C,
    schema: &DatasetSchema,
    record: &Record,
    hypothesis: ClassLabel,
    stats: &FeatureStats,
    config: &PerturbationConfig,
) -> Result<ImportanceVector> {
    let samples = perturb_around(schema, record, stats, config)?;
    let profile = DistanceProfile::new(schema, stats)?;
    let w = kernel_weights(record, &samples, &profile, config.kernel_width);
    let y: Vec<f64> = samples
        .par_iter()
        .map(|s| model.predict_proba(&s.values)[hypothesis.index()])
        .collect();

    let d = schema.len();
    let design = |s: &Record, j: usize| -> f64 {
        let spec = &schema.features()[j];
        let std = stats.get(j).std;
        match spec.kind {
            FeatureKind::Boolean => s.values[j],
            _ if std > 0.0 => (s.values[j] - record.values[j]) / std,
            _ => 0.0,
        }
    };
    let n = samples.len();
    let x = DMatrix::from_fn(n, d, |i, j| design(&samples[i], j));

    let w_sum: f64 = w.iter().sum();
    let x_mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| w[i] * x[(i, j)]).sum::<f64>() / w_sum)
        .collect();
    let y_mean = (0..n).map(|i| w[i] * y[i]).sum::<f64>() / w_sum;

    let xc = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - x_mean[j]);
    let yc = DVector::from_fn(n, |i, _| y[i] - y_mean);
    let wx = DMatrix::from_fn(n, d, |i, j| w[i] * xc[(i, j)]);
    let mut gram = xc.transpose() * &wx;
    for j in 0..d {
        gram[(j, j)] += RIDGE_ALPHA;
    }
    let rhs = wx.transpose() * &yc;
    let beta = gram
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| DVector::zeros(d));

    let intercept = y_mean - (0..d).map(|j| beta[j] * x_mean[j]).sum::<f64>();
    let fitted = &xc * &beta;
    let ss_tot: f64 = (0..n).map(|i| w[i] * yc[i] * yc[i]).sum();
    let ss_res: f64 = (0..n).map(|i| w[i] * (yc[i] - fitted[i]).powi(2)).sum();
    let (surrogate_r2, quality) = if ss_tot / w_sum < DEGENERATE_VARIANCE {
        (0.0, FitQuality::Degenerate)
    } else {
        (1.0 - ss_res / ss_tot, FitQuality::Ok)
    };

    Ok(ImportanceVector {
        record_id: record.id.clone(),
        hypothesis,
        weights: schema
            .names()
            .zip(beta.iter())
            .map(|(name, &weight)| FeatureWeight {
                name: name.to_owned(),
                weight,
            })
            .collect(),
        intercept,
        surrogate_r2,
        quality,
    })
}
