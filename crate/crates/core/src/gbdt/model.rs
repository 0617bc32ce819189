use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tree::Tree;
use super::TrainConfig;
use crate::classifier::{softmax, Classifier, Proba};
use crate::dataset::Record;
use crate::error::{Error, Result};
use crate::schema::{ClassLabel, DatasetSchema, NUM_CLASSES};

pub const MODEL_FORMAT: &str = "hypex-gbdt";
pub const MODEL_VERSION: u32 = 1;

/// Per-class additive tree ensembles with softmax outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    format: String,
    version: u32,
    schema_fingerprint: String,
    n_features: usize,
    config: TrainConfig,
    base_scores: [f64; NUM_CLASSES],
    /// `trees[c][round]`
    trees: Vec<Vec<Tree>>,
}

impl GbdtModel {
    pub(crate) fn from_parts(
        schema: &DatasetSchema,
        config: TrainConfig,
        base_scores: [f64; NUM_CLASSES],
        trees: Vec<Vec<Tree>>,
    ) -> Self {
        GbdtModel {
            format: MODEL_FORMAT.to_owned(),
            version: MODEL_VERSION,
            schema_fingerprint: schema.fingerprint(),
            n_features: schema.len(),
            config,
            base_scores,
            trees,
        }
    }

    /// A model with no trees: predictions are `softmax(base_scores)`.
    pub fn constant(schema: &DatasetSchema, base_scores: [f64; NUM_CLASSES]) -> Self {
        Self::from_parts(
            schema,
            TrainConfig::default(),
            base_scores,
            vec![Vec::new(); NUM_CLASSES],
        )
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn schema_fingerprint(&self) -> &str {
        &self.schema_fingerprint
    }

    pub fn base_scores(&self) -> [f64; NUM_CLASSES] {
        self.base_scores
    }

    pub fn n_rounds(&self) -> usize {
        self.trees[0].len()
    }

    pub fn trees(&self, class: ClassLabel) -> &[Tree] {
        &self.trees[class.index()]
    }

    pub fn check_schema(&self, schema: &DatasetSchema) -> Result<()> {
        let found = schema.fingerprint();
        if found != self.schema_fingerprint {
            return Err(Error::SchemaMismatch {
                expected: self.schema_fingerprint.clone(),
                found,
            });
        }
        Ok(())
    }

    /// Raw additive scores before softmax.
    pub fn scores(&self, values: &[f64]) -> Proba {
        let mut s = self.base_scores;
        for (c, trees) in self.trees.iter().enumerate() {
            s[c] += trees.iter().map(|t| t.predict(values)).sum::<f64>();
        }
        s
    }

    /// Schema-checked prediction for a record.
    pub fn predict_record(&self, schema: &DatasetSchema, record: &Record) -> Result<Proba> {
        self.check_schema(schema)?;
        record.validate(schema)?;
        Ok(self.predict_proba(&record.values))
    }

    pub fn predict_record_class(&self, schema: &DatasetSchema, record: &Record) -> Result<ClassLabel> {
        self.check_schema(schema)?;
        record.validate(schema)?;
        Ok(self.predict_class(&record.values))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(self).expect("model serializes");
        out.push(b'\n');
        out
    }

    /// Hex digest of the serialized artifact.
    pub fn fingerprint(&self) -> String {
        hex::encode(&Sha256::digest(self.to_bytes())[..16])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let model: GbdtModel = serde_json::from_slice(bytes)
            .map_err(|e| Error::ModelFormat(format!("corrupt model file: {e}")))?;
        if model.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unknown format {:?}",
                model.format
            )));
        }
        if model.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported version {} (expected {MODEL_VERSION})",
                model.version
            )));
        }
        if model.trees.len() != NUM_CLASSES {
            return Err(Error::ModelFormat(format!(
                "expected {NUM_CLASSES} tree lists, found {}",
                model.trees.len()
            )));
        }
        let rounds = model.trees[0].len();
        if model.trees.iter().any(|t| t.len() != rounds) {
            return Err(Error::ModelFormat("tree count differs across classes".into()));
        }
        for (c, trees) in model.trees.iter().enumerate() {
            for (r, tree) in trees.iter().enumerate() {
                tree.check(model.n_features)
                    .map_err(|e| Error::ModelFormat(format!("class {c} tree {r}: {e}")))?;
            }
        }
        Ok(model)
    }
}

impl Classifier for GbdtModel {
    fn predict_proba(&self, values: &[f64]) -> Proba {
        softmax(&self.scores(values))
    }
}

pub fn save_model(model: &GbdtModel, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&model.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<GbdtModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    GbdtModel::from_bytes(&bytes)
}
