//! Hypothesis-anchored explanation engine for tabular diagnosis models.
//!
//! Given a patient record and a clinician's hypothesis class, the engine
//! returns evidence instead of a recommendation: signed local feature
//! importance toward the hypothesis, counterexamples the model would assign
//! to each alternate class, and similar cases it would keep in the
//! hypothesis class.

pub mod classifier;
pub mod counterfactual;
pub mod dataset;
pub mod error;
pub mod gbdt;
pub mod schema;
pub mod service;
pub mod session;
pub mod split;
pub mod stats;
pub mod surrogate;
pub mod synthetic;

pub use classifier::{argmax, Classifier, FnClassifier, Proba};
pub use counterfactual::{
    generate_counterexamples, generate_similar_cases, CfConfig, Counterexample, DistanceProfile, ExampleCase,
    SearchOutcome, SimilarCase,
};
pub use dataset::{ingest_csv, ingest_reader, IngestReport, LabeledDataset, MissingPolicy, Record};
pub use error::{Error, Result};
pub use gbdt::{GbdtModel, TrainConfig};
pub use schema::{load_schema, ClassLabel, DatasetSchema, FeatureKind, FeatureSpec, NUM_CLASSES};
pub use session::{
    default_counts, investigate_another_hypothesis, ExplainEngine, ExplanationBundle, HypothesisRequest, Session,
    SessionLog,
};
pub use split::{kfold_indices, stratified_split, Fold};
pub use stats::{compute_stats, FeatureStat, FeatureStats};
pub use surrogate::{explain_importance, kernel_weights, perturb_around, FitQuality, ImportanceVector, PerturbationConfig};
