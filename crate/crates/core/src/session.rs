//! One hypothesis request in, one explanation bundle out.
//!
//! [`ExplainEngine`] is a pure function of (model, dataset, request). A
//! [`Session`] wraps it with the append-only request log.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::classifier::Classifier;
use crate::counterfactual::{
    generate_counterexamples, generate_similar_cases_with, CfConfig, DistanceProfile, ExampleCase, FeatureChange,
    SearchOutcome, MAX_EXPLANATIONS,
};
use crate::dataset::{LabeledDataset, Record};
use crate::error::{Error, Result};
use crate::gbdt::GbdtModel;
use crate::schema::{ClassLabel, DatasetSchema};
use crate::stats::{compute_stats, FeatureStats};
use crate::surrogate::{explain_importance, ImportanceVector, PerturbationConfig};

/// Explanation counts used when a request leaves them out:
/// (counterexamples per alternate class, similar cases).
pub fn default_counts(hypothesis: ClassLabel) -> (usize, usize) {
    if hypothesis == ClassLabel::NEGATIVE {
        (3, 3)
    } else {
        (5, 5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
    /// A full record for a patient outside the loaded dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<Record>,
    pub hypothesis: ClassLabel,
    #[serde(default)]
    pub n_counterexamples_per_class: Option<usize>,
    #[serde(default)]
    pub n_similar_cases: Option<usize>,
    #[serde(default)]
    pub include_importance: bool,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl HypothesisRequest {
    pub fn for_record(record_id: impl Into<String>, hypothesis: ClassLabel) -> Self {
        HypothesisRequest {
            record_id: Some(record_id.into()),
            record: None,
            hypothesis,
            n_counterexamples_per_class: None,
            n_similar_cases: None,
            include_importance: false,
            seed: None,
        }
    }

    /// Parses a JSON request, reporting bad classes and counts with their
    /// own error kinds instead of a generic parse failure.
    pub fn from_json(value: Value) -> Result<Self> {
        let Value::Object(map) = &value else {
            return Err(Error::Malformed("request must be a JSON object".into()));
        };
        match map.get("hypothesis") {
            None => return Err(Error::InvalidClass("hypothesis is required".into())),
            Some(h) => {
                ClassLabel::deserialize(h).map_err(|e| Error::InvalidClass(e.to_string()))?;
            }
        }
        for field in ["n_counterexamples_per_class", "n_similar_cases"] {
            match map.get(field) {
                None | Some(Value::Null) => {}
                Some(v) => match v.as_u64() {
                    Some(n) if n <= MAX_EXPLANATIONS as u64 => {}
                    _ => {
                        return Err(Error::InvalidCount(format!(
                            "{field} must be an integer in [0, {MAX_EXPLANATIONS}], got {v}"
                        )))
                    }
                },
            }
        }
        let req: HypothesisRequest = serde_json::from_value(value).map_err(|e| Error::Malformed(e.to_string()))?;
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, n) in [
            ("n_counterexamples_per_class", self.n_counterexamples_per_class),
            ("n_similar_cases", self.n_similar_cases),
        ] {
            if n.is_some_and(|n| n > MAX_EXPLANATIONS) {
                return Err(Error::InvalidCount(format!(
                    "{field} must be in [0, {MAX_EXPLANATIONS}]"
                )));
            }
        }
        if self.record_id.is_none() && self.record.is_none() {
            return Err(Error::Malformed("either record_id or record is required".into()));
        }
        Ok(())
    }

    /// Counts with defaults applied.
    pub fn counts(&self) -> (usize, usize) {
        let (cf, sc) = default_counts(self.hypothesis);
        (
            self.n_counterexamples_per_class.unwrap_or(cf),
            self.n_similar_cases.unwrap_or(sc),
        )
    }
}

/// One feature value of a displayed record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub value: f64,
    pub changed: bool,
    /// The query's value, present only for changed cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub was: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedCase {
    pub id: String,
    pub predicted_class: ClassLabel,
    pub proximity: f64,
    pub sparsity: usize,
    pub changed_features: Vec<FeatureChange>,
    /// Values in display order.
    pub values: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSet {
    pub requested: usize,
    pub budget_exhausted: bool,
    pub cases: Vec<RenderedCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_fingerprint: String,
    pub schema_fingerprint: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationBundle {
    pub record_id: String,
    pub hypothesis: ClassLabel,
    /// Query values in display order.
    pub record: Vec<Cell>,
    /// Set when the request carried its own record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline_record: Option<Record>,
    pub similar_cases: CaseSet,
    /// Keyed by the two classes other than the hypothesis.
    pub counterexamples: BTreeMap<ClassLabel, CaseSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<ImportanceVector>,
    pub provenance: Provenance,
}

impl ExplanationBundle {
    pub fn to_json_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("bundle serializes")
    }

    /// Hex SHA-256 of the compact JSON encoding.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json_bytes()))
    }

    pub fn summary(&self) -> BundleSummary {
        BundleSummary {
            record_id: self.record_id.clone(),
            hypothesis: self.hypothesis,
            seed: self.provenance.seed,
            n_similar_cases: self.similar_cases.cases.len(),
            n_counterexamples: self
                .counterexamples
                .iter()
                .map(|(c, set)| (*c, set.cases.len()))
                .collect(),
            importance: self.importance.is_some(),
            digest: self.digest(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub record_id: String,
    pub hypothesis: ClassLabel,
    pub seed: u64,
    pub n_similar_cases: usize,
    pub n_counterexamples: BTreeMap<ClassLabel, usize>,
    pub importance: bool,
    pub digest: String,
}

/// Pre-filled request for the same record under another hypothesis, with
/// that hypothesis' default counts. The flag is set when the hypothesis is
/// unchanged.
pub fn investigate_another_hypothesis(
    previous: &ExplanationBundle,
    new_hypothesis: ClassLabel,
) -> (HypothesisRequest, bool) {
    let (cf, sc) = default_counts(new_hypothesis);
    let req = HypothesisRequest {
        record_id: Some(previous.record_id.clone()),
        record: previous.inline_record.clone(),
        hypothesis: new_hypothesis,
        n_counterexamples_per_class: Some(cf),
        n_similar_cases: Some(sc),
        include_importance: previous.importance.is_some(),
        seed: None,
    };
    (req, new_hypothesis == previous.hypothesis)
}

/// Search and surrogate budgets applied to every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSettings {
    pub population_size: usize,
    pub generations: usize,
    pub sparsity_pressure: f64,
    pub immutable_features: Vec<String>,
    pub domain_constraints: bool,
    pub n_samples: usize,
    pub kernel_width: f64,
}

impl Default for EngineSettings {
    fn default() -> Self {
        let cf = CfConfig::default();
        let p = PerturbationConfig::default();
        EngineSettings {
            population_size: cf.population_size,
            generations: cf.generations,
            sparsity_pressure: cf.sparsity_pressure,
            immutable_features: cf.immutable_features,
            domain_constraints: cf.domain_constraints,
            n_samples: p.n_samples,
            kernel_width: p.kernel_width,
        }
    }
}

impl EngineSettings {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

fn mix(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub type SharedClassifier = Box<dyn Classifier + Send + Sync>;

pub struct ExplainEngine {
    model: SharedClassifier,
    model_fingerprint: String,
    data: LabeledDataset,
    stats: FeatureStats,
    profile: DistanceProfile,
    settings: EngineSettings,
}

impl ExplainEngine {
    pub fn new(model: GbdtModel, data: LabeledDataset) -> Result<Self> {
        model.check_schema(data.schema())?;
        let fingerprint = model.fingerprint();
        Self::from_classifier(Box::new(model), fingerprint, data)
    }

    /// Any classifier over `data`'s schema, identified by `fingerprint`.
    pub fn from_classifier(model: SharedClassifier, fingerprint: String, data: LabeledDataset) -> Result<Self> {
        let stats = compute_stats(&data)?;
        let profile = DistanceProfile::new(data.schema(), &stats)?;
        Ok(ExplainEngine {
            model,
            model_fingerprint: fingerprint,
            data,
            stats,
            profile,
            settings: EngineSettings::default(),
        })
    }

    pub fn with_settings(mut self, settings: EngineSettings) -> Result<Self> {
        self.profile.clone().with_immutable(&settings.immutable_features)?;
        self.settings = settings;
        Ok(self)
    }

    pub fn schema(&self) -> &DatasetSchema {
        self.data.schema()
    }

    pub fn data(&self) -> &LabeledDataset {
        &self.data
    }

    pub fn model(&self) -> &(dyn Classifier + Send + Sync) {
        &*self.model
    }

    pub fn model_fingerprint(&self) -> &str {
        &self.model_fingerprint
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    /// Values of a dataset record in display order.
    pub fn render_record(&self, record: &Record) -> Vec<Cell> {
        self.schema()
            .display_order()
            .into_iter()
            .map(|j| Cell {
                name: self.schema().feature(j).name.clone(),
                value: record.values[j],
                changed: false,
                was: None,
            })
            .collect()
    }

    fn resolve(&self, req: &HypothesisRequest) -> Result<(Record, bool)> {
        match (&req.record, &req.record_id) {
            (Some(r), id) => {
                let mut r = r.clone();
                if let Some(id) = id {
                    r.id = id.clone();
                }
                r.validate(self.schema())?;
                Ok((r, true))
            }
            (None, Some(id)) => self
                .data
                .find(id)
                .map(|(r, _)| (r.clone(), false))
                .ok_or_else(|| Error::RecordNotFound(id.clone())),
            (None, None) => Err(Error::Malformed("either record_id or record is required".into())),
        }
    }

    fn cf_config(&self, target: ClassLabel, k: usize, seed: u64) -> CfConfig {
        CfConfig {
            target_class: target,
            k,
            population_size: self.settings.population_size,
            generations: self.settings.generations,
            sparsity_pressure: self.settings.sparsity_pressure,
            seed,
            immutable_features: self.settings.immutable_features.clone(),
            domain_constraints: self.settings.domain_constraints,
        }
    }

    fn render_outcome(&self, query: &Record, outcome: SearchOutcome) -> CaseSet {
        let order = self.schema().display_order();
        CaseSet {
            requested: outcome.requested,
            budget_exhausted: outcome.budget_exhausted,
            cases: outcome
                .cases
                .into_iter()
                .map(|c: ExampleCase| {
                    let values = order
                        .iter()
                        .map(|&j| {
                            let name = self.schema().feature(j).name.clone();
                            let changed = c.changed_features.iter().any(|f| f.name == name);
                            Cell {
                                name,
                                value: c.candidate.values[j],
                                changed,
                                was: changed.then(|| query.values[j]),
                            }
                        })
                        .collect();
                    RenderedCase {
                        id: c.candidate.id,
                        predicted_class: c.predicted_class,
                        proximity: c.proximity,
                        sparsity: c.sparsity,
                        changed_features: c.changed_features,
                        values,
                    }
                })
                .collect(),
        }
    }

    /// Runs the requested explainers. The request seed, or a fresh one, is
    /// recorded in the bundle's provenance.
    pub fn handle_request(&self, req: &HypothesisRequest) -> Result<ExplanationBundle> {
        req.validate()?;
        let (query, inline) = self.resolve(req)?;
        let (n_cf, n_sc) = req.counts();
        let seed = req.seed.unwrap_or_else(rand::random);
        let hypothesis = req.hypothesis;

        enum Job {
            Similar,
            Counter(ClassLabel),
            Importance,
        }
        let mut jobs = vec![Job::Similar];
        jobs.extend(hypothesis.alternates().map(Job::Counter));
        if req.include_importance {
            jobs.push(Job::Importance);
        }
        enum Done {
            Cases(Option<ClassLabel>, SearchOutcome),
            Importance(ImportanceVector),
        }
        let done: Vec<Done> = jobs
            .into_par_iter()
            .map(|job| -> Result<Done> {
                Ok(match job {
                    Job::Similar => {
                        let cfg = self.cf_config(hypothesis, n_sc, mix(seed, 0));
                        Done::Cases(
                            None,
                            generate_similar_cases_with(&*self.model, &query, &cfg, &self.profile, &self.data)?,
                        )
                    }
                    Job::Counter(c) => {
                        let cfg = self.cf_config(c, n_cf, mix(seed, 1 + c.index() as u64));
                        Done::Cases(
                            Some(c),
                            generate_counterexamples(&*self.model, &query, &cfg, &self.profile, &self.data)?,
                        )
                    }
                    Job::Importance => {
                        let cfg = PerturbationConfig {
                            n_samples: self.settings.n_samples,
                            kernel_width: self.settings.kernel_width,
                            seed: mix(seed, 100),
                        };
                        Done::Importance(explain_importance(
                            &*self.model,
                            self.schema(),
                            &query,
                            hypothesis,
                            &self.stats,
                            &cfg,
                        )?)
                    }
                })
            })
            .collect::<Result<_>>()?;

        let mut similar = None;
        let mut counterexamples = BTreeMap::new();
        let mut importance = None;
        for d in done {
            match d {
                Done::Cases(None, out) => similar = Some(self.render_outcome(&query, out)),
                Done::Cases(Some(c), out) => {
                    counterexamples.insert(c, self.render_outcome(&query, out));
                }
                Done::Importance(iv) => importance = Some(iv),
            }
        }
        Ok(ExplanationBundle {
            record_id: query.id.clone(),
            hypothesis,
            record: self.render_record(&query),
            inline_record: inline.then(|| query.clone()),
            similar_cases: similar.expect("similar-case job always runs"),
            counterexamples,
            importance,
            provenance: Provenance {
                model_fingerprint: self.model_fingerprint.clone(),
                schema_fingerprint: self.schema().fingerprint(),
                seed,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    pub elapsed_ms: u64,
    /// The request as executed: counts and seed filled in.
    pub request: HypothesisRequest,
    pub summary: BundleSummary,
}

/// Append-only request log, optionally mirrored to a JSON-lines file.
pub struct SessionLog {
    entries: Mutex<Vec<LogEntry>>,
    file: Option<(PathBuf, Mutex<File>)>,
}

impl SessionLog {
    pub fn in_memory() -> Self {
        SessionLog {
            entries: Mutex::new(Vec::new()),
            file: None,
        }
    }

    /// Opens or creates `path`, loading any entries already in it.
    pub fn open(path: &Path) -> Result<Self> {
        let entries = if path.exists() { read_log(path)? } else { Vec::new() };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(SessionLog {
            entries: Mutex::new(entries),
            file: Some((path.to_owned(), Mutex::new(file))),
        })
    }

    pub fn append(&self, entry: LogEntry) -> Result<()> {
        let mut entries = self.entries.lock().expect("log lock");
        if let Some((path, file)) = &self.file {
            let mut line = serde_json::to_vec(&entry).map_err(|e| Error::SessionLog(e.to_string()))?;
            line.push(b'\n');
            let mut f = file.lock().expect("log file lock");
            f.write_all(&line)
                .and_then(|_| f.flush())
                .map_err(|e| Error::io(path, e))?;
        }
        entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> Vec<LogEntry> {
        self.entries.lock().expect("log lock").clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("log lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn read_log(path: &Path) -> Result<Vec<LogEntry>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::SessionLog(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

/// An engine plus its log.
pub struct Session {
    engine: ExplainEngine,
    log: SessionLog,
}

impl Session {
    pub fn new(engine: ExplainEngine, log: SessionLog) -> Self {
        Session { engine, log }
    }

    pub fn engine(&self) -> &ExplainEngine {
        &self.engine
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn handle(&self, req: &HypothesisRequest) -> Result<ExplanationBundle> {
        let started = Instant::now();
        let bundle = self.engine.handle_request(req)?;
        let (cf, sc) = req.counts();
        let executed = HypothesisRequest {
            n_counterexamples_per_class: Some(cf),
            n_similar_cases: Some(sc),
            seed: Some(bundle.provenance.seed),
            ..req.clone()
        };
        let timestamp_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        self.log.append(LogEntry {
            timestamp_ms,
            elapsed_ms: started.elapsed().as_millis() as u64,
            request: executed,
            summary: bundle.summary(),
        })?;
        Ok(bundle)
    }
}

/// Re-runs every logged request; returns, per entry, whether the bundle
/// digest matches the recorded one.
pub fn replay(engine: &ExplainEngine, entries: &[LogEntry]) -> Result<Vec<bool>> {
    entries
        .iter()
        .map(|e| Ok(engine.handle_request(&e.request)?.summary() == e.summary))
        .collect()
}
