//! Feature system: feature kinds, the schema document, class labels.
//!
//! A schema is an ordered list of typed features plus the three diagnosis
//! classes. Dataset columns follow schema order; display order is a separate
//! permutation given by `display_priority`.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Number of diagnosis classes.
pub const NUM_CLASSES: usize = 3;

/// The bundled Table-1 thyroid schema document.
pub const THYROID_SCHEMA_DOC: &str = include_str!("../schema/thyroid.toml");

/// Feature names of the thyroid feature system, in column order.
pub const THYROID_FEATURES: [&str; 20] = [
    "age",
    "sex",
    "on_thyroxine",
    "on_antithyroid_meds",
    "sick",
    "pregnant",
    "thyroid_surgery",
    "I131_treatment",
    "query_hypothyroid",
    "query_hyperthyroid",
    "lithium",
    "goitre",
    "tumor",
    "hypopituitary",
    "psych",
    "TSH",
    "T3",
    "TT4",
    "T4U",
    "FTI",
];

/// Lab measurements, in the order clinicians read them.
pub const LAB_FEATURES: [&str; 5] = ["TSH", "T3", "TT4", "T4U", "FTI"];

const DEFAULT_CLASS_NAMES: [&str; NUM_CLASSES] = ["Negative", "Hyperthyroid", "Hypothyroid"];

/// Features shown before all others, in this order.
const LEADING_DISPLAY: [&str; 3] = ["age", "sex", "TSH"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Boolean,
    Integer,
    Real,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Boolean => "boolean",
            FeatureKind::Integer => "integer",
            FeatureKind::Real => "real",
        }
    }

    pub fn is_continuous(self) -> bool {
        !matches!(self, FeatureKind::Boolean)
    }

    /// Snaps an arbitrary value onto the kind's domain.
    pub fn conform(self, value: f64) -> f64 {
        match self {
            FeatureKind::Boolean => {
                if value >= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            FeatureKind::Integer => value.round(),
            FeatureKind::Real => value,
        }
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "boolean" | "bool" => Ok(FeatureKind::Boolean),
            "integer" | "int" => Ok(FeatureKind::Integer),
            "real" | "float" => Ok(FeatureKind::Real),
            other => Err(format!("unknown kind: {other}")),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default)]
    pub description: String,
    /// Lower values are shown earlier.
    pub display_priority: u32,
    /// Whether counterfactual search may alter this feature.
    pub mutable: bool,
}

impl FeatureSpec {
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        FeatureSpec {
            name: name.into(),
            kind,
            description: String::new(),
            display_priority: 0,
            mutable: true,
        }
    }
}

/// A diagnosis class: 0 = Negative, 1 = Hyperthyroid, 2 = Hypothyroid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassLabel(u8);

impl ClassLabel {
    pub const NEGATIVE: ClassLabel = ClassLabel(0);
    pub const HYPERTHYROID: ClassLabel = ClassLabel(1);
    pub const HYPOTHYROID: ClassLabel = ClassLabel(2);

    pub fn new(index: usize) -> Result<Self> {
        if index < NUM_CLASSES {
            Ok(ClassLabel(index as u8))
        } else {
            Err(Error::InvalidClass(format!(
                "class index {index} out of range 0..{NUM_CLASSES}"
            )))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = ClassLabel> {
        (0..NUM_CLASSES as u8).map(ClassLabel)
    }

    /// The two classes other than `self`, in index order.
    pub fn alternates(self) -> impl Iterator<Item = ClassLabel> {
        ClassLabel::all().filter(move |c| *c != self)
    }

    pub fn default_name(self) -> &'static str {
        DEFAULT_CLASS_NAMES[self.index()]
    }

    /// Accepts an integer index or a class name, case-insensitively.
    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim();
        if let Ok(i) = t.parse::<usize>() {
            return ClassLabel::new(i).ok();
        }
        DEFAULT_CLASS_NAMES
            .iter()
            .position(|n| n.eq_ignore_ascii_case(t))
            .map(|i| ClassLabel(i as u8))
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.default_name())
    }
}

impl Serialize for ClassLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for ClassLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(i64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Index(i) if (0..NUM_CLASSES as i64).contains(&i) => Ok(ClassLabel(i as u8)),
            Raw::Index(i) => Err(serde::de::Error::custom(format!(
                "class index {i} out of range"
            ))),
            Raw::Name(n) => ClassLabel::parse(&n)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown class {n:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSchema {
    features: Vec<FeatureSpec>,
    classes: Vec<String>,
}

impl DatasetSchema {
    /// Builds a schema from explicit feature specs. Checks uniqueness of
    /// names and display priorities and the class count, but not the thyroid
    /// feature set; use [`load_schema`] for that.
    pub fn new(features: Vec<FeatureSpec>, classes: Vec<String>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        let mut names = HashSet::new();
        for f in &features {
            if !names.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature: {}", f.name)));
            }
        }
        let mut prios = HashSet::new();
        for f in &features {
            if !prios.insert(f.display_priority) {
                return Err(Error::Schema(format!(
                    "duplicate display priority {} (feature {})",
                    f.display_priority, f.name
                )));
            }
        }
        if classes.len() != NUM_CLASSES {
            return Err(Error::Schema(format!(
                "expected {NUM_CLASSES} classes, found {}",
                classes.len()
            )));
        }
        Ok(DatasetSchema { features, classes })
    }

    /// Builds a schema with display priorities in column order and default
    /// class names. Convenient for small synthetic problems.
    pub fn from_kinds(features: &[(&str, FeatureKind)]) -> Result<Self> {
        let specs = features
            .iter()
            .enumerate()
            .map(|(i, (name, kind))| FeatureSpec {
                display_priority: i as u32,
                ..FeatureSpec::new(*name, *kind)
            })
            .collect();
        Self::new(specs, default_class_names())
    }

    /// The bundled thyroid schema.
    pub fn thyroid() -> Self {
        load_schema(THYROID_SCHEMA_DOC).expect("bundled schema document is valid")
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &FeatureSpec {
        &self.features[index]
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_name(&self, label: ClassLabel) -> &str {
        &self.classes[label.index()]
    }

    /// Parses a target cell: an index or a class name, case-insensitively.
    pub fn parse_label(&self, text: &str) -> Option<ClassLabel> {
        let t = text.trim();
        if let Ok(i) = t.parse::<usize>() {
            return ClassLabel::new(i).ok();
        }
        self.classes
            .iter()
            .position(|n| n.eq_ignore_ascii_case(t))
            .and_then(|i| ClassLabel::new(i).ok())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    /// Feature indices sorted by display priority.
    pub fn display_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.features.len()).collect();
        order.sort_by_key(|&i| self.features[i].display_priority);
        order
    }

    /// Hex digest identifying column layout, kinds and classes. Display
    /// settings do not contribute.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.features {
            h.update(f.name.as_bytes());
            h.update(b":");
            h.update(f.kind.as_str().as_bytes());
            h.update(b";");
        }
        h.update(b"|");
        for c in &self.classes {
            h.update(c.as_bytes());
            h.update(b";");
        }
        hex::encode(&h.finalize()[..16])
    }

    /// Renders the schema back into the document grammar.
    pub fn to_document(&self) -> String {
        let doc = SchemaDocument {
            classes: Some(self.classes.clone()),
            feature: self
                .features
                .iter()
                .map(|f| FeatureEntry {
                    name: f.name.clone(),
                    kind: f.kind.as_str().to_owned(),
                    description: f.description.clone(),
                    display_priority: Some(f.display_priority),
                    mutable: Some(f.mutable),
                })
                .collect(),
        };
        toml::to_string(&doc).expect("schema document serializes")
    }
}

pub fn default_class_names() -> Vec<String> {
    DEFAULT_CLASS_NAMES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaDocument {
    classes: Option<Vec<String>>,
    #[serde(default)]
    feature: Vec<FeatureEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureEntry {
    name: String,
    kind: String,
    #[serde(default)]
    description: String,
    display_priority: Option<u32>,
    mutable: Option<bool>,
}

/// Parses a schema document and checks it against the thyroid feature system.
///
/// Display priorities are either given for every feature or for none; when
/// absent, age, sex and TSH lead and the rest follow column order.
pub fn load_schema(document: &str) -> Result<DatasetSchema> {
    let doc: SchemaDocument =
        toml::from_str(document).map_err(|e| Error::Schema(format!("malformed document: {e}")))?;

    let mut seen = HashSet::new();
    for entry in &doc.feature {
        if !seen.insert(entry.name.as_str()) {
            return Err(Error::Schema(format!("duplicate feature: {}", entry.name)));
        }
    }
    for required in THYROID_FEATURES {
        if !seen.contains(required) {
            return Err(Error::Schema(format!("missing feature: {required}")));
        }
    }
    if let Some(extra) = doc
        .feature
        .iter()
        .find(|e| !THYROID_FEATURES.contains(&e.name.as_str()))
    {
        return Err(Error::Schema(format!("unknown feature: {}", extra.name)));
    }

    let explicit = doc.feature.iter().filter(|e| e.display_priority.is_some()).count();
    if explicit != 0 && explicit != doc.feature.len() {
        return Err(Error::Schema(
            "display_priority must be given for all features or none".into(),
        ));
    }

    let mut features = Vec::with_capacity(doc.feature.len());
    for (column, entry) in doc.feature.iter().enumerate() {
        let kind = entry
            .kind
            .parse::<FeatureKind>()
            .map_err(|e| Error::Schema(format!("feature {}: {e}", entry.name)))?;
        let display_priority = entry
            .display_priority
            .unwrap_or_else(|| default_priority(&entry.name, column));
        features.push(FeatureSpec {
            name: entry.name.clone(),
            kind,
            description: entry.description.clone(),
            display_priority,
            mutable: entry.mutable.unwrap_or(true),
        });
    }

    let classes = doc.classes.unwrap_or_else(default_class_names);
    DatasetSchema::new(features, classes)
}

pub fn load_schema_file(path: &Path) -> Result<DatasetSchema> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_schema(&text)
}

fn default_priority(name: &str, column: usize) -> u32 {
    match LEADING_DISPLAY.iter().position(|n| *n == name) {
        Some(p) => p as u32,
        None => LEADING_DISPLAY.len() as u32 + column as u32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn without(name: &str) -> String {
        let schema = DatasetSchema::thyroid();
        let kept: Vec<FeatureSpec> = schema
            .features()
            .iter()
            .filter(|f| f.name != name)
            .cloned()
            .collect();
        let doc = SchemaDocument {
            classes: None,
            feature: kept
                .iter()
                .map(|f| FeatureEntry {
                    name: f.name.clone(),
                    kind: f.kind.as_str().into(),
                    description: String::new(),
                    display_priority: None,
                    mutable: None,
                })
                .collect(),
        };
        toml::to_string(&doc).unwrap()
    }

    #[test]
    fn bundled_schema_matches_table() {
        let s = DatasetSchema::thyroid();
        assert_eq!(s.len(), 20);
        let names: Vec<&str> = s.names().collect();
        assert_eq!(names, THYROID_FEATURES);
        assert_eq!(s.classes(), ["Negative", "Hyperthyroid", "Hypothyroid"]);
        assert_eq!(s.feature(0).kind, FeatureKind::Integer);
        assert_eq!(s.feature(1).kind, FeatureKind::Boolean);
        assert_eq!(s.feature(13).kind, FeatureKind::Real);
        assert!(s.features().iter().all(|f| f.mutable));
    }

    #[test]
    fn default_display_order_leads_with_age_sex_tsh() {
        let s = DatasetSchema::thyroid();
        let order: Vec<&str> = s
            .display_order()
            .into_iter()
            .map(|i| s.feature(i).name.as_str())
            .collect();
        assert_eq!(&order[..4], ["age", "sex", "TSH", "on_thyroxine"]);
        assert_eq!(order.last(), Some(&"FTI"));
    }

    #[test]
    fn missing_feature_is_named() {
        let err = load_schema(&without("TSH")).unwrap_err();
        assert_eq!(err.to_string(), "schema error: missing feature: TSH");
    }

    #[test]
    fn duplicate_feature_is_named() {
        let doc = format!(
            "{}\n[[feature]]\nname = \"age\"\nkind = \"integer\"\n",
            THYROID_SCHEMA_DOC
        );
        let err = load_schema(&doc).unwrap_err();
        assert_eq!(err.to_string(), "schema error: duplicate feature: age");
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let doc = THYROID_SCHEMA_DOC.replacen("kind = \"integer\"", "kind = \"complex\"", 1);
        let err = load_schema(&doc).unwrap_err().to_string();
        assert!(err.contains("age") && err.contains("complex"), "{err}");
    }

    #[test]
    fn explicit_priorities_round_trip() {
        let s = DatasetSchema::thyroid();
        let again = load_schema(&s.to_document()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.fingerprint(), again.fingerprint());
    }

    #[test]
    fn partial_priorities_rejected() {
        let doc = THYROID_SCHEMA_DOC.replacen(
            "kind = \"integer\"",
            "kind = \"integer\"\ndisplay_priority = 4",
            1,
        );
        assert!(load_schema(&doc).is_err());
    }

    #[test]
    fn fingerprint_ignores_display_but_not_layout() {
        let s = DatasetSchema::thyroid();
        let mut feats = s.features().to_vec();
        feats[0].display_priority = 100;
        let redisplayed = DatasetSchema::new(feats.clone(), default_class_names()).unwrap();
        assert_eq!(redisplayed.fingerprint(), s.fingerprint());
        feats.swap(0, 1);
        let permuted = DatasetSchema::new(feats, default_class_names()).unwrap();
        assert_ne!(permuted.fingerprint(), s.fingerprint());
    }

    #[test]
    fn class_labels() {
        assert!(ClassLabel::new(3).is_err());
        assert_eq!(ClassLabel::parse("HYPOthyroid"), Some(ClassLabel::HYPOTHYROID));
        assert_eq!(ClassLabel::parse("1"), Some(ClassLabel::HYPERTHYROID));
        assert_eq!(ClassLabel::parse("7"), None);
        let alts: Vec<_> = ClassLabel::NEGATIVE.alternates().collect();
        assert_eq!(alts, [ClassLabel::HYPERTHYROID, ClassLabel::HYPOTHYROID]);
        let parsed: ClassLabel = serde_json::from_str("\"negative\"").unwrap();
        assert_eq!(parsed, ClassLabel::NEGATIVE);
        assert!(serde_json::from_str::<ClassLabel>("7").is_err());
    }
}
