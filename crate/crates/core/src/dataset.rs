//! Records, labeled datasets and the delimited-text file format.
//!
//! File layout: a header row, then one record per row. An optional leading
//! `id` column carries record ids; the remaining columns follow schema order
//! and the final column holds the target. Cells that are empty or `?` are
//! missing; rows containing any missing cell are dropped on ingestion.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{ClassLabel, DatasetSchema, FeatureKind, NUM_CLASSES};

/// Cell contents treated as missing.
pub const MISSING_MARKERS: [&str; 2] = ["", "?"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub values: Vec<f64>,
}

impl Record {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Self {
        Record {
            id: id.into(),
            values,
        }
    }

    /// Checks arity and per-kind domains.
    pub fn validate(&self, schema: &DatasetSchema) -> Result<()> {
        if self.values.len() != schema.len() {
            return Err(Error::RecordShape(format!(
                "record {} has {} values, schema has {} features",
                self.id,
                self.values.len(),
                schema.len()
            )));
        }
        for (spec, &v) in schema.features().iter().zip(&self.values) {
            if let Err(reason) = check_value(spec.kind, v) {
                return Err(Error::RecordShape(format!(
                    "record {}: {} = {v}: {reason}",
                    self.id, spec.name
                )));
            }
        }
        Ok(())
    }
}

fn check_value(kind: FeatureKind, v: f64) -> std::result::Result<(), &'static str> {
    if !v.is_finite() {
        return Err("not finite");
    }
    match kind {
        FeatureKind::Boolean if v != 0.0 && v != 1.0 => Err("boolean must be 0 or 1"),
        FeatureKind::Integer if v.fract() != 0.0 => Err("integer expected"),
        _ => Ok(()),
    }
}

/// Missing policy for ingestion. Only row dropping is supported.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MissingPolicy {
    #[default]
    DropRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub records: usize,
    /// Records per class, indexed by class.
    pub class_counts: [usize; NUM_CLASSES],
}

impl IngestReport {
    pub fn class_proportions(&self) -> [f64; NUM_CLASSES] {
        let n = self.records.max(1) as f64;
        self.class_counts.map(|c| c as f64 / n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    schema: DatasetSchema,
    records: Vec<Record>,
    labels: Vec<ClassLabel>,
}

impl LabeledDataset {
    pub fn new(schema: DatasetSchema, records: Vec<Record>, labels: Vec<ClassLabel>) -> Result<Self> {
        if records.len() != labels.len() {
            return Err(Error::Malformed(format!(
                "{} records but {} labels",
                records.len(),
                labels.len()
            )));
        }
        let mut ids = HashSet::with_capacity(records.len());
        for r in &records {
            r.validate(&schema)?;
            if !ids.insert(r.id.as_str()) {
                return Err(Error::Malformed(format!("duplicate record id {}", r.id)));
            }
        }
        Ok(LabeledDataset {
            schema,
            records,
            labels,
        })
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Record, ClassLabel)> {
        self.records.iter().zip(self.labels.iter().copied())
    }

    pub fn find(&self, id: &str) -> Option<(&Record, ClassLabel)> {
        self.iter().find(|(r, _)| r.id == id)
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    /// Indices of records per class, in dataset order.
    pub fn class_indices(&self) -> [Vec<usize>; NUM_CLASSES] {
        let mut out: [Vec<usize>; NUM_CLASSES] = Default::default();
        for (i, l) in self.labels.iter().enumerate() {
            out[l.index()].push(i);
        }
        out
    }

    /// A dataset restricted to `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Writes the dataset in the ingestible file format, ids included.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_owned()];
        header.extend(self.schema.names().map(str::to_owned));
        header.push("target".to_owned());
        w.write_record(&header).map_err(csv_err)?;
        for (r, label) in self.iter() {
            let mut row = Vec::with_capacity(header.len());
            row.push(r.id.clone());
            row.extend(r.values.iter().map(|v| v.to_string()));
            row.push(self.schema.class_name(label).to_owned());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Malformed(e.to_string()))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Malformed(e.to_string())
}

/// Reads a dataset file from disk.
pub fn ingest_csv(
    path: &Path,
    schema: &DatasetSchema,
    policy: MissingPolicy,
) -> Result<(LabeledDataset, IngestReport)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(std::io::BufReader::new(file), schema, policy)
}

/// Reads a dataset from any reader. An input with no header at all is
/// treated as an empty dataset.
pub fn ingest_reader<R: Read>(
    input: R,
    schema: &DatasetSchema,
    policy: MissingPolicy,
) -> Result<(LabeledDataset, IngestReport)> {
    let MissingPolicy::DropRow = policy;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = reader.records();

    let header = match rows.next() {
        None => {
            let empty = LabeledDataset::new(schema.clone(), Vec::new(), Vec::new())?;
            let report = report_for(&empty, 0, 0);
            return Ok((empty, report));
        }
        Some(h) => h.map_err(csv_err)?,
    };
    let has_id = header.get(0).is_some_and(|h| h.eq_ignore_ascii_case("id"));
    let offset = usize::from(has_id);
    let expected_cols = schema.len() + 1 + offset;
    if header.len() != expected_cols {
        return Err(Error::HeaderMismatch(format!(
            "expected {expected_cols} columns, found {}",
            header.len()
        )));
    }
    for (i, spec) in schema.features().iter().enumerate() {
        let got = &header[i + offset];
        if got != spec.name {
            return Err(Error::HeaderMismatch(format!(
                "column {} should be {}, found {got}",
                i + offset + 1,
                spec.name
            )));
        }
    }

    let mut records = Vec::new();
    let mut labels = Vec::new();
    let mut rows_read = 0;
    let mut rows_dropped = 0;
    for (n, row) in rows.enumerate() {
        let row = row.map_err(csv_err)?;
        let line = n + 1;
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        rows_read += 1;
        if row.len() != expected_cols {
            return Err(Error::Malformed(format!(
                "row {line}: expected {expected_cols} cells, found {}",
                row.len()
            )));
        }
        if row.iter().any(|c| MISSING_MARKERS.contains(&c)) {
            rows_dropped += 1;
            continue;
        }
        let id = if has_id {
            row[0].to_owned()
        } else {
            format!("row-{line}")
        };
        let mut values = Vec::with_capacity(schema.len());
        for (i, spec) in schema.features().iter().enumerate() {
            let cell = &row[i + offset];
            let v = parse_cell(spec.kind, cell).map_err(|reason| Error::Parse {
                row: line,
                column: spec.name.clone(),
                value: cell.to_owned(),
                reason,
            })?;
            values.push(v);
        }
        let target = &row[expected_cols - 1];
        let label = schema.parse_label(target).ok_or_else(|| Error::UnknownLabel {
            row: line,
            value: target.to_owned(),
        })?;
        records.push(Record::new(id, values));
        labels.push(label);
    }

    let data = LabeledDataset::new(schema.clone(), records, labels)?;
    let report = report_for(&data, rows_read, rows_dropped);
    Ok((data, report))
}

fn report_for(data: &LabeledDataset, rows_read: usize, rows_dropped: usize) -> IngestReport {
    IngestReport {
        rows_read,
        rows_dropped,
        records: data.len(),
        class_counts: data.class_counts(),
    }
}

fn parse_cell(kind: FeatureKind, cell: &str) -> std::result::Result<f64, String> {
    let v = match kind {
        FeatureKind::Boolean => match cell.to_ascii_lowercase().as_str() {
            "1" | "t" | "true" | "y" | "yes" => 1.0,
            "0" | "f" | "false" | "n" | "no" => 0.0,
            _ => return Err("boolean expected".into()),
        },
        FeatureKind::Integer | FeatureKind::Real => {
            cell.parse::<f64>().map_err(|e| e.to_string())?
        }
    };
    check_value(kind, v).map_err(str::to_owned)?;
    if v < 0.0 {
        return Err("negative value".into());
    }
    Ok(v)
}
