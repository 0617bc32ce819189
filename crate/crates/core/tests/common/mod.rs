#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use hypex_core::gbdt::train;
use hypex_core::synthetic::{thyroid_standin, STANDIN_SEED};
use hypex_core::{
    ingest_csv, stratified_split, DatasetSchema, GbdtModel, IngestReport, LabeledDataset, MissingPolicy,
    TrainConfig,
};

/// Environment variable naming a real thyroid CSV to use instead of the
/// bundled stand-in.
pub const DATA_ENV: &str = "THYROID_DATA";

pub struct Thyroid {
    pub source: String,
    pub data: LabeledDataset,
    pub report: IngestReport,
}

pub fn standin_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/thyroid_standin.csv")
}

/// The dataset under test: `$THYROID_DATA` if set, else the bundled
/// stand-in file, else the stand-in regenerated in memory.
pub fn thyroid() -> &'static Thyroid {
    static CELL: OnceLock<Thyroid> = OnceLock::new();
    CELL.get_or_init(|| {
        let schema = DatasetSchema::thyroid();
        if let Ok(p) = std::env::var(DATA_ENV) {
            let (data, report) = ingest_csv(p.as_ref(), &schema, MissingPolicy::DropRow).expect("ingest THYROID_DATA");
            return Thyroid {
                source: p,
                data,
                report,
            };
        }
        let path = standin_path();
        if path.exists() {
            let (data, report) = ingest_csv(&path, &schema, MissingPolicy::DropRow).expect("ingest stand-in");
            return Thyroid {
                source: format!("{} (synthetic stand-in)", path.display()),
                data,
                report,
            };
        }
        let (data, report) = thyroid_standin(STANDIN_SEED).expect("generate stand-in");
        Thyroid {
            source: "in-memory synthetic stand-in".into(),
            data,
            report,
        }
    })
}

pub struct Trained {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub model: GbdtModel,
}

/// Default-config model on a stratified 80/20 split with seed 0.
pub fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let (train_set, test) = stratified_split(&thyroid().data, 0.2, 0).expect("split");
        let model = train(&train_set, &TrainConfig::default()).expect("train");
        Trained {
            train: train_set,
            test,
            model,
        }
    })
}

/// A small, fast model for tests that only need a working classifier.
pub fn small_model() -> &'static GbdtModel {
    static CELL: OnceLock<GbdtModel> = OnceLock::new();
    CELL.get_or_init(|| {
        let config = TrainConfig {
            n_rounds: 25,
            ..TrainConfig::default()
        };
        train(&thyroid().data, &config).expect("train")
    })
}
