//! Shared fixtures for the benchmarks.

use hypex_core::gbdt::train;
use hypex_core::synthetic::{thyroid_standin, STANDIN_SEED};
use hypex_core::{GbdtModel, LabeledDataset, TrainConfig};

pub fn dataset() -> LabeledDataset {
    thyroid_standin(STANDIN_SEED).expect("stand-in data").0
}

pub fn model(data: &LabeledDataset) -> GbdtModel {
    train(data, &TrainConfig::default()).expect("train")
}
