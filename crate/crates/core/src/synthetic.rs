//! Deterministic stand-in for the thyroid dataset.
//!
//! The public thyroid source is not bundled. This generator produces a file
//! with the same 20-column feature system, the same post-cleaning class
//! counts (6385 / 582 / 175) and a number of rows carrying `?` markers that
//! ingestion drops. Lab values follow simple per-class log-normal and normal
//! laws: suppressed TSH with raised thyroid hormones for hyperthyroid,
//! raised TSH with lowered hormones for hypothyroid, overlapping tails so
//! the minority classes stay hard.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::dataset::{ingest_reader, IngestReport, LabeledDataset, MissingPolicy};
use crate::error::{Error, Result};
use crate::schema::{DatasetSchema, NUM_CLASSES};

/// Complete records per class after cleaning.
pub const STANDIN_CLASS_COUNTS: [usize; NUM_CLASSES] = [6385, 582, 175];
/// Extra rows per class that carry a missing marker.
pub const STANDIN_MISSING_ROWS: [usize; NUM_CLASSES] = [420, 38, 12];
pub const STANDIN_SEED: u64 = 20_240_601;

struct Profile {
    age: (f64, f64),
    male: f64,
    on_thyroxine: f64,
    antithyroid: f64,
    surgery: f64,
    i131: f64,
    query_hypo: f64,
    query_hyper: f64,
    goitre: f64,
    tsh_median: f64,
    tsh_sigma: f64,
    t3: (f64, f64),
    tt4: (f64, f64),
    t4u: (f64, f64),
}

const PROFILES: [Profile; NUM_CLASSES] = [
    Profile {
        age: (52.0, 19.0),
        male: 0.32,
        on_thyroxine: 0.12,
        antithyroid: 0.01,
        surgery: 0.014,
        i131: 0.015,
        query_hypo: 0.06,
        query_hyper: 0.06,
        goitre: 0.01,
        tsh_median: 1.5,
        tsh_sigma: 0.6,
        t3: (1.95, 0.45),
        tt4: (108.0, 22.0),
        t4u: (0.97, 0.14),
    },
    Profile {
        age: (48.0, 18.0),
        male: 0.18,
        on_thyroxine: 0.03,
        antithyroid: 0.06,
        surgery: 0.01,
        i131: 0.03,
        query_hypo: 0.05,
        query_hyper: 0.2,
        goitre: 0.03,
        tsh_median: 0.03,
        tsh_sigma: 0.9,
        t3: (3.2, 1.0),
        tt4: (160.0, 35.0),
        t4u: (1.05, 0.18),
    },
    Profile {
        age: (55.0, 18.0),
        male: 0.25,
        on_thyroxine: 0.05,
        antithyroid: 0.01,
        surgery: 0.04,
        i131: 0.02,
        query_hypo: 0.2,
        query_hyper: 0.05,
        goitre: 0.02,
        tsh_median: 18.0,
        tsh_sigma: 0.75,
        t3: (1.3, 0.5),
        tt4: (68.0, 22.0),
        t4u: (0.95, 0.15),
    },
];

fn round_to(v: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (v * f).round() / f
}

fn normal(rng: &mut ChaCha8Rng, (mean, sd): (f64, f64)) -> f64 {
    Normal::new(mean, sd).expect("valid normal").sample(rng)
}

fn coin(rng: &mut ChaCha8Rng, p: f64) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// One patient row in schema order.
fn patient(rng: &mut ChaCha8Rng, class: usize) -> Vec<f64> {
    let p = &PROFILES[class];
    let age = normal(rng, p.age).round().clamp(1.0, 94.0);
    let sex = coin(rng, p.male);
    let on_thyroxine = coin(rng, p.on_thyroxine);
    let antithyroid = coin(rng, p.antithyroid);
    let sick = coin(rng, 0.04);
    let pregnant = if sex == 0.0 && (16.0..=45.0).contains(&age) {
        coin(rng, 0.04)
    } else {
        0.0
    };
    let surgery = coin(rng, p.surgery);
    let i131 = coin(rng, p.i131);
    let query_hypo = coin(rng, p.query_hypo);
    let query_hyper = coin(rng, p.query_hyper);
    let lithium = coin(rng, 0.01);
    let goitre = coin(rng, p.goitre);
    let tumor = coin(rng, 0.025);
    let hypopituitary = coin(rng, 0.001);
    let psych = coin(rng, 0.05);

    // Negative patients on replacement therapy run a lower TSH.
    let (median, sigma) = if class == 0 && on_thyroxine == 1.0 {
        (0.6, 1.0)
    } else {
        (p.tsh_median, p.tsh_sigma)
    };
    let tsh = LogNormal::new(median.ln(), sigma)
        .expect("valid lognormal")
        .sample(rng);
    let tsh = round_to(tsh.clamp(0.005, 500.0), 3);
    let t3 = round_to(normal(rng, p.t3).max(0.1), 1);
    let tt4 = round_to(normal(rng, p.tt4).max(2.0), 0);
    let t4u = round_to(normal(rng, p.t4u).max(0.25), 2);
    let fti = round_to((tt4 / t4u + normal(rng, (0.0, 4.0))).max(1.0), 0);

    vec![
        age,
        sex,
        on_thyroxine,
        antithyroid,
        sick,
        pregnant,
        surgery,
        i131,
        query_hypo,
        query_hyper,
        lithium,
        goitre,
        tumor,
        hypopituitary,
        psych,
        tsh,
        t3,
        tt4,
        t4u,
        fti,
    ]
}

/// Writes the stand-in raw file (with missing markers) for the bundled
/// thyroid schema. Rows are shuffled so classes interleave.
pub fn write_thyroid_standin<W: Write>(out: W, seed: u64) -> Result<()> {
    let schema = DatasetSchema::thyroid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for class in 0..NUM_CLASSES {
        let total = STANDIN_CLASS_COUNTS[class] + STANDIN_MISSING_ROWS[class];
        for i in 0..total {
            let values = patient(&mut rng, class);
            let mut cells: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            if i >= STANDIN_CLASS_COUNTS[class] {
                // blank out one lab value, as unmeasured labs are the usual gap
                let lab = 15 + rng.random_range(0..5);
                cells[lab] = "?".to_owned();
            }
            cells.push(schema.classes()[class].to_lowercase());
            rows.push((class, cells));
        }
    }
    // Fisher-Yates with the same stream keeps the file reproducible.
    for i in (1..rows.len()).rev() {
        let j = rng.random_range(0..=i);
        rows.swap(i, j);
    }

    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = schema.names().map(str::to_owned).collect();
    header.push("target".into());
    w.write_record(&header).map_err(|e| Error::Malformed(e.to_string()))?;
    for (_, cells) in rows {
        w.write_record(&cells).map_err(|e| Error::Malformed(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Malformed(e.to_string()))
}

/// Generates and ingests the stand-in in memory.
pub fn thyroid_standin(seed: u64) -> Result<(LabeledDataset, IngestReport)> {
    let mut buf = Vec::new();
    write_thyroid_standin(&mut buf, seed)?;
    ingest_reader(buf.as_slice(), &DatasetSchema::thyroid(), MissingPolicy::DropRow)
}
