//! Regenerates the bundled stand-in dataset.
//!
//! cargo run -p hypex-core --example gen_thyroid -- data/thyroid_standin.csv

use std::fs::File;
use std::io::BufWriter;

use hypex_core::synthetic::{write_thyroid_standin, STANDIN_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "data/thyroid_standin.csv".to_owned());
    write_thyroid_standin(BufWriter::new(File::create(&path)?), STANDIN_SEED)?;
    eprintln!("wrote {path}");
    Ok(())
}
