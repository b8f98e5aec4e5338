//! Single-threaded timing of the five preprocessing pipelines (build with
//! `--release` for meaningful numbers).

use phasefuse::datagen::{generate_dataset, SynthConfig};
use phasefuse::harness::bench_preprocessing;

fn main() -> phasefuse::Result<()> {
    let ds = generate_dataset(&SynthConfig::default())?;
    let result = bench_preprocessing(&ds, 5)?;
    println!("{result}");
    Ok(())
}
