//! Write a dataset to a CSIB file, read it back, and validate it against a
//! schema descriptor as an external dataset would be.

use phasefuse::csib::{read_csib, write_csib};
use phasefuse::datagen::{generate_dataset, ingest_external, SchemaDescriptor, SynthConfig};

fn main() -> phasefuse::Result<()> {
    let dir = std::env::temp_dir().join("phasefuse-example");
    std::fs::create_dir_all(&dir).map_err(|e| phasefuse::Error::io(&dir, e))?;
    let path = dir.join("small.csib");

    let ds = generate_dataset(&SynthConfig {
        samples_per_cell: 2,
        ..SynthConfig::default()
    })?;
    let bytes = write_csib(&path, &ds)?;
    println!(
        "wrote {} samples, {bytes} bytes -> {}",
        ds.len(),
        path.display()
    );

    let back = read_csib(&path)?;
    println!("round trip identical: {}", back == ds);

    let schema = SchemaDescriptor::parse("classes=8\nvelocities=3\n# names are optional\n")?;
    let samples = ingest_external(&path, &schema)?;
    println!(
        "schema check passed for {} samples ({} classes)",
        samples.len(),
        schema.classes
    );
    Ok(())
}
