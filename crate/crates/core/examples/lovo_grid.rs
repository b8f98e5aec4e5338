//! Leave-one-velocity-out grid over all input configurations on a reduced
//! dataset; prints the markdown results table.

use phasefuse::datagen::{generate_dataset, SynthConfig};
use phasefuse::harness::{run_grid, GridSpec, LovoOptions};

fn main() -> phasefuse::Result<()> {
    let ds = generate_dataset(&SynthConfig {
        subcarriers: 16,
        timestamps: 48,
        samples_per_cell: 8,
        ..SynthConfig::default()
    })?;
    let mut opts = LovoOptions::desk();
    opts.hidden = 8;
    opts.train.max_epochs = 10;
    let result = run_grid(&ds, &GridSpec::full(vec![1]), &opts)?;
    print!("{}", result.to_markdown());
    Ok(())
}
