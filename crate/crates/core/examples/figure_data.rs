//! Export heatmap and overlay grids for every processing stage of one sample.

use phasefuse::datagen::{generate_dataset, SynthConfig};
use phasefuse::harness::{export_figure_data, FigureKind, FigureStage};

fn main() -> phasefuse::Result<()> {
    let ds = generate_dataset(&SynthConfig {
        samples_per_cell: 1,
        ..SynthConfig::default()
    })?;
    let dir = std::env::temp_dir().join("phasefuse-figures");
    std::fs::create_dir_all(&dir).map_err(|e| phasefuse::Error::io(&dir, e))?;
    let sample = &ds.samples[0];
    for kind in [FigureKind::Heatmap, FigureKind::Overlay] {
        for stage in [
            FigureStage::Amplitude,
            FigureStage::Raw,
            FigureStage::Unwrapped,
            FigureStage::Sanitized,
        ] {
            let path = dir.join(format!("{kind}_{stage}.csv"));
            export_figure_data(sample, kind, stage, &path)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}
