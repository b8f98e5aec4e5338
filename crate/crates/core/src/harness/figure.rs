use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Axis};

use crate::csi::{amplitude, raw_phase, LabeledSample};
use crate::error::{Error, Result};
use crate::phase::{sanitize, unwrap_temporal};

/// Number of time snapshots in an overlay export.
pub const OVERLAY_SNAPSHOTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    /// Subcarrier x time grid.
    Heatmap,
    /// Evenly spaced time snapshots, each across subcarriers.
    Overlay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureStage {
    Amplitude,
    Raw,
    Unwrapped,
    Sanitized,
}

impl FromStr for FigureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heatmap" => Ok(FigureKind::Heatmap),
            "overlay" => Ok(FigureKind::Overlay),
            other => Err(Error::Usage(format!("unknown figure kind `{other}`"))),
        }
    }
}

impl FromStr for FigureStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amplitude" => Ok(FigureStage::Amplitude),
            "raw" => Ok(FigureStage::Raw),
            "unwrapped" => Ok(FigureStage::Unwrapped),
            "sanitized" => Ok(FigureStage::Sanitized),
            other => Err(Error::Usage(format!("unknown figure stage `{other}`"))),
        }
    }
}

impl fmt::Display for FigureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FigureKind::Heatmap => "heatmap",
            FigureKind::Overlay => "overlay",
        })
    }
}

impl fmt::Display for FigureStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FigureStage::Amplitude => "amplitude",
            FigureStage::Raw => "raw",
            FigureStage::Unwrapped => "unwrapped",
            FigureStage::Sanitized => "sanitized",
        })
    }
}

fn stage_values(sample: &LabeledSample, channel: usize, stage: FigureStage) -> Result<Array2<f64>> {
    let csi = sample
        .channels
        .get(channel)
        .ok_or_else(|| Error::Usage(format!("sample has no channel {channel}")))?;
    Ok(match stage {
        FigureStage::Amplitude => amplitude(csi)?.values().clone(),
        FigureStage::Raw => raw_phase(csi)?.into_values(),
        FigureStage::Unwrapped => unwrap_temporal(&raw_phase(csi)?)?.into_values(),
        FigureStage::Sanitized => sanitize(&unwrap_temporal(&raw_phase(csi)?)?)?
            .0
            .into_values(),
    })
}

/// Time indices of the overlay snapshots: evenly spaced over `0..t`, both ends included.
fn snapshot_times(t: usize) -> Vec<usize> {
    if t <= OVERLAY_SNAPSHOTS {
        return (0..t).collect();
    }
    (0..OVERLAY_SNAPSHOTS)
        .map(|i| (i as f64 * (t - 1) as f64 / (OVERLAY_SNAPSHOTS - 1) as f64).round() as usize)
        .collect()
}

/// The grid a figure export writes: `S x T` for a heatmap, snapshots x `S`
/// for an overlay.
pub fn figure_grid(
    sample: &LabeledSample,
    channel: usize,
    kind: FigureKind,
    stage: FigureStage,
) -> Result<Array2<f64>> {
    let values = stage_values(sample, channel, stage)?;
    Ok(match kind {
        FigureKind::Heatmap => values,
        FigureKind::Overlay => values
            .select(Axis(1), &snapshot_times(values.ncols()))
            .reversed_axes()
            .as_standard_layout()
            .into_owned(),
    })
}

/// Writes [`figure_grid`] of the first channel as headerless CSV.
pub fn export_figure_data(
    sample: &LabeledSample,
    kind: FigureKind,
    stage: FigureStage,
    path: impl AsRef<Path>,
) -> Result<()> {
    let grid = figure_grid(sample, 0, kind, stage)?;
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    for row in grid.rows() {
        w.write_record(row.iter().map(|v| format!("{v:.6}")))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::{ComplexCsi, Velocity};

    fn linear_phase_sample(s: usize, t: usize) -> LabeledSample {
        let amp = Array2::from_elem((s, t), 2.0);
        let phase = Array2::from_shape_fn((s, t), |(k, ti)| {
            crate::csi::wrap_phase(0.05 * (k + 1) as f64 + 0.01 * ti as f64 - 0.3)
        });
        let csi = ComplexCsi::from_polar(&amp, &phase).unwrap();
        LabeledSample::new(vec![csi], 0, Velocity::V1).unwrap()
    }

    #[test]
    fn heatmap_shape() {
        let g = figure_grid(
            &linear_phase_sample(6, 20),
            0,
            FigureKind::Heatmap,
            FigureStage::Raw,
        )
        .unwrap();
        assert_eq!(g.dim(), (6, 20));
    }

    #[test]
    fn overlay_default_snapshots() {
        let g = figure_grid(
            &linear_phase_sample(6, 20),
            0,
            FigureKind::Overlay,
            FigureStage::Amplitude,
        )
        .unwrap();
        assert_eq!(g.dim(), (8, 6));
        assert_eq!(snapshot_times(20), vec![0, 3, 5, 8, 11, 14, 16, 19]);
    }

    #[test]
    fn sanitized_linear_phase_is_zero() {
        let g = figure_grid(
            &linear_phase_sample(6, 20),
            0,
            FigureKind::Heatmap,
            FigureStage::Sanitized,
        )
        .unwrap();
        // f32 storage bounds the agreement
        assert!(g.iter().all(|v| v.abs() < 1e-5));
    }

    #[test]
    fn unknown_names_are_usage_errors() {
        assert!(matches!("bars".parse::<FigureKind>(), Err(Error::Usage(_))));
        assert!(matches!(
            "cooked".parse::<FigureStage>(),
            Err(Error::Usage(_))
        ));
    }
}
