//! Experiment drivers: leave-one-velocity-out training grids, the
//! preprocessing timing benchmark, and figure-data export.

mod bench;
mod figure;
mod lovo;

pub use bench::{bench_preprocessing, BenchResult, MethodTiming, PreprocMethod};
pub use figure::{export_figure_data, figure_grid, FigureKind, FigureStage, OVERLAY_SNAPSHOTS};
pub use lovo::{
    confusion_csv, prepare, run_grid, run_lovo, run_lovo_prepared, run_lovo_trained, CellResult,
    ExperimentResult, GridSpec, LovoOptions, Prepared,
};
