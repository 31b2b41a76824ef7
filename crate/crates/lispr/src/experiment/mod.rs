//! The reproduction harness: run configurations, seeded training runs with
//! learning-curve statistics, parameter sweeps, curve comparison, and
//! heatmap exports. Everything lands on disk as plain CSV and JSON so any
//! plotter can pick it up.

mod compare;
mod config;
mod curve;
mod heatmap;
mod runner;
mod sweep;

pub use compare::{compare_curves, CompareSummary};
pub use config::{build_task, AlgorithmChoice, ExperimentError, RunConfig, TaskSetup};
pub use curve::{aggregate_curves, CurveRow, LearningCurve, CURVE_HEADER};
pub use heatmap::{
    export_heatmap, ones_connected, write_grid_csv, HeatmapExport, HeatmapTable,
};
pub use runner::{
    execute, read_meta, run, RunArtifacts, RunMeta, RunOutcome, CURVE_FILE, G_FILE, META_FILE,
    Q_FILE, V_FILE,
};
pub use sweep::{settings_label, sweep, SweepConfig, SweepOutcome, SweepPoint, SUMMARY_FILE};
