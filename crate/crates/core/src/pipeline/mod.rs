//! End-to-end processing: data in, training windows, estimators, filters, tables out.

mod config;
mod cpi;
mod output;
mod run;
mod window;

pub use config::{Estimator, InputConfig, MetricsConfig, PipelineConfig, WindowConfig};
pub use cpi::{load_cpi_file, write_cpi_file};
pub use output::{
    run_pipeline, write_outputs, OutputFile, RunManifest, RunStatus, Timing, MANIFEST_FILE,
};
pub use run::{
    execute, load_dataset, output_scnr_sweep, CutResult, EstimateResult, PipelineOutcome, RunMode,
    StageTiming, SCM_NOISE_LOAD,
};
pub use window::select_training_window;
