use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::run::{execute, PipelineOutcome, RunMode};
use crate::error::{Result, StapError};
use crate::sim::CaponSpectrum;
use crate::stap::{self, MetricCurve, MetricKind};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub stage: String,
    /// Relative to the output directory.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub started_at: f64,
    pub finished_at: f64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub outputs: Vec<OutputFile>,
    pub timings: Vec<Timing>,
    pub skipped_estimators: Vec<String>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

struct OutputWriter {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputWriter {
    fn csv(&mut self, name: &str, stage: &str) -> Result<csv::Writer<std::fs::File>> {
        let path = self.dir.join(name);
        let writer = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        self.files.push(OutputFile {
            stage: stage.to_string(),
            path: PathBuf::from(name),
        });
        Ok(writer)
    }

    fn finish(&self, mut w: csv::Writer<std::fs::File>, name: &str) -> Result<()> {
        let path = self.dir.join(name);
        w.flush().map_err(|e| StapError::io(&path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> StapError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => StapError::io(path, io),
        other => StapError::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

#[derive(Serialize)]
struct CurveRow<'a> {
    metric_kind: String,
    #[serde(rename = "estimator_name")]
    estimator: &'a str,
    abscissa: f64,
    value_db: f64,
}

#[derive(Serialize)]
struct ScreeningRow {
    cut_index: usize,
    cell_index: usize,
    center: f64,
    radius: f64,
    is_clutter: bool,
    threshold: f64,
    rho: f64,
}

#[derive(Serialize)]
struct ConvergenceRow<'a> {
    cut_index: usize,
    #[serde(rename = "estimator_name")]
    estimator: &'a str,
    iteration: usize,
    objective: f64,
}

#[derive(Serialize)]
struct CaponRow {
    doppler: f64,
    spatial: f64,
    power_db: f64,
}

fn write_curves<'a>(
    out: &mut OutputWriter,
    name: &str,
    curves: impl Iterator<Item = &'a MetricCurve>,
) -> Result<()> {
    let curves: Vec<&MetricCurve> = curves.collect();
    if curves.is_empty() {
        return Ok(());
    }
    let path = out.dir.join(name);
    let mut w = out.csv(name, "metrics")?;
    for c in curves {
        for (&x, &y) in c.abscissa.iter().zip(&c.values) {
            w.serialize(CurveRow {
                metric_kind: c.kind.to_string(),
                estimator: &c.estimator,
                abscissa: x,
                value_db: y,
            })
            .map_err(|e| csv_error(&path, e))?;
        }
    }
    out.finish(w, name)
}

fn write_screening(out: &mut OutputWriter, outcome: &PipelineOutcome) -> Result<()> {
    let name = "screening.csv";
    let path = out.dir.join(name);
    let mut w = out.csv(name, "screen")?;
    for cut in &outcome.cuts {
        for s in &cut.screening.summaries {
            w.serialize(ScreeningRow {
                cut_index: cut.cut,
                cell_index: s.cell_index,
                center: s.center,
                radius: s.radius,
                is_clutter: s.is_clutter,
                threshold: s.threshold_used,
                rho: s.rho,
            })
            .map_err(|e| csv_error(&path, e))?;
        }
    }
    out.finish(w, name)
}

fn write_convergence(out: &mut OutputWriter, outcome: &PipelineOutcome) -> Result<()> {
    let has_any = outcome
        .cuts
        .iter()
        .any(|c| c.estimates.iter().any(|e| e.ccm.is_some()));
    if !has_any {
        return Ok(());
    }
    let name = "convergence.csv";
    let path = out.dir.join(name);
    let mut w = out.csv(name, "optimize")?;
    for cut in &outcome.cuts {
        for e in &cut.estimates {
            let Some(ccm) = &e.ccm else { continue };
            for (iteration, &objective) in ccm.objective_trace.iter().enumerate() {
                w.serialize(ConvergenceRow {
                    cut_index: cut.cut,
                    estimator: e.estimator.label(),
                    iteration,
                    objective,
                })
                .map_err(|e| csv_error(&path, e))?;
            }
        }
    }
    out.finish(w, name)
}

fn write_capon(out: &mut OutputWriter, capon: &CaponSpectrum) -> Result<()> {
    let name = "capon.csv";
    let path = out.dir.join(name);
    let mut w = out.csv(name, "capon")?;
    for (i, &fd) in capon.doppler.iter().enumerate() {
        for (j, &fs) in capon.spatial.iter().enumerate() {
            w.serialize(CaponRow {
                doppler: fd,
                spatial: fs,
                power_db: stap::db(capon.power[i][j]),
            })
            .map_err(|e| csv_error(&path, e))?;
        }
    }
    out.finish(w, name)
}

/// Write every table an outcome supports into `dir`; returns the files written.
pub fn write_outputs(outcome: &PipelineOutcome, dir: &Path) -> Result<Vec<OutputFile>> {
    let mut out = OutputWriter {
        dir: dir.to_path_buf(),
        files: Vec::new(),
    };
    write_all(&mut out, outcome)?;
    Ok(out.files)
}

fn write_all(out: &mut OutputWriter, outcome: &PipelineOutcome) -> Result<()> {
    write_screening(out, outcome)?;
    write_curves(
        out,
        "improvement_factor.csv",
        outcome.curves_of(MetricKind::ImprovementFactor),
    )?;
    write_curves(
        out,
        "beampattern.csv",
        outcome.curves.iter().filter(|c| {
            matches!(
                c.kind,
                MetricKind::BeampatternDoppler | MetricKind::BeampatternSpatial
            )
        }),
    )?;
    write_curves(
        out,
        "output_power.csv",
        outcome.curves_of(MetricKind::OutputPower),
    )?;
    write_curves(out, "scnr.csv", outcome.curves_of(MetricKind::OutputScnr))?;
    write_convergence(out, outcome)?;
    if let Some(capon) = &outcome.capon {
        write_capon(out, capon)?;
    }
    Ok(())
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| StapError::io(&path, e))
}

/// Execute the configured stages and write their tables and a manifest into
/// `cfg.output_dir`. On failure the manifest is still written, with status
/// `failed` and whatever files were completed.
pub fn run_pipeline(cfg: &PipelineConfig, mode: RunMode) -> Result<RunManifest> {
    let started_at = unix_now();
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| StapError::io(dir, e))?;

    let mut manifest = RunManifest {
        config_hash: cfg.hash(),
        seed: cfg.scenario.rng_seed,
        started_at,
        finished_at: started_at,
        status: RunStatus::Failed,
        error: None,
        outputs: Vec::new(),
        timings: Vec::new(),
        skipped_estimators: Vec::new(),
    };

    let result = execute(cfg, mode).and_then(|outcome| {
        manifest.timings = outcome
            .timings
            .iter()
            .map(|t| Timing {
                stage: t.stage.to_string(),
                seconds: t.seconds,
            })
            .collect();
        manifest.skipped_estimators = outcome.skipped.iter().map(|e| e.to_string()).collect();
        let mut partial = OutputWriter {
            dir: dir.clone(),
            files: Vec::new(),
        };
        let written = write_all(&mut partial, &outcome);
        manifest.outputs = partial.files;
        written
    });

    manifest.outputs.push(OutputFile {
        stage: "manifest".into(),
        path: PathBuf::from(MANIFEST_FILE),
    });
    manifest.finished_at = unix_now();
    match result {
        Ok(()) => {
            manifest.status = RunStatus::Complete;
            write_manifest(dir, &manifest)?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.error = Some(e.chain());
            write_manifest(dir, &manifest)?;
            Err(e)
        }
    }
}
