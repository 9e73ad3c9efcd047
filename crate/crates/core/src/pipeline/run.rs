use std::collections::BTreeSet;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{Estimator, PipelineConfig};
use super::cpi::load_cpi_file;
use super::window::select_training_window;
use crate::error::{Result, StageContext, StapError};
use crate::grassmann::{estimate_ccm, extract_subspace, CcmEstimate, GrassmannPoint};
use crate::linalg::{self, CMat};
use crate::screening::{screen, ScreeningResult};
use crate::sim::{
    capon_spectrum, inject_targets, simulate, CaponSpectrum, SpaceTimeDataset, TargetAmplitude,
};
use crate::stap::{
    self, apply_filter, beampattern_slices, improvement_factor, output_scnr, MetricCurve,
    MetricKind, StapWeights, WeightSolver,
};
use crate::thpd::{thpd_from_snapshot, ThpdCovariance};

/// Load, in units of the estimated noise floor, that lets the plain SCM be
/// factored when `L < MN`. Much smaller loads leave condition numbers near
/// `1e8`, where weights stop being reproducible under a rescaling of the data.
pub const SCM_NOISE_LOAD: f64 = 1.0;

/// Which parts of the pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Everything: per-CUT filtering, screening and all metric curves.
    Full,
    /// THPD construction and Brauer screening only.
    Screen,
    /// Estimators and metric curves for the first CUT only.
    Metrics,
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub estimator: Estimator,
    pub covariance: CMat,
    /// Weights for the configured look direction.
    pub weights: StapWeights,
    /// `wᴴ x` at the CUT.
    pub output: Complex64,
    /// Optimizer details for the Grassmann estimators.
    pub ccm: Option<CcmEstimate>,
}

#[derive(Debug, Clone)]
pub struct CutResult {
    pub cut: usize,
    pub training_cells: Vec<usize>,
    pub screening: ScreeningResult,
    pub estimates: Vec<EstimateResult>,
}

impl CutResult {
    pub fn estimate(&self, estimator: Estimator) -> Option<&EstimateResult> {
        self.estimates.iter().find(|e| e.estimator == estimator)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub cuts: Vec<CutResult>,
    pub curves: Vec<MetricCurve>,
    pub capon: Option<CaponSpectrum>,
    pub timings: Vec<StageTiming>,
    /// Requested estimators that could not run (e.g. `optimal` on measured data).
    pub skipped: Vec<Estimator>,
}

impl PipelineOutcome {
    pub fn curves_of(&self, kind: MetricKind) -> impl Iterator<Item = &MetricCurve> {
        self.curves.iter().filter(move |c| c.kind == kind)
    }

    pub fn curve(&self, kind: MetricKind, estimator: Estimator) -> Option<&MetricCurve> {
        self.curves_of(kind)
            .find(|c| c.estimator == estimator.label())
    }
}

struct Timer {
    timings: Vec<StageTiming>,
}

impl Timer {
    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().stage(stage);
        self.timings.push(StageTiming {
            stage,
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Simulated data for the configured scenario, or the configured input file.
pub fn load_dataset(cfg: &PipelineConfig) -> Result<SpaceTimeDataset> {
    match &cfg.input {
        Some(input) => {
            let mut data = load_cpi_file(
                &input.path,
                cfg.scenario.num_elements,
                cfg.scenario.num_pulses,
            )?;
            data.config = cfg.scenario.clone();
            data.config.num_range_cells = data.snapshots.len();
            Ok(data)
        }
        None => simulate(&cfg.scenario, &cfg.targets),
    }
}

/// Per-cell Toeplitz covariance and its dominant subspace.
struct CellModel {
    thpd: ThpdCovariance,
    subspace: GrassmannPoint,
}

fn build_cell_models(
    data: &SpaceTimeDataset,
    cells: &BTreeSet<usize>,
    cfg: &PipelineConfig,
    subspace_dim: usize,
) -> Result<Vec<Option<CellModel>>> {
    let built = cells
        .par_iter()
        .map(|&cell| {
            let snapshot = data.snapshot(cell)?;
            let (thpd, _) = thpd_from_snapshot(snapshot.data.as_slice(), cell, &cfg.burg)?;
            let subspace = extract_subspace(&thpd.to_dense(), subspace_dim, cell)?;
            Ok((cell, CellModel { thpd, subspace }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut models: Vec<Option<CellModel>> = (0..data.snapshots.len()).map(|_| None).collect();
    for (cell, model) in built {
        models[cell] = Some(model);
    }
    Ok(models)
}

fn subspace_dim(cfg: &PipelineConfig, data: &SpaceTimeDataset) -> usize {
    cfg.optimizer
        .subspace_dim
        .unwrap_or_else(|| data.config.brennan_rank())
        .min(data.dim())
}

fn training_cells(cfg: &PipelineConfig, num_cells: usize, cut: usize) -> Result<Vec<usize>> {
    match &cfg.window.training_cells {
        Some(cells) => {
            if let Some(&bad) = cells.iter().find(|&&c| c >= num_cells) {
                return Err(StapError::InvalidInput(format!(
                    "training cell {bad} outside dataset of {num_cells} cells"
                )));
            }
            Ok(cells.clone())
        }
        None => select_training_window(
            num_cells,
            cut,
            cfg.window.num_training,
            cfg.window.num_guard,
        ),
    }
}

/// Covariance estimate for one estimator on one training window.
fn estimate_covariance(
    estimator: Estimator,
    cfg: &PipelineConfig,
    data: &SpaceTimeDataset,
    training: &[usize],
    screening: &ScreeningResult,
    models: &[Option<CellModel>],
) -> Result<Option<(CMat, Option<CcmEstimate>)>> {
    let model = |c: &usize| {
        models[*c]
            .as_ref()
            .expect("model built for every training cell")
    };
    let samples = || -> Vec<_> {
        training
            .iter()
            .map(|&c| data.snapshots[c].clone())
            .collect()
    };
    let grassmann = |cells: &[usize]| -> Result<(CMat, Option<CcmEstimate>)> {
        let points: Vec<GrassmannPoint> = cells.iter().map(|c| model(c).subspace.clone()).collect();
        let est = estimate_ccm(&points, &cfg.optimizer)?;
        Ok((est.covariance.clone(), Some(est)))
    };
    let out = match estimator {
        Estimator::Bgvcf => grassmann(&screening.clutter_cells)?,
        Estimator::Gvcf => grassmann(training)?,
        Estimator::EuclideanMean => {
            let mats: Vec<ThpdCovariance> =
                training.iter().map(|c| model(c).thpd.clone()).collect();
            (stap::euclidean_mean_ccm(&mats, None)?, None)
        }
        Estimator::Lsmi => (stap::lsmi(&samples(), cfg.loading_factor)?, None),
        Estimator::Scm => (stap::lsmi(&samples(), SCM_NOISE_LOAD)?, None),
        Estimator::Gip => {
            let all = samples();
            let kept = stap::gip_select(&all, None, cfg.gip_keep_fraction)?;
            let subset: Vec<_> = kept.iter().map(|&i| all[i].clone()).collect();
            (stap::lsmi(&subset, cfg.loading_factor)?, None)
        }
        Estimator::Optimal => match &data.ideal_clutter_covariance {
            Some(r) => (r.clone(), None),
            None => return Ok(None),
        },
    };
    Ok(Some(out))
}

fn process_cut(
    cfg: &PipelineConfig,
    data: &SpaceTimeDataset,
    cut: usize,
    models: &[Option<CellModel>],
    mode: RunMode,
) -> Result<CutResult> {
    let training = training_cells(cfg, data.snapshots.len(), cut)?;
    let thpds: Vec<ThpdCovariance> = training
        .iter()
        .map(|&c| models[c].as_ref().expect("model built").thpd.clone())
        .collect();
    let screening = screen(&thpds).stage("screen")?;
    let mut estimates = Vec::new();
    if mode != RunMode::Screen {
        let look = data
            .config
            .steering(cfg.metrics.look_doppler, cfg.metrics.look_spatial)?;
        let cut_snapshot = data.snapshot(cut)?;
        for &estimator in &cfg.estimators {
            let Some((covariance, ccm)) =
                estimate_covariance(estimator, cfg, data, &training, &screening, models)
                    .map_err(|e| e.in_stage(estimator.label()))?
            else {
                continue;
            };
            let weights = WeightSolver::new(&covariance, estimator.label())?.weights(&look)?;
            let output = apply_filter(&weights, cut_snapshot)?;
            estimates.push(EstimateResult {
                estimator,
                covariance,
                weights,
                output,
                ccm,
            });
        }
    }
    Ok(CutResult {
        cut,
        training_cells: training,
        screening,
        estimates,
    })
}

fn run_cuts(
    cfg: &PipelineConfig,
    data: &SpaceTimeDataset,
    cuts: &[usize],
    mode: RunMode,
    timer: &mut Timer,
) -> Result<Vec<CutResult>> {
    for &cut in cuts {
        if cut >= data.snapshots.len() {
            return Err(StapError::InvalidInput(format!(
                "CUT {cut} outside dataset of {} cells",
                data.snapshots.len()
            )));
        }
    }
    let mut needed = BTreeSet::new();
    for &cut in cuts {
        needed.extend(training_cells(cfg, data.snapshots.len(), cut)?);
    }
    let s = subspace_dim(cfg, data);
    let models = timer.run("thpd", || build_cell_models(data, &needed, cfg, s))?;
    timer.run("estimate", || {
        cuts.par_iter()
            .map(|&cut| process_cut(cfg, data, cut, &models, mode))
            .collect::<Result<Vec<_>>>()
    })
}

fn metric_curves(
    cfg: &PipelineConfig,
    data: &SpaceTimeDataset,
    cut: &CutResult,
) -> Result<Vec<MetricCurve>> {
    let grid = cfg.metrics.grid();
    let (t, s) = (data.config.temporal_len(), data.config.spatial_len());
    let mut curves = Vec::new();
    if let Some(ideal) = &data.ideal_clutter_covariance {
        for e in &cut.estimates {
            curves.push(improvement_factor(
                &e.covariance,
                ideal,
                e.estimator.label(),
                &grid,
                cfg.metrics.look_spatial,
                t,
                s,
            )?);
        }
    }
    for e in &cut.estimates {
        for slice in cfg.metrics.slices() {
            curves.push(beampattern_slices(&e.weights, slice, &grid, t, s)?);
        }
    }
    Ok(curves)
}

fn output_power_curves(cfg: &PipelineConfig, cuts: &[CutResult]) -> Result<Vec<MetricCurve>> {
    let mut curves = Vec::new();
    for &estimator in &cfg.estimators {
        let (cells, values): (Vec<f64>, Vec<f64>) = cuts
            .iter()
            .filter_map(|c| {
                c.estimate(estimator)
                    .map(|e| (c.cut as f64, stap::db(e.output.norm_sqr())))
            })
            .unzip();
        if !cells.is_empty() {
            curves.push(MetricCurve::new(
                MetricKind::OutputPower,
                estimator.label(),
                cells,
                values,
            )?);
        }
    }
    Ok(curves)
}

/// Output SCNR versus input SCNR at the first CUT, with every configured target
/// rescaled to the input SCNR (per-channel signal power over the mean per-channel
/// clutter-plus-noise power).
pub fn output_scnr_sweep(
    cfg: &PipelineConfig,
    clutter: &SpaceTimeDataset,
) -> Result<Vec<MetricCurve>> {
    let ideal = clutter.ideal_clutter_covariance.as_ref().ok_or_else(|| {
        StapError::Config("output-SCNR sweep needs simulated data with a known covariance".into())
    })?;
    let cut = *cfg.window.cuts()?.first().expect("cuts() is non-empty");
    let channel_power = linalg::mean_diagonal(ideal);
    let look = clutter
        .config
        .steering(cfg.metrics.look_doppler, cfg.metrics.look_spatial)?;

    let per_point = cfg
        .metrics
        .scnr_sweep_db
        .iter()
        .map(|&scnr_db| {
            let amplitude = (linalg::from_db(scnr_db) * channel_power).sqrt();
            let targets: Vec<_> = cfg
                .targets
                .iter()
                .cloned()
                .map(|mut t| {
                    t.amplitude = TargetAmplitude::Complex([amplitude, 0.0]);
                    t
                })
                .collect();
            let data = inject_targets(clutter.clone(), &targets)?;
            let mut timer = Timer {
                timings: Vec::new(),
            };
            let result = run_cuts(cfg, &data, &[cut], RunMode::Metrics, &mut timer)?
                .pop()
                .expect("one CUT requested");
            let signal = look.scale(amplitude);
            result
                .estimates
                .iter()
                .map(|e| Ok((e.estimator, output_scnr(&e.weights, &signal, ideal)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut curves = Vec::new();
    for &estimator in &cfg.estimators {
        let values: Vec<f64> = per_point
            .iter()
            .filter_map(|pt| pt.iter().find(|(e, _)| *e == estimator).map(|(_, v)| *v))
            .collect();
        if values.len() == cfg.metrics.scnr_sweep_db.len() && !values.is_empty() {
            curves.push(MetricCurve::new(
                MetricKind::OutputScnr,
                estimator.label(),
                cfg.metrics.scnr_sweep_db.clone(),
                values,
            )?);
        }
    }
    Ok(curves)
}

/// Run the configured stages in memory, without writing anything.
pub fn execute(cfg: &PipelineConfig, mode: RunMode) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let mut timer = Timer {
        timings: Vec::new(),
    };
    let data = timer.run("load", || load_dataset(cfg))?;
    let all_cuts = cfg.window.cuts()?;
    let cuts = if mode == RunMode::Metrics {
        &all_cuts[..1]
    } else {
        &all_cuts[..]
    };
    let results = run_cuts(cfg, &data, cuts, mode, &mut timer)?;

    let skipped: Vec<Estimator> = cfg
        .estimators
        .iter()
        .copied()
        .filter(|e| mode != RunMode::Screen && results[0].estimate(*e).is_none())
        .collect();
    for e in &skipped {
        log::warn!("estimator `{e}` skipped: no ideal covariance for loaded data");
    }

    let mut curves = Vec::new();
    let mut capon = None;
    if mode != RunMode::Screen {
        curves.extend(timer.run("metrics", || metric_curves(cfg, &data, &results[0]))?);
        if mode == RunMode::Full {
            curves.extend(output_power_curves(cfg, &results)?);
        }
        if !cfg.metrics.scnr_sweep_db.is_empty() {
            if data.ideal_clutter_covariance.is_some() {
                let clutter = simulate(&cfg.scenario, &[])?;
                curves.extend(timer.run("scnr_sweep", || output_scnr_sweep(cfg, &clutter))?);
            } else {
                log::warn!("output-SCNR sweep skipped: needs simulated data");
            }
        }
        if cfg.metrics.capon {
            if let Some(ideal) = &data.ideal_clutter_covariance {
                let grid = cfg.metrics.grid();
                capon = Some(timer.run("capon", || {
                    capon_spectrum(
                        ideal,
                        data.config.temporal_len(),
                        data.config.spatial_len(),
                        &grid,
                        &grid,
                    )
                })?);
            }
        }
    }

    Ok(PipelineOutcome {
        cuts: results,
        curves,
        capon,
        timings: timer.timings,
        skipped,
    })
}
