//! Adaptive weights, baseline covariance estimators and filter metrics.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StapError};
use crate::linalg::{self, CMat, CVec, HermitianSolver};
use crate::sim::{steering_vector, SpaceTimeSnapshot};
use crate::thpd::ThpdCovariance;

/// Floor applied to dB values of zero powers.
pub const DB_FLOOR: f64 = -300.0;

pub const DEFAULT_LOADING_FACTOR: f64 = 10.0;
pub const DEFAULT_GIP_KEEP: f64 = 0.8;

/// Eigenvalues below this fraction of the largest count as zero for the noise-floor estimate.
const RANK_TOL: f64 = 1e-10;

/// Guarded `10 log10`.
pub fn db(power: f64) -> f64 {
    if power > 0.0 {
        linalg::to_db(power).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StapWeights {
    pub w: CVec,
    pub steering: CVec,
    pub estimator: String,
}

impl StapWeights {
    /// `wᴴ v`, which is 1 up to rounding.
    pub fn gain(&self) -> Complex64 {
        self.w.dotc(&self.steering)
    }
}

/// A factored covariance estimate that produces weights for any steering vector.
pub struct WeightSolver {
    solver: HermitianSolver,
    estimator: String,
    dim: usize,
}

impl WeightSolver {
    pub fn new(r: &CMat, estimator: &str) -> Result<Self> {
        if !r.is_square() {
            return Err(StapError::Dimension(format!(
                "estimator `{estimator}`: covariance is {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        let solver = HermitianSolver::new(r).ok_or_else(|| StapError::Singular {
            estimator: estimator.to_string(),
        })?;
        if solver.condition_estimate() > linalg::CONDITION_WARN {
            log::warn!(
                "estimator `{estimator}`: covariance condition estimate {:.3e}",
                solver.condition_estimate()
            );
        }
        Ok(WeightSolver {
            solver,
            estimator: estimator.to_string(),
            dim: r.nrows(),
        })
    }

    pub fn estimator(&self) -> &str {
        &self.estimator
    }

    /// `w = R̂⁻¹v / (vᴴR̂⁻¹v)`.
    pub fn weights(&self, v: &CVec) -> Result<StapWeights> {
        if v.len() != self.dim {
            return Err(StapError::Dimension(format!(
                "steering vector has length {}, covariance is {}x{}",
                v.len(),
                self.dim,
                self.dim
            )));
        }
        let x = self.solver.solve(v);
        let denom = v.dotc(&x);
        if !(denom.re > 0.0) || !denom.re.is_finite() {
            return Err(StapError::Singular {
                estimator: self.estimator.clone(),
            });
        }
        Ok(StapWeights {
            w: x / denom,
            steering: v.clone(),
            estimator: self.estimator.clone(),
        })
    }
}

pub fn stap_weights(r: &CMat, v: &CVec, estimator: &str) -> Result<StapWeights> {
    WeightSolver::new(r, estimator)?.weights(v)
}

/// `y = wᴴ x`.
pub fn apply_filter(w: &StapWeights, x: &SpaceTimeSnapshot) -> Result<Complex64> {
    if w.w.len() != x.data.len() {
        return Err(StapError::Dimension(format!(
            "weights of length {} applied to snapshot of length {} (cell {})",
            w.w.len(),
            x.data.len(),
            x.cell_index
        )));
    }
    Ok(w.w.dotc(&x.data))
}

fn check_samples(samples: &[SpaceTimeSnapshot]) -> Result<usize> {
    let first = samples
        .first()
        .ok_or_else(|| StapError::InvalidInput("no training samples".into()))?;
    let k = first.len();
    if let Some(bad) = samples.iter().find(|s| s.len() != k) {
        return Err(StapError::Dimension(format!(
            "training sample for cell {} has length {}, expected {k}",
            bad.cell_index,
            bad.len()
        )));
    }
    Ok(k)
}

/// Sample covariance `(1/L) Σ x xᴴ`.
pub fn scm(samples: &[SpaceTimeSnapshot]) -> Result<CMat> {
    let k = check_samples(samples)?;
    let mut acc = CMat::zeros(k, k);
    for s in samples {
        acc.gerc(linalg::ONE, &s.data, &s.data, linalg::ONE);
    }
    let scale = 1.0 / samples.len() as f64;
    Ok(linalg::hermitize(&acc.scale(scale)))
}

/// Noise-power estimate from a sample covariance: the median eigenvalue when the
/// sample count covers the dimension, otherwise the smallest nonzero eigenvalue.
pub fn noise_floor_estimate(scm: &CMat, num_samples: usize) -> Result<f64> {
    let (values, _) = linalg::hermitian_eigen(scm)?;
    let top = values.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Err(StapError::Numerical(
            "sample covariance is zero; cannot estimate noise floor".into(),
        ));
    }
    let floor = if num_samples >= scm.nrows() {
        let mut v = values;
        linalg::median(&mut v)
    } else {
        values
            .iter()
            .rev()
            .copied()
            .find(|&v| v > RANK_TOL * top)
            .unwrap_or(top)
    };
    Ok(floor.max(RANK_TOL * top))
}

/// `SCM + factor · δ̂² · I`.
pub fn lsmi(samples: &[SpaceTimeSnapshot], loading_factor: f64) -> Result<CMat> {
    if !(loading_factor > 0.0) || !loading_factor.is_finite() {
        return Err(StapError::InvalidInput(format!(
            "loading factor must be positive, got {loading_factor}"
        )));
    }
    let s = scm(samples)?;
    let load = loading_factor * noise_floor_estimate(&s, samples.len())?;
    let k = s.nrows();
    Ok(s + linalg::identity(k).scale(load))
}

/// Positions (into `samples`, ascending) of the `keep_fraction` share with the
/// lowest `xᴴ R̂0⁻¹ x`. `R̂0` defaults to the loaded SCM of all samples.
pub fn gip_select(
    samples: &[SpaceTimeSnapshot],
    reference: Option<&CMat>,
    keep_fraction: f64,
) -> Result<Vec<usize>> {
    let k = check_samples(samples)?;
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(StapError::InvalidInput(format!(
            "keep fraction {keep_fraction} outside (0, 1]"
        )));
    }
    let owned;
    let r0 = match reference {
        Some(r) => r,
        None => {
            owned = lsmi(samples, DEFAULT_LOADING_FACTOR)?;
            &owned
        }
    };
    if r0.nrows() != k || r0.ncols() != k {
        return Err(StapError::Dimension(format!(
            "GIP reference is {}x{}, samples have length {k}",
            r0.nrows(),
            r0.ncols()
        )));
    }
    let solver = HermitianSolver::new(r0).ok_or_else(|| StapError::Singular {
        estimator: "gip".into(),
    })?;
    let mut ranked: Vec<(f64, usize)> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (solver.quadratic_form(&s.data), i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let keep = ((keep_fraction * samples.len() as f64 + 1e-9).floor() as usize).max(1);
    let mut kept: Vec<usize> = ranked[..keep].iter().map(|&(_, i)| i).collect();
    kept.sort_unstable();
    Ok(kept)
}

/// LSMI on the GIP-selected subset of `samples`.
pub fn gip_ccm(samples: &[SpaceTimeSnapshot], keep_fraction: f64) -> Result<CMat> {
    let kept = gip_select(samples, None, keep_fraction)?;
    let subset: Vec<SpaceTimeSnapshot> = kept.iter().map(|&i| samples[i].clone()).collect();
    lsmi(&subset, DEFAULT_LOADING_FACTOR)
}

/// Frobenius-distance barycenter `Σ w_q R̂_q`; uniform weights when `None`.
pub fn euclidean_mean_ccm(matrices: &[ThpdCovariance], weights: Option<&[f64]>) -> Result<CMat> {
    let first = matrices
        .first()
        .ok_or_else(|| StapError::InvalidInput("no matrices to average".into()))?;
    let k = first.dim();
    if let Some(bad) = matrices.iter().find(|m| m.dim() != k) {
        return Err(StapError::Dimension(format!(
            "cell {} covariance has dimension {}, expected {k}",
            bad.cell_index,
            bad.dim()
        )));
    }
    let uniform;
    let w = match weights {
        Some(w) => {
            if w.len() != matrices.len() {
                return Err(StapError::InvalidInput(format!(
                    "{} weights for {} matrices",
                    w.len(),
                    matrices.len()
                )));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(StapError::InvalidInput(format!(
                    "weights sum to {total}, not 1"
                )));
            }
            w
        }
        None => {
            uniform = vec![1.0 / matrices.len() as f64; matrices.len()];
            &uniform
        }
    };
    let mut r = vec![linalg::ZERO; k];
    for (m, &wq) in matrices.iter().zip(w) {
        for (acc, z) in r.iter_mut().zip(&m.r) {
            *acc += z * wq;
        }
    }
    Ok(ThpdCovariance {
        r,
        cell_index: first.cell_index,
    }
    .to_dense())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "IF")]
    ImprovementFactor,
    #[serde(rename = "output-SCNR")]
    OutputScnr,
    #[serde(rename = "beampattern-doppler")]
    BeampatternDoppler,
    #[serde(rename = "beampattern-spatial")]
    BeampatternSpatial,
    #[serde(rename = "output-power")]
    OutputPower,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::ImprovementFactor => "IF",
            MetricKind::OutputScnr => "output-SCNR",
            MetricKind::BeampatternDoppler => "beampattern-doppler",
            MetricKind::BeampatternSpatial => "beampattern-spatial",
            MetricKind::OutputPower => "output-power",
        })
    }
}

/// One curve of a figure, values in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCurve {
    pub abscissa: Vec<f64>,
    pub values: Vec<f64>,
    pub estimator: String,
    pub kind: MetricKind,
}

impl MetricCurve {
    pub fn new(
        kind: MetricKind,
        estimator: &str,
        abscissa: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if abscissa.len() != values.len() {
            return Err(StapError::Dimension(format!(
                "{kind} curve has {} abscissae and {} values",
                abscissa.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().chain(&abscissa).find(|v| !v.is_finite()) {
            return Err(StapError::Numerical(format!(
                "{kind} curve for `{estimator}` contains {bad}"
            )));
        }
        Ok(MetricCurve {
            abscissa,
            values,
            estimator: estimator.to_string(),
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mean of the values whose abscissa satisfies `keep`.
    pub fn mean_where(&self, keep: impl Fn(f64) -> bool) -> Option<f64> {
        let picked: Vec<f64> = self
            .abscissa
            .iter()
            .zip(&self.values)
            .filter(|(a, _)| keep(**a))
            .map(|(_, v)| *v)
            .collect();
        (!picked.is_empty()).then(|| picked.iter().sum::<f64>() / picked.len() as f64)
    }
}

/// `|wᴴv|² tr(R) / ((wᴴRw)(vᴴv))` in dB.
pub fn improvement_factor_at(w: &StapWeights, r: &CMat) -> Result<f64> {
    let k = r.nrows();
    if w.w.len() != k {
        return Err(StapError::Dimension(format!(
            "weights of length {} against {k}x{k} covariance",
            w.w.len()
        )));
    }
    let gain = w.gain().norm_sqr();
    let trace = r.trace().re;
    let out = (w.w.adjoint() * r * &w.w)[(0, 0)].re;
    let vv = w.steering.norm_squared();
    if !(out > 0.0) {
        return Err(StapError::Singular {
            estimator: w.estimator.clone(),
        });
    }
    Ok(db(gain * trace / (out * vv)))
}

/// IF versus Doppler at a fixed look spatial frequency, with weights recomputed per
/// grid point from `estimate` and evaluated against the true covariance `ideal`.
pub fn improvement_factor(
    estimate: &CMat,
    ideal: &CMat,
    estimator: &str,
    doppler_grid: &[f64],
    look_spatial: f64,
    temporal_len: usize,
    spatial_len: usize,
) -> Result<MetricCurve> {
    let solver = WeightSolver::new(estimate, estimator)?;
    let values = doppler_grid
        .par_iter()
        .map(|&fd| {
            let v = steering_vector(fd, look_spatial, temporal_len, spatial_len)?;
            improvement_factor_at(&solver.weights(&v)?, ideal)
        })
        .collect::<Result<Vec<f64>>>()?;
    MetricCurve::new(
        MetricKind::ImprovementFactor,
        estimator,
        doppler_grid.to_vec(),
        values,
    )
}

/// `|wᴴs|² / (wᴴRw)` in dB, floored at [`DB_FLOOR`].
pub fn output_scnr(w: &StapWeights, signal: &CVec, r: &CMat) -> Result<f64> {
    if signal.len() != w.w.len() || r.nrows() != w.w.len() {
        return Err(StapError::Dimension(
            "output SCNR operands disagree in length".into(),
        ));
    }
    let num = w.w.dotc(signal).norm_sqr();
    let den = (w.w.adjoint() * r * &w.w)[(0, 0)].re;
    if !(den > 0.0) {
        return Err(StapError::Singular {
            estimator: w.estimator.clone(),
        });
    }
    Ok(db(num / den))
}

/// Which frequency is held fixed for a beampattern cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeampatternSlice {
    /// Sweep spatial frequency at this Doppler.
    FixedDoppler(f64),
    /// Sweep Doppler at this spatial frequency.
    FixedSpatial(f64),
}

/// `|wᴴ v(f_d, f_s)|²` in dB along one slice.
pub fn beampattern_slices(
    w: &StapWeights,
    slice: BeampatternSlice,
    grid: &[f64],
    temporal_len: usize,
    spatial_len: usize,
) -> Result<MetricCurve> {
    if w.w.len() != temporal_len * spatial_len {
        return Err(StapError::Dimension(format!(
            "weights of length {} for a {temporal_len}x{spatial_len} aperture",
            w.w.len()
        )));
    }
    let kind = match slice {
        BeampatternSlice::FixedDoppler(_) => MetricKind::BeampatternSpatial,
        BeampatternSlice::FixedSpatial(_) => MetricKind::BeampatternDoppler,
    };
    let values = grid
        .iter()
        .map(|&x| {
            let (fd, fs) = match slice {
                BeampatternSlice::FixedDoppler(fd) => (fd, x),
                BeampatternSlice::FixedSpatial(fs) => (x, fs),
            };
            let v = steering_vector(fd, fs, temporal_len, spatial_len)?;
            Ok(db(w.w.dotc(&v).norm_sqr()))
        })
        .collect::<Result<Vec<f64>>>()?;
    MetricCurve::new(kind, &w.estimator, grid.to_vec(), values)
}
