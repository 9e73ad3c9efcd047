//! Synthetic space-time data for a side-looking airborne uniform linear array.
//!
//! A snapshot is the Kronecker product layout `v_d ⊗ v_s`: the temporal (slow-time)
//! phase ramp is the outer index and the spatial ramp the inner one, so entry
//! `p * spatial_len + e` holds pulse `p`, element `e`. [`ScenarioConfig`] maps its
//! `num_pulses` onto the temporal length and `num_elements` onto the spatial length
//! everywhere in the crate.
//!
//! Clutter is a sum of `num_range_ambiguities × num_clutter_patches` discrete
//! scatterers with circular Gaussian amplitudes. Patches are spread uniformly in
//! sine of azimuth over `(-1, 1]` and their Doppler follows the side-looking
//! coupling `f_d = β f_s`, `β = 2 v / (d · PRF)`. A per-cell log-normal texture
//! (unit mean) makes the clutter power heterogeneous across range.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StapError};
use crate::linalg::{self, CMat, CVec, HermitianSolver};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Radar geometry, waveform and clutter parameters of a simulated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_elements: usize,
    pub num_pulses: usize,
    /// Hz.
    pub carrier_frequency: f64,
    /// Hz.
    pub prf: f64,
    /// m/s.
    pub platform_velocity: f64,
    /// m.
    pub platform_height: f64,
    /// Element spacing in metres; half a wavelength when absent.
    pub element_spacing: Option<f64>,
    pub num_clutter_patches: usize,
    pub num_range_ambiguities: usize,
    pub cnr_db: f64,
    /// Thermal noise power per channel (linear).
    pub noise_variance: f64,
    pub num_range_cells: usize,
    pub rng_seed: u64,
    /// Standard deviation of the per-cell clutter power texture in dB; 0 disables it.
    pub texture_db: f64,
}

impl Default for ScenarioConfig {
    /// The side-looking scenario: 10 elements, 12 pulses, 1.5 GHz, 3 kHz PRF,
    /// 150 m/s at 10 km, 201 patches, 50 dB CNR.
    fn default() -> Self {
        ScenarioConfig {
            num_elements: 10,
            num_pulses: 12,
            carrier_frequency: 1.5e9,
            prf: 3000.0,
            platform_velocity: 150.0,
            platform_height: 10_000.0,
            element_spacing: None,
            num_clutter_patches: 201,
            num_range_ambiguities: 1,
            cnr_db: 50.0,
            noise_variance: 1.0,
            num_range_cells: 100,
            rng_seed: 0,
            texture_db: 3.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(StapError::Config(msg.to_string()));
        if self.num_elements < 2 {
            return fail("num_elements must be at least 2");
        }
        if self.num_pulses < 2 {
            return fail("num_pulses must be at least 2");
        }
        if !(self.prf > 0.0) {
            return fail("prf must be positive");
        }
        if !(self.carrier_frequency > 0.0) {
            return fail("carrier_frequency must be positive");
        }
        if !self.platform_velocity.is_finite() || !self.platform_height.is_finite() {
            return fail("platform velocity and height must be finite");
        }
        if let Some(d) = self.element_spacing {
            if !(d > 0.0) || !d.is_finite() {
                return fail("element_spacing must be positive");
            }
        }
        if self.num_clutter_patches < 1 {
            return fail("num_clutter_patches must be at least 1");
        }
        if self.num_range_ambiguities < 1 {
            return fail("num_range_ambiguities must be at least 1");
        }
        if !self.cnr_db.is_finite() {
            return fail("cnr_db must be finite");
        }
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            return fail("noise_variance must be positive");
        }
        if self.num_range_cells < 1 {
            return fail("num_range_cells must be at least 1");
        }
        if !(self.texture_db >= 0.0) || !self.texture_db.is_finite() {
            return fail("texture_db must be non-negative");
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn element_spacing(&self) -> f64 {
        self.element_spacing
            .unwrap_or_else(|| 0.5 * self.wavelength())
    }

    /// Clutter ridge slope `2 v / (d · PRF)`.
    pub fn beta(&self) -> f64 {
        2.0 * self.platform_velocity / (self.element_spacing() * self.prf)
    }

    /// Length of the temporal steering factor (pulses).
    pub fn temporal_len(&self) -> usize {
        self.num_pulses
    }

    /// Length of the spatial steering factor (elements).
    pub fn spatial_len(&self) -> usize {
        self.num_elements
    }

    /// Space-time dimension `M·N`.
    pub fn dim(&self) -> usize {
        self.num_elements * self.num_pulses
    }

    /// Brennan clutter-rank estimate `round(N + (M − 1) β)`, clipped to `[1, M·N]`.
    pub fn brennan_rank(&self) -> usize {
        let rank =
            (self.num_pulses as f64 + (self.num_elements as f64 - 1.0) * self.beta()).round();
        (rank.max(1.0) as usize).min(self.dim())
    }

    pub fn steering(&self, doppler: f64, spatial: f64) -> Result<CVec> {
        steering_vector(doppler, spatial, self.temporal_len(), self.spatial_len())
    }
}

/// How a target's complex amplitude is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetAmplitude {
    /// Per-channel SNR in dB relative to the noise variance; zero phase.
    SnrDb(f64),
    /// Explicit complex amplitude `[re, im]`.
    Complex([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub range_cells: Vec<usize>,
    pub normalized_doppler: f64,
    pub normalized_spatial: f64,
    pub amplitude: TargetAmplitude,
}

impl TargetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.range_cells.is_empty() {
            return Err(StapError::Config(
                "target range_cells must not be empty".into(),
            ));
        }
        if !self.normalized_doppler.is_finite() || self.normalized_doppler.abs() > 0.5 {
            return Err(StapError::Config(format!(
                "target normalized_doppler {} outside [-0.5, 0.5]",
                self.normalized_doppler
            )));
        }
        if !self.normalized_spatial.is_finite() {
            return Err(StapError::Config(
                "target normalized_spatial must be finite".into(),
            ));
        }
        match self.amplitude {
            TargetAmplitude::SnrDb(db) if !db.is_finite() && db != f64::NEG_INFINITY => Err(
                StapError::Config("target snr_db must be finite or -inf".into()),
            ),
            TargetAmplitude::Complex([re, im]) if !re.is_finite() || !im.is_finite() => {
                Err(StapError::Config("target amplitude must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn amplitude(&self, noise_variance: f64) -> Complex64 {
        match self.amplitude {
            TargetAmplitude::SnrDb(db) => {
                Complex64::new((linalg::from_db(db) * noise_variance).sqrt(), 0.0)
            }
            TargetAmplitude::Complex([re, im]) => Complex64::new(re, im),
        }
    }

    /// The two range-spread targets of the reference experiment: cells 30–32 at
    /// Doppler 0.25 and cells 39–41 at Doppler −0.1, both at spatial frequency 0.
    pub fn reference_pair(snr_db: f64) -> Vec<TargetSpec> {
        vec![
            TargetSpec {
                range_cells: vec![30, 31, 32],
                normalized_doppler: 0.25,
                normalized_spatial: 0.0,
                amplitude: TargetAmplitude::SnrDb(snr_db),
            },
            TargetSpec {
                range_cells: vec![39, 40, 41],
                normalized_doppler: -0.1,
                normalized_spatial: 0.0,
                amplitude: TargetAmplitude::SnrDb(snr_db),
            },
        ]
    }
}

/// One range cell's space-time vector `x(l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeSnapshot {
    pub cell_index: usize,
    pub data: CVec,
}

impl SpaceTimeSnapshot {
    pub fn new(cell_index: usize, data: CVec) -> Result<Self> {
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(StapError::InvalidInput(format!(
                "snapshot for cell {cell_index} has non-finite entries"
            )));
        }
        Ok(SpaceTimeSnapshot { cell_index, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SpaceTimeDataset {
    pub config: ScenarioConfig,
    pub snapshots: Vec<SpaceTimeSnapshot>,
    pub targets: Vec<TargetSpec>,
    /// Ensemble clutter-plus-noise covariance, available for simulated data only.
    pub ideal_clutter_covariance: Option<CMat>,
}

impl SpaceTimeDataset {
    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    pub fn snapshot(&self, cell: usize) -> Result<&SpaceTimeSnapshot> {
        self.snapshots.get(cell).ok_or_else(|| {
            StapError::InvalidInput(format!(
                "cell {cell} outside dataset of {} cells",
                self.snapshots.len()
            ))
        })
    }
}

/// `v_d(f_d) ⊗ v_s(f_s)` with `v_d` of length `temporal_len` and `v_s` of length
/// `spatial_len`; entries `exp(j2π(f_d m + f_s n))`.
pub fn steering_vector(
    doppler: f64,
    spatial: f64,
    temporal_len: usize,
    spatial_len: usize,
) -> Result<CVec> {
    if !doppler.is_finite() || !spatial.is_finite() {
        return Err(StapError::InvalidInput(format!(
            "steering frequencies must be finite (f_d = {doppler}, f_s = {spatial})"
        )));
    }
    if temporal_len == 0 || spatial_len == 0 {
        return Err(StapError::InvalidInput(
            "steering lengths must be positive".into(),
        ));
    }
    Ok(DVector::from_fn(temporal_len * spatial_len, |k, _| {
        let (m, n) = (k / spatial_len, k % spatial_len);
        Complex64::from_polar(1.0, 2.0 * PI * (doppler * m as f64 + spatial * n as f64))
    }))
}

/// A discrete clutter scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutterPatch {
    pub doppler: f64,
    pub spatial: f64,
    /// `E[|a|²]` before texture.
    pub power: f64,
}

/// Precomputed clutter geometry for a scenario.
#[derive(Debug, Clone)]
pub struct ClutterModel {
    pub patches: Vec<ClutterPatch>,
    steering: CMat,
    noise_variance: f64,
    texture_db: f64,
}

impl ClutterModel {
    /// Range ring `j` sits at slant range `(j + 1)·c / (2·PRF)`; its patches are
    /// scaled by the cosine of the depression angle `asin(h / R_j)`.
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let nc = config.num_clutter_patches;
        let na = config.num_range_ambiguities;
        let per_patch = linalg::from_db(config.cnr_db) * config.noise_variance / (nc * na) as f64;
        let spacing_over_lambda = config.element_spacing() / config.wavelength();
        let beta = config.beta();
        let unambiguous = SPEED_OF_LIGHT / (2.0 * config.prf);

        let mut patches = Vec::with_capacity(nc * na);
        for ring in 0..na {
            let slant = (ring + 1) as f64 * unambiguous;
            let sin_dep = (config.platform_height / slant).min(1.0);
            let cos_dep = (1.0 - sin_dep * sin_dep).max(0.0).sqrt();
            for i in 1..=nc {
                let sin_az = -1.0 + 2.0 * i as f64 / nc as f64;
                let spatial = spacing_over_lambda * cos_dep * sin_az;
                patches.push(ClutterPatch {
                    doppler: beta * spatial,
                    spatial,
                    power: per_patch,
                });
            }
        }

        let dim = config.dim();
        let mut steering = CMat::zeros(dim, patches.len());
        for (j, p) in patches.iter().enumerate() {
            let v = config.steering(p.doppler, p.spatial)?;
            steering.set_column(j, &v);
        }
        Ok(ClutterModel {
            patches,
            steering,
            noise_variance: config.noise_variance,
            texture_db: config.texture_db,
        })
    }

    /// `Σ E[|a|²] v vᴴ + δ² I`.
    pub fn ideal_covariance(&self) -> CMat {
        let dim = self.steering.nrows();
        let mut scaled = self.steering.clone();
        for (j, p) in self.patches.iter().enumerate() {
            scaled.column_mut(j).scale_mut(p.power);
        }
        let mut r = &scaled * self.steering.adjoint();
        for i in 0..dim {
            r[(i, i)] += Complex64::new(self.noise_variance, 0.0);
        }
        linalg::hermitize(&r)
    }

    /// One clutter-plus-noise realization.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> CVec {
        let texture = unit_mean_lognormal(rng, self.texture_db);
        let amplitudes = DVector::from_iterator(
            self.patches.len(),
            self.patches
                .iter()
                .map(|p| complex_gaussian(rng, p.power * texture))
                .collect::<Vec<_>>(),
        );
        let mut x = &self.steering * amplitudes;
        for z in x.iter_mut() {
            *z += complex_gaussian(rng, self.noise_variance);
        }
        x
    }
}

/// Independent stream for one range cell; identical across runs for a given seed.
pub fn cell_rng(seed: u64, cell: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell as u64);
    rng
}

/// Circular complex Gaussian sample with `E[|z|²] = power`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, power: f64) -> Complex64 {
    let s = (0.5 * power).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

fn unit_mean_lognormal<R: Rng + ?Sized>(rng: &mut R, sigma_db: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    if sigma_db == 0.0 {
        return 1.0;
    }
    let sigma = sigma_db * std::f64::consts::LN_10 / 10.0;
    (sigma * z - 0.5 * sigma * sigma).exp()
}

/// Clutter-plus-noise snapshots for every range cell and the ensemble covariance.
pub fn generate_clutter(config: &ScenarioConfig) -> Result<(Vec<SpaceTimeSnapshot>, CMat)> {
    let model = ClutterModel::new(config)?;
    let snapshots = (0..config.num_range_cells)
        .into_par_iter()
        .map(|cell| {
            let mut rng = cell_rng(config.rng_seed, cell);
            SpaceTimeSnapshot::new(cell, model.draw(&mut rng))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((snapshots, model.ideal_covariance()))
}

/// Adds `a_t · v(f_d, f_s)` to every listed cell.
pub fn inject_targets(
    mut dataset: SpaceTimeDataset,
    targets: &[TargetSpec],
) -> Result<SpaceTimeDataset> {
    for target in targets {
        target.validate()?;
        if let Some(&bad) = target
            .range_cells
            .iter()
            .find(|&&c| c >= dataset.snapshots.len())
        {
            return Err(StapError::InvalidInput(format!(
                "target cell {bad} outside dataset of {} cells",
                dataset.snapshots.len()
            )));
        }
    }
    for target in targets {
        let v = dataset
            .config
            .steering(target.normalized_doppler, target.normalized_spatial)?;
        let signal = v * target.amplitude(dataset.config.noise_variance);
        for &cell in &target.range_cells {
            dataset.snapshots[cell].data += &signal;
        }
        dataset.targets.push(target.clone());
    }
    Ok(dataset)
}

/// Clutter, noise and targets for a full scenario.
pub fn simulate(config: &ScenarioConfig, targets: &[TargetSpec]) -> Result<SpaceTimeDataset> {
    let (snapshots, ideal) = generate_clutter(config)?;
    let dataset = SpaceTimeDataset {
        config: config.clone(),
        snapshots,
        targets: Vec::new(),
        ideal_clutter_covariance: Some(ideal),
    };
    inject_targets(dataset, targets)
}

/// Minimum-variance spectrum `1 / (vᴴ R⁻¹ v)` over a Doppler × spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CaponSpectrum {
    pub doppler: Vec<f64>,
    pub spatial: Vec<f64>,
    /// `power[i][j]` at `(doppler[i], spatial[j])`, linear.
    pub power: Vec<Vec<f64>>,
}

impl CaponSpectrum {
    /// Grid point with the largest power, as `(doppler, spatial)`.
    pub fn argmax(&self) -> (f64, f64) {
        let mut best = (0, 0);
        let mut best_val = f64::NEG_INFINITY;
        for (i, row) in self.power.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if p > best_val {
                    best_val = p;
                    best = (i, j);
                }
            }
        }
        (self.doppler[best.0], self.spatial[best.1])
    }
}

pub const DEFAULT_GRID_POINTS: usize = 101;

pub fn default_grid() -> Vec<f64> {
    linalg::linspace(-0.5, 0.5, DEFAULT_GRID_POINTS)
}

/// Capon spectrum of `r`. A relative diagonal load of `1e-10` is applied only if the
/// matrix does not factor as given.
pub fn capon_spectrum(
    r: &CMat,
    temporal_len: usize,
    spatial_len: usize,
    doppler_grid: &[f64],
    spatial_grid: &[f64],
) -> Result<CaponSpectrum> {
    let dim = temporal_len * spatial_len;
    if r.nrows() != dim || r.ncols() != dim {
        return Err(StapError::Dimension(format!(
            "covariance is {}x{}, expected {dim}x{dim}",
            r.nrows(),
            r.ncols()
        )));
    }
    let solver = match HermitianSolver::new(r) {
        Some(s) => s,
        None => {
            let load = 1e-10 * linalg::mean_diagonal(r).abs().max(f64::MIN_POSITIVE);
            let loaded = r + linalg::identity(dim).scale(load);
            HermitianSolver::new(&loaded).ok_or_else(|| {
                StapError::Numerical("Capon spectrum: covariance singular after loading".into())
            })?
        }
    };
    let power = doppler_grid
        .par_iter()
        .map(|&fd| {
            spatial_grid
                .iter()
                .map(|&fs| {
                    let v = steering_vector(fd, fs, temporal_len, spatial_len)?;
                    Ok(1.0 / solver.quadratic_form(&v))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CaponSpectrum {
        doppler: doppler_grid.to_vec(),
        spatial: spatial_grid.to_vec(),
        power,
    })
}
