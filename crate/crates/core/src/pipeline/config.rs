use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, StapError};
use crate::grassmann::OptimizerConfig;
use crate::sim::{ScenarioConfig, TargetSpec};
use crate::stap::{BeampatternSlice, DEFAULT_GIP_KEEP, DEFAULT_LOADING_FACTOR};
use crate::thpd::BurgConfig;

/// Covariance estimators the pipeline can run on a training window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Screened Grassmann VCF mean of the clutter-only cells.
    Bgvcf,
    /// Grassmann VCF mean of every training cell.
    Gvcf,
    Lsmi,
    /// Sample covariance with a negligible load so it can be factored when `L < MN`.
    Scm,
    /// LSMI on GIP-selected samples.
    Gip,
    /// Frobenius mean of the per-cell Toeplitz covariances.
    EuclideanMean,
    /// The ensemble clutter-plus-noise covariance (simulation only).
    Optimal,
}

impl Estimator {
    pub const ALL: [Estimator; 7] = [
        Estimator::Bgvcf,
        Estimator::Gvcf,
        Estimator::Lsmi,
        Estimator::Scm,
        Estimator::Gip,
        Estimator::EuclideanMean,
        Estimator::Optimal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::Bgvcf => "bgvcf",
            Estimator::Gvcf => "gvcf",
            Estimator::Lsmi => "lsmi",
            Estimator::Scm => "scm",
            Estimator::Gip => "gip",
            Estimator::EuclideanMean => "euclidean_mean",
            Estimator::Optimal => "optimal",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Estimator {
    type Err = StapError;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.label() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Estimator::ALL.iter().map(|e| e.label()).collect();
                StapError::Config(format!(
                    "unknown estimator `{s}` (expected one of {})",
                    known.join(", ")
                ))
            })
    }
}

/// Which cells are filtered and which train the estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// `Q`, training cells per CUT.
    pub num_training: usize,
    /// Guard cells excluded on each side of the CUT.
    pub num_guard: usize,
    /// Single cell under test.
    pub cut: Option<usize>,
    /// Inclusive range of CUTs `[first, last]`; takes precedence over `cut`.
    pub sweep: Option<[usize; 2]>,
    /// Explicit training cells, used verbatim for every CUT instead of the sliding window.
    pub training_cells: Option<Vec<usize>>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            num_training: 40,
            num_guard: 2,
            cut: Some(50),
            sweep: None,
            training_cells: None,
        }
    }
}

impl WindowConfig {
    pub fn cuts(&self) -> Result<Vec<usize>> {
        match (self.sweep, self.cut) {
            (Some([a, b]), _) if a <= b => Ok((a..=b).collect()),
            (Some([a, b]), _) => Err(StapError::Config(format!("sweep [{a}, {b}] is empty"))),
            (None, Some(c)) => Ok(vec![c]),
            (None, None) => Err(StapError::Config("window needs `cut` or `sweep`".into())),
        }
    }
}

/// Grids and look directions for the metric curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Points on the `[-0.5, 0.5]` Doppler and spatial grids.
    pub grid_points: usize,
    /// Normalized Doppler of the look direction (target hypothesis).
    pub look_doppler: f64,
    /// Normalized spatial frequency of the look direction.
    pub look_spatial: f64,
    /// Input SCNR values in dB for the output-SCNR sweep; no sweep when empty.
    pub scnr_sweep_db: Vec<f64>,
    /// Also emit the Capon spectrum of the ideal covariance.
    pub capon: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            grid_points: crate::sim::DEFAULT_GRID_POINTS,
            look_doppler: 0.25,
            look_spatial: 0.0,
            scnr_sweep_db: Vec::new(),
            capon: true,
        }
    }
}

impl MetricsConfig {
    pub fn grid(&self) -> Vec<f64> {
        crate::linalg::linspace(-0.5, 0.5, self.grid_points)
    }

    pub fn slices(&self) -> [BeampatternSlice; 2] {
        [
            BeampatternSlice::FixedSpatial(self.look_spatial),
            BeampatternSlice::FixedDoppler(self.look_doppler),
        ]
    }
}

/// A CPI file to process instead of simulating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub scenario: ScenarioConfig,
    pub targets: Vec<TargetSpec>,
    pub window: WindowConfig,
    pub burg: BurgConfig,
    pub optimizer: OptimizerConfig,
    pub estimators: Vec<Estimator>,
    pub loading_factor: f64,
    pub gip_keep_fraction: f64,
    pub metrics: MetricsConfig,
    /// Measured data; when present, `scenario` supplies the array geometry only.
    pub input: Option<InputConfig>,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scenario: ScenarioConfig::default(),
            targets: TargetSpec::reference_pair(10.0),
            window: WindowConfig::default(),
            burg: BurgConfig::default(),
            optimizer: OptimizerConfig::default(),
            estimators: Estimator::ALL.to_vec(),
            loading_factor: DEFAULT_LOADING_FACTOR,
            gip_keep_fraction: DEFAULT_GIP_KEEP,
            metrics: MetricsConfig::default(),
            input: None,
            output_dir: PathBuf::from("bgvcf-out"),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        for t in &self.targets {
            t.validate()?;
        }
        self.optimizer.validate()?;
        if self.window.num_training == 0 && self.window.training_cells.is_none() {
            return Err(StapError::Config("num_training must be at least 1".into()));
        }
        if matches!(&self.window.training_cells, Some(c) if c.is_empty()) {
            return Err(StapError::Config("training_cells must not be empty".into()));
        }
        self.window.cuts()?;
        if self.estimators.is_empty() {
            return Err(StapError::Config("no estimators requested".into()));
        }
        if !(self.loading_factor > 0.0) || !self.loading_factor.is_finite() {
            return Err(StapError::Config("loading_factor must be positive".into()));
        }
        if !(self.gip_keep_fraction > 0.0 && self.gip_keep_fraction <= 1.0) {
            return Err(StapError::Config(
                "gip_keep_fraction must be in (0, 1]".into(),
            ));
        }
        if !(self.burg.psi1 >= 0.0) || !self.burg.psi1.is_finite() {
            return Err(StapError::Config("burg.psi1 must be non-negative".into()));
        }
        if self.metrics.grid_points < 2 {
            return Err(StapError::Config(
                "metrics.grid_points must be at least 2".into(),
            ));
        }
        if self.metrics.scnr_sweep_db.iter().any(|v| !v.is_finite()) {
            return Err(StapError::Config(
                "scnr_sweep_db values must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Parse TOML, or JSON when the file extension is `.json`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| StapError::io(path, e))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg: PipelineConfig = if is_json {
            serde_json::from_str(&text)
                .map_err(|e| StapError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| StapError::Config(format!("{}: {e}", path.display())))?
        };
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form, ignoring `output_dir` so that the same
    /// experiment written to different places hashes identically.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes to JSON");
        hex::encode(Sha256::digest(&bytes))
    }
}
