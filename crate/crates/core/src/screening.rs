//! Brauer-disc screening of training covariances.
//!
//! Every Toeplitz matrix has constant diagonal `r_0`, so all Brauer ovals share the
//! centre `r_0` and the inclusion region collapses to one disc of radius
//! `D = max_{i≠j} sqrt(a_i a_j)`, `a_i = Σ_{j≠i} |r_ij|`. A cell is kept as clutter
//! when its `D` lies below the cluster boundary
//! `T_B = ρ · AM(centres) / GM(centres)` with `ρ` the smallest radius in the batch.
//!
//! `ρ` is a batch quantity: one radius is computed per matrix and the minimum over
//! the batch is taken.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, StapError};
use crate::linalg::CMat;
use crate::thpd::ThpdCovariance;

/// Relative slack under which `D ≈ T_B` is classified as clutter.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrauerDisc {
    pub center: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrauerSummary {
    pub cell_index: usize,
    pub center: f64,
    pub radius: f64,
    pub is_clutter: bool,
    pub threshold_used: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningResult {
    pub summaries: Vec<BrauerSummary>,
    pub clutter_cells: Vec<usize>,
    pub target_cells: Vec<usize>,
}

impl ScreeningResult {
    pub fn threshold(&self) -> f64 {
        self.summaries
            .first()
            .map_or(f64::NAN, |s| s.threshold_used)
    }
}

/// `max_{i≠j} sqrt(a_i a_j)` is the geometric mean of the two largest row sums.
fn radius_from_row_sums(sums: impl Iterator<Item = f64>) -> f64 {
    let (mut first, mut second) = (0.0f64, 0.0f64);
    for a in sums {
        if a > first {
            second = first;
            first = a;
        } else if a > second {
            second = a;
        }
    }
    (first * second).sqrt()
}

/// Brauer disc of a dense square matrix; the centre is `R[0][0]`.
pub fn brauer_radius(m: &CMat) -> Result<BrauerDisc> {
    if !m.is_square() {
        return Err(StapError::Dimension(format!(
            "Brauer radius needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    if n < 2 {
        return Err(StapError::InvalidInput(
            "Brauer radius needs dimension at least 2".into(),
        ));
    }
    let sums = (0..n).map(|i| {
        (0..n)
            .filter(|&j| j != i)
            .map(|j| m[(i, j)].norm())
            .sum::<f64>()
    });
    Ok(BrauerDisc {
        center: m[(0, 0)].re,
        radius: radius_from_row_sums(sums),
    })
}

impl ThpdCovariance {
    /// Brauer disc from the first column; row `i` sums `|r_1|..|r_i|` and
    /// `|r_1|..|r_{K−1−i}|`.
    pub fn brauer_disc(&self) -> Result<BrauerDisc> {
        let k = self.dim();
        if k < 2 {
            return Err(StapError::InvalidInput(
                "Brauer radius needs dimension at least 2".into(),
            ));
        }
        let mut prefix = vec![0.0; k];
        for lag in 1..k {
            prefix[lag] = prefix[lag - 1] + self.r[lag].norm();
        }
        let sums = (0..k).map(|i| prefix[i] + prefix[k - 1 - i]);
        Ok(BrauerDisc {
            center: self.center(),
            radius: radius_from_row_sums(sums),
        })
    }
}

/// `T_B = ρ · mean(c) / geomean(c)`.
pub fn brauer_threshold(centers: &[f64], rho: f64) -> Result<f64> {
    if centers.is_empty() {
        return Err(StapError::InvalidInput("no disc centres".into()));
    }
    if let Some(bad) = centers.iter().find(|&&c| !(c > 0.0) || !c.is_finite()) {
        return Err(StapError::InvalidInput(format!(
            "disc centres must be positive, got {bad}"
        )));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(StapError::InvalidInput(format!(
            "rho must be non-negative, got {rho}"
        )));
    }
    let n = centers.len() as f64;
    let am = centers.iter().sum::<f64>() / n;
    let gm = (centers.iter().map(|c| c.ln()).sum::<f64>() / n).exp();
    // AM ≥ GM; rounding can put the ratio a hair under one.
    Ok((am / gm).max(1.0) * rho)
}

/// Classify each matrix as clutter (`D ≤ T_B`) or target-contaminated.
pub fn screen(matrices: &[ThpdCovariance]) -> Result<ScreeningResult> {
    if matrices.is_empty() {
        return Err(StapError::InvalidInput(
            "screening needs at least one matrix".into(),
        ));
    }
    let discs = matrices
        .par_iter()
        .map(ThpdCovariance::brauer_disc)
        .collect::<Result<Vec<_>>>()?;
    let rho = discs.iter().map(|d| d.radius).fold(f64::INFINITY, f64::min);
    let centers: Vec<f64> = discs.iter().map(|d| d.center).collect();
    let threshold = brauer_threshold(&centers, rho)?;
    let cutoff = threshold * (1.0 + TIE_TOLERANCE);

    let mut summaries = Vec::with_capacity(matrices.len());
    let mut clutter_cells = Vec::new();
    let mut target_cells = Vec::new();
    for (m, d) in matrices.iter().zip(&discs) {
        let is_clutter = d.radius <= cutoff;
        if is_clutter {
            clutter_cells.push(m.cell_index);
        } else {
            target_cells.push(m.cell_index);
        }
        summaries.push(BrauerSummary {
            cell_index: m.cell_index,
            center: d.center,
            radius: d.radius,
            is_clutter,
            threshold_used: threshold,
            rho,
        });
    }
    Ok(ScreeningResult {
        summaries,
        clutter_cells,
        target_cells,
    })
}
