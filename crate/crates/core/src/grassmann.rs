//! Subspace geometry on the Grassmann manifold and the VCF-based covariance estimate.
//!
//! Each clutter covariance is reduced to the span of its top-`s` eigenvectors. The
//! distance between two such subspaces is the volume cross-correlation
//! `VCF(U1, U2) = Π sin θ_i = sqrt(det(I − (U1ᴴU2)(U1ᴴU2)ᴴ))`. The estimate minimizes
//! `Σ_q w_q VCF(U_q, U)` over `U` by projected gradient descent with backtracking
//! and a thin-QR retraction, then recomposes a full covariance from the optimized
//! basis, the weighted mean of the retained eigenvalues, and a noise-floor load.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StapError};
use crate::linalg::{self, CMat, CVec};

/// Tikhonov term added to `G` before inversion when the VCF is near zero.
pub const SINGULAR_EPS: f64 = 1e-12;

/// Orthonormality tolerance for inputs to the angle and VCF routines.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Relative gap under which eigenvalues are treated as degenerate.
const DEGENERATE_TOL: f64 = 1e-10;

const MAX_HALVINGS: usize = 20;

/// An `s`-dimensional subspace of `C^K` with the eigenvalues that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannPoint {
    /// `K × s`, orthonormal columns.
    pub basis: CMat,
    /// Top-`s` eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Mean of the `K − s` discarded eigenvalues (0 when `s = K`).
    pub tail_mean: f64,
    pub cell_index: usize,
}

impl GrassmannPoint {
    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn subspace_dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Top-`s` eigenvectors of a Hermitian positive-definite matrix.
///
/// Eigenvectors are phase-normalized (largest entry real positive). Inside a
/// degenerate eigenvalue cluster the basis is replaced by Gram–Schmidt on the
/// cluster projector applied to `e_1, e_2, …`, so e.g. the identity yields the
/// canonical axes.
pub fn extract_subspace(r: &CMat, s: usize, cell_index: usize) -> Result<GrassmannPoint> {
    let k = r.nrows();
    if !r.is_square() {
        return Err(StapError::Dimension("covariance must be square".into()));
    }
    if s == 0 || s > k {
        return Err(StapError::InvalidInput(format!(
            "subspace dimension {s} outside 1..={k}"
        )));
    }
    let (values, mut vectors) = linalg::hermitian_eigen(r)?;
    if !(values[k - 1] > 0.0) {
        log::warn!(
            "cell {cell_index}: covariance is not positive definite (min eigenvalue {})",
            values[k - 1]
        );
    }
    canonicalize_clusters(&values, &mut vectors, s);

    let basis = vectors.columns(0, s).into_owned();
    let tail_mean = if s < k {
        values[s..].iter().sum::<f64>() / (k - s) as f64
    } else {
        0.0
    };
    Ok(GrassmannPoint {
        basis,
        eigenvalues: values[..s].to_vec(),
        tail_mean,
        cell_index,
    })
}

fn canonicalize_clusters(values: &[f64], vectors: &mut CMat, s: usize) {
    let k = values.len();
    let scale = values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < s {
        let mut end = start + 1;
        while end < k && (values[start] - values[end]).abs() <= DEGENERATE_TOL * scale {
            end += 1;
        }
        if end - start > 1 {
            let cluster = vectors.columns(start, end - start).into_owned();
            let projector = &cluster * cluster.adjoint();
            let mut accepted: Vec<CVec> = Vec::with_capacity(end - start);
            for axis in 0..k {
                if accepted.len() == end - start {
                    break;
                }
                let mut v: CVec = projector.column(axis).into_owned();
                for q in &accepted {
                    let c = q.dotc(&v);
                    v -= q * c;
                }
                let norm = v.norm();
                if norm > 1e-6 {
                    let mut unit = v / Complex64::new(norm, 0.0);
                    linalg::normalize_phase(&mut unit);
                    accepted.push(unit);
                }
            }
            for (offset, v) in accepted.iter().enumerate() {
                vectors.set_column(start + offset, v);
            }
        }
        start = end;
    }
}

/// Product of the `d` largest singular values of `s`.
pub fn volume(s: &CMat, d: usize) -> f64 {
    if d == 0 {
        return 1.0;
    }
    let mut sv: Vec<f64> = s
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv.len() < d {
        return 0.0;
    }
    sv[..d].iter().product()
}

fn check_orthonormal(u: &CMat, name: &str) -> Result<()> {
    let defect = linalg::orthonormality_defect(u);
    if !(defect <= ORTHONORMAL_TOL) {
        return Err(StapError::InvalidInput(format!(
            "{name} is not orthonormal (Gram deviation {defect:.3e})"
        )));
    }
    Ok(())
}

fn check_pair(u1: &CMat, u2: &CMat) -> Result<()> {
    if u1.nrows() != u2.nrows() {
        return Err(StapError::Dimension(format!(
            "bases live in C^{} and C^{}",
            u1.nrows(),
            u2.nrows()
        )));
    }
    check_orthonormal(u1, "first basis")?;
    check_orthonormal(u2, "second basis")
}

/// Principal angles `θ_i = arccos σ_i(U1ᴴ U2)`, ascending.
pub fn principal_angles(u1: &CMat, u2: &CMat) -> Result<Vec<f64>> {
    check_pair(u1, u2)?;
    let cross = u1.adjoint() * u2;
    let sv = cross.svd(false, false).singular_values;
    let mut angles: Vec<f64> = sv.iter().map(|&c| c.clamp(0.0, 1.0).acos()).collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    Ok(angles)
}

/// `det(I − M Mᴴ)` with `M = U1ᴴ U2`, clamped at zero.
fn gram_determinant(cross: &CMat) -> f64 {
    let s = cross.nrows();
    let g = linalg::identity(s) - cross * cross.adjoint();
    g.determinant().re.max(0.0)
}

/// Volume cross-correlation of two equal-dimension subspaces, in `[0, 1]`.
pub fn vcf(u1: &CMat, u2: &CMat) -> Result<f64> {
    check_pair(u1, u2)?;
    if u1.ncols() != u2.ncols() {
        return Err(StapError::Dimension(format!(
            "VCF needs equal subspace dimensions, got {} and {}",
            u1.ncols(),
            u2.ncols()
        )));
    }
    Ok(vcf_unchecked(u1, u2))
}

fn vcf_unchecked(u1: &CMat, u2: &CMat) -> f64 {
    let cross = u1.adjoint() * u2;
    gram_determinant(&cross).sqrt().min(1.0)
}

/// Euclidean gradient of `U ↦ VCF(U_q, U)` under `⟨A, B⟩ = Re tr(Aᴴ B)`:
/// `−f · P_q U G⁻¹` with `G = I − Uᴴ P_q U`.
pub fn vcf_gradient(uq: &CMat, u: &CMat) -> Result<CMat> {
    if uq.nrows() != u.nrows() {
        return Err(StapError::Dimension(
            "bases live in different spaces".into(),
        ));
    }
    Ok(vcf_gradient_unchecked(uq, u).1)
}

/// `(f, ∇f)` without input validation.
fn vcf_gradient_unchecked(uq: &CMat, u: &CMat) -> (f64, CMat) {
    let s = u.ncols();
    let cross = uq.adjoint() * u;
    let g = linalg::identity(s) - cross.adjoint() * &cross;
    let f = g.determinant().re.max(0.0).sqrt();
    if f == 0.0 {
        return (0.0, CMat::zeros(u.nrows(), s));
    }
    let g_reg = if f < SINGULAR_EPS {
        g + linalg::identity(s).scale(SINGULAR_EPS)
    } else {
        g
    };
    let g_inv = match g_reg.clone().try_inverse() {
        Some(inv) => inv,
        None => (g_reg + linalg::identity(s).scale(SINGULAR_EPS))
            .try_inverse()
            .unwrap_or_else(|| CMat::zeros(s, s)),
    };
    let grad = (uq * (cross * g_inv)).scale(-f);
    (f, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub step_size: f64,
    pub max_iterations: usize,
    /// Stop when the relative objective change falls below this.
    pub tolerance: f64,
    /// Per-point weights summing to one; uniform when absent.
    pub weights: Option<Vec<f64>>,
    /// Subspace dimension; the Brennan clutter rank when absent.
    pub subspace_dim: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            step_size: 0.1,
            max_iterations: 100,
            tolerance: 1e-6,
            weights: None,
            subspace_dim: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(StapError::Config("step_size must be positive".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(StapError::Config("tolerance must be non-negative".into()));
        }
        if self.subspace_dim == Some(0) {
            return Err(StapError::Config("subspace_dim must be at least 1".into()));
        }
        if let Some(w) = &self.weights {
            if w.iter().any(|&x| !(x > 0.0)) {
                return Err(StapError::Config("weights must be positive".into()));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(StapError::Config(format!("weights sum to {total}, not 1")));
            }
        }
        Ok(())
    }

    fn resolved_weights(&self, n: usize) -> Result<Vec<f64>> {
        match &self.weights {
            Some(w) if w.len() != n => Err(StapError::Config(format!(
                "{} weights for {n} points",
                w.len()
            ))),
            Some(w) => Ok(w.clone()),
            None => Ok(vec![1.0 / n as f64; n]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CcmEstimate {
    /// `U Λ̂ Uᴴ + δ̂² I`.
    pub covariance: CMat,
    pub basis: GrassmannPoint,
    /// Objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub noise_floor: f64,
    /// Index into the input of the medoid used as the starting point.
    pub initial_point: usize,
}

fn objective(points: &[GrassmannPoint], weights: &[f64], u: &CMat) -> f64 {
    points
        .iter()
        .zip(weights)
        .map(|(p, w)| w * vcf_unchecked(&p.basis, u))
        .sum()
}

fn objective_gradient(points: &[GrassmannPoint], weights: &[f64], u: &CMat) -> CMat {
    let mut grad = CMat::zeros(u.nrows(), u.ncols());
    for (p, w) in points.iter().zip(weights) {
        grad += vcf_gradient_unchecked(&p.basis, u).1.scale(*w);
    }
    grad
}

/// Minimize `Σ_q w_q VCF(U_q, U)` over the Grassmann manifold and recompose `R̂`.
pub fn estimate_ccm(points: &[GrassmannPoint], cfg: &OptimizerConfig) -> Result<CcmEstimate> {
    cfg.validate()?;
    let first = points
        .first()
        .ok_or_else(|| StapError::InvalidInput("no clutter subspaces to average".into()))?;
    let (k, s) = (first.ambient_dim(), first.subspace_dim());
    if let Some(p) = points
        .iter()
        .find(|p| p.ambient_dim() != k || p.subspace_dim() != s || p.eigenvalues.len() != s)
    {
        return Err(StapError::Dimension(format!(
            "cell {} has a {}x{} basis, expected {k}x{s}",
            p.cell_index,
            p.ambient_dim(),
            p.subspace_dim()
        )));
    }
    for p in points {
        check_orthonormal(&p.basis, "input basis")?;
    }
    let weights = cfg.resolved_weights(points.len())?;

    let (initial_point, mut current) = points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, objective(points, &weights, &p.basis)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("points is non-empty");
    let mut u = points[initial_point].basis.clone();
    let mut trace = vec![current];
    let mut converged = current == 0.0;

    let mut iteration = 0;
    while !converged && iteration < cfg.max_iterations {
        iteration += 1;
        let euclidean = objective_gradient(points, &weights, &u);
        let riemannian = &euclidean - &u * (u.adjoint() * &euclidean);
        if linalg::frobenius(&riemannian) == 0.0 {
            converged = true;
            break;
        }
        let mut step = cfg.step_size;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = linalg::thin_qr(&(&u - riemannian.scale(step)));
            let value = objective(points, &weights, &candidate);
            if value <= current {
                accepted = Some((candidate, value));
                break;
            }
            step *= 0.5;
        }
        let Some((next, value)) = accepted else {
            // No descent within the halving budget: a stationary point for this step rule.
            converged = true;
            break;
        };
        let change = (current - value).abs() / current.abs().max(f64::MIN_POSITIVE);
        u = next;
        current = value;
        trace.push(current);
        if change < cfg.tolerance || current == 0.0 {
            converged = true;
        }
    }

    let mut eigenvalues = vec![0.0; s];
    let mut noise_floor = 0.0;
    for (p, w) in points.iter().zip(&weights) {
        for (acc, v) in eigenvalues.iter_mut().zip(&p.eigenvalues) {
            *acc += w * v;
        }
        noise_floor += w * if s < k {
            p.tail_mean
        } else {
            p.eigenvalues[s - 1]
        };
    }
    let lambda = DVector::from_iterator(s, eigenvalues.iter().map(|&v| Complex64::new(v, 0.0)));
    let mut covariance = &u * CMat::from_diagonal(&lambda) * u.adjoint();
    for i in 0..k {
        covariance[(i, i)] += Complex64::new(noise_floor, 0.0);
    }
    let covariance = linalg::hermitize(&covariance);

    Ok(CcmEstimate {
        covariance,
        basis: GrassmannPoint {
            basis: u,
            eigenvalues,
            tail_mean: noise_floor,
            cell_index: points[initial_point].cell_index,
        },
        objective_trace: trace,
        converged,
        noise_floor,
        initial_point,
    })
}
