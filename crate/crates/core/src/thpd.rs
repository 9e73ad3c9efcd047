//! Toeplitz Hermitian positive-definite covariance from a single snapshot.
//!
//! The snapshot is treated as a length-`K` autoregressive sequence. The regularized
//! Burg recursion estimates its reflection coefficients `μ_1..μ_{K−1}`; the inverse
//! Levinson recursion maps `(P0, μ)` back to an autocorrelation sequence whose
//! Toeplitz matrix is positive definite whenever every `|μ_n| < 1`.
//!
//! Sign conventions: the order-`n` forward prediction error is
//! `f_n(k) = Σ_i a_i^{(n)} x(k − i)` with `a_0 = 1`, and `r_l = E[x(k) x̄(k − l)]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StapError};
use crate::linalg::{CMat, ZERO};

/// Reflection coefficients are clamped to this magnitude.
pub const MAX_REFLECTION: f64 = 1.0 - 1e-6;

/// Default regularization weight `ψ1`.
pub const DEFAULT_PSI1: f64 = 0.01;

/// Output of the regularized Burg recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionSpectrum {
    /// Snapshot power `P0 = (1/K) Σ |x(k)|²`.
    pub p0: f64,
    /// `μ_1..μ_order`.
    pub mu: Vec<Complex64>,
    /// `P_0..P_order`, `P_n = P_{n−1} (1 − |μ_n|²)`.
    pub prediction_powers: Vec<f64>,
    pub psi1: f64,
    /// Number of coefficients that had to be clamped to [`MAX_REFLECTION`].
    pub clamped: usize,
}

impl ReflectionSpectrum {
    /// Build from `P0` and coefficients, clamping any `|μ| ≥ MAX_REFLECTION`.
    pub fn from_coefficients(p0: f64, mu: Vec<Complex64>) -> Result<Self> {
        if !(p0 > 0.0) || !p0.is_finite() {
            return Err(StapError::InvalidInput(format!(
                "P0 must be positive, got {p0}"
            )));
        }
        let mut clamped = 0;
        let mu: Vec<Complex64> = mu
            .into_iter()
            .map(|m| {
                let (c, hit) = clamp_reflection(m);
                clamped += hit as usize;
                c
            })
            .collect();
        let prediction_powers = prediction_powers(p0, &mu);
        Ok(ReflectionSpectrum {
            p0,
            mu,
            prediction_powers,
            psi1: 0.0,
            clamped,
        })
    }

    pub fn order(&self) -> usize {
        self.mu.len()
    }

    /// Extend with zero coefficients up to `len` (a lower-order AR model).
    pub fn zero_padded(mut self, len: usize) -> Self {
        if self.mu.len() < len {
            let last = *self.prediction_powers.last().expect("P0 is always present");
            self.prediction_powers.resize(len + 1, last);
            self.mu.resize(len, ZERO);
        }
        self
    }
}

fn clamp_reflection(mu: Complex64) -> (Complex64, bool) {
    let mag = mu.norm();
    if mag >= MAX_REFLECTION {
        let phase = if mag > 0.0 {
            mu / mag
        } else {
            Complex64::new(1.0, 0.0)
        };
        (phase * MAX_REFLECTION, true)
    } else {
        (mu, false)
    }
}

fn prediction_powers(p0: f64, mu: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(mu.len() + 1);
    let mut p = p0;
    out.push(p);
    for m in mu {
        p *= 1.0 - m.norm_sqr();
        out.push(p);
    }
    out
}

/// Levinson order update `a^{(n)}_k = a^{(n−1)}_k + μ_n ā^{(n−1)}_{n−k}`, `a^{(n)}_n = μ_n`.
fn levinson_step(a: &[Complex64], mu: Complex64) -> Vec<Complex64> {
    let n = a.len();
    let mut next = Vec::with_capacity(n + 1);
    next.push(Complex64::new(1.0, 0.0));
    for k in 1..n {
        next.push(a[k] + mu * a[n - k].conj());
    }
    next.push(mu);
    next
}

/// Regularized Burg estimate of `order` reflection coefficients of `x`.
///
/// The regularizer penalizes `Σ_k ν_k |a_k|²` with `ν_k = ψ1 (2π)² (k − n)²`. Its
/// numerator sum runs over `k = 1..n−1` and its denominator sum over `k = 0..n−1`.
pub fn burg_reflection(x: &[Complex64], psi1: f64, order: usize) -> Result<ReflectionSpectrum> {
    let len = x.len();
    if len < 2 {
        return Err(StapError::InvalidInput(
            "Burg needs at least two samples".into(),
        ));
    }
    if order > len - 1 {
        return Err(StapError::InvalidInput(format!(
            "Burg order {order} exceeds snapshot length − 1 = {}",
            len - 1
        )));
    }
    if !(psi1 >= 0.0) || !psi1.is_finite() {
        return Err(StapError::InvalidInput(format!(
            "psi1 must be non-negative, got {psi1}"
        )));
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(StapError::InvalidInput(
            "snapshot has non-finite entries".into(),
        ));
    }
    let p0 = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / len as f64;
    if !(p0 > 0.0) {
        return Err(StapError::InvalidInput("snapshot power is zero".into()));
    }

    let mut forward = x.to_vec();
    let mut backward = x.to_vec();
    let mut a = vec![Complex64::new(1.0, 0.0)];
    let mut mu = Vec::with_capacity(order);
    let mut clamped = 0;
    let reg_scale = psi1 * (2.0 * PI).powi(2);

    for n in 1..=order {
        let pairs = (len - n) as f64;
        let mut cross = ZERO;
        let mut energy = 0.0;
        for k in n..len {
            let (f, b) = (forward[k], backward[k - 1]);
            cross += f * b.conj();
            energy += f.norm_sqr() + b.norm_sqr();
        }
        let nu = |k: usize| reg_scale * (k as f64 - n as f64).powi(2);
        let reg_num: Complex64 = (1..n).map(|k| a[k] * a[n - k] * nu(k)).sum();
        let reg_den: f64 = (0..n).map(|k| nu(k) * a[k].norm_sqr()).sum();

        let numerator = cross * (2.0 / pairs) + reg_num * 2.0;
        let denominator = energy / pairs + 2.0 * reg_den;
        let raw = if denominator > 0.0 {
            -numerator / denominator
        } else {
            ZERO
        };
        let (m, hit) = clamp_reflection(raw);
        if hit {
            clamped += 1;
        }

        // Descending k keeps backward[k − 1] at order n − 1 while it is read.
        for k in (n..len).rev() {
            let (f, b) = (forward[k], backward[k - 1]);
            forward[k] = f + m * b;
            backward[k] = b + m.conj() * f;
        }
        a = levinson_step(&a, m);
        mu.push(m);
    }

    if clamped > 0 {
        log::debug!("Burg clamped {clamped} reflection coefficient(s) to |μ| = {MAX_REFLECTION}");
    }
    let prediction_powers = prediction_powers(p0, &mu);
    Ok(ReflectionSpectrum {
        p0,
        mu,
        prediction_powers,
        psi1,
        clamped,
    })
}

/// Inverse Levinson: `r_0 = P0`, `r_n = −μ_n P_{n−1} − Σ_{k=1}^{n−1} a_k^{(n−1)} r_{n−k}`.
pub fn reconstruct_autocorrelation(
    spec: &ReflectionSpectrum,
    len: usize,
) -> Result<Vec<Complex64>> {
    if len == 0 {
        return Err(StapError::InvalidInput(
            "autocorrelation length must be positive".into(),
        ));
    }
    if len - 1 > spec.mu.len() {
        return Err(StapError::InvalidInput(format!(
            "need {} reflection coefficients for {len} lags, have {}",
            len - 1,
            spec.mu.len()
        )));
    }
    if !(spec.p0 > 0.0) {
        return Err(StapError::InvalidInput("P0 must be positive".into()));
    }
    let mut r = Vec::with_capacity(len);
    r.push(Complex64::new(spec.p0, 0.0));
    let mut a = vec![Complex64::new(1.0, 0.0)];
    let mut power = spec.p0;
    for n in 1..len {
        let m = spec.mu[n - 1];
        let tail: Complex64 = (1..n).map(|k| a[k] * r[n - k]).sum();
        r.push(-m * power - tail);
        a = levinson_step(&a, m);
        power *= 1.0 - m.norm_sqr();
    }
    Ok(r)
}

/// A Toeplitz Hermitian covariance stored by its first column.
#[derive(Debug, Clone, PartialEq)]
pub struct ThpdCovariance {
    /// `r_0..r_{K−1}`, `r_0` real positive.
    pub r: Vec<Complex64>,
    pub cell_index: usize,
}

/// Wrap an autocorrelation sequence as a Toeplitz Hermitian covariance.
pub fn assemble_thpd(r: Vec<Complex64>, cell_index: usize) -> Result<ThpdCovariance> {
    let r0 = r
        .first()
        .ok_or_else(|| StapError::InvalidInput("empty autocorrelation".into()))?;
    if !(r0.re > 0.0) || r0.im.abs() > 1e-12 * r0.re {
        return Err(StapError::InvalidInput(format!(
            "r_0 must be real positive, got {r0}"
        )));
    }
    let mut r = r;
    r[0] = Complex64::new(r[0].re, 0.0);
    Ok(ThpdCovariance { r, cell_index })
}

impl ThpdCovariance {
    pub fn dim(&self) -> usize {
        self.r.len()
    }

    /// The constant diagonal `r_0`.
    pub fn center(&self) -> f64 {
        self.r[0].re
    }

    /// Entry `(i, j)`: `r_{i−j}` below the diagonal, `r̄_{j−i}` above.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        if i >= j {
            self.r[i - j]
        } else {
            self.r[j - i].conj()
        }
    }

    pub fn to_dense(&self) -> CMat {
        let k = self.dim();
        CMat::from_fn(k, k, |i, j| self.entry(i, j))
    }

    pub fn scaled(&self, factor: f64) -> ThpdCovariance {
        ThpdCovariance {
            r: self.r.iter().map(|z| z * factor).collect(),
            cell_index: self.cell_index,
        }
    }
}

/// Burg settings for building per-cell covariances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurgConfig {
    pub psi1: f64,
    /// AR order; `None` means `K − 1`. Missing coefficients are zero.
    pub order: Option<usize>,
}

impl Default for BurgConfig {
    fn default() -> Self {
        BurgConfig {
            psi1: DEFAULT_PSI1,
            order: None,
        }
    }
}

/// Snapshot → reflection coefficients → THPD covariance.
pub fn thpd_from_snapshot(
    x: &[Complex64],
    cell_index: usize,
    cfg: &BurgConfig,
) -> Result<(ThpdCovariance, ReflectionSpectrum)> {
    let k = x.len();
    let order = cfg.order.unwrap_or(k.saturating_sub(1));
    let spec = burg_reflection(x, cfg.psi1, order)?.zero_padded(k - 1);
    let r = reconstruct_autocorrelation(&spec, k)?;
    Ok((assemble_thpd(r, cell_index)?, spec))
}
