//! Dense complex linear-algebra helpers shared by the estimators.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Result, StapError};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Relative condition number above which a solve logs a warning.
pub const CONDITION_WARN: f64 = 1e12;

/// `n` evenly spaced points over `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| lo + step * i as f64).collect()
        }
    }
}

pub fn to_db(power: f64) -> f64 {
    10.0 * power.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Mean of the diagonal, real part.
pub fn mean_diagonal(m: &CMat) -> f64 {
    let n = m.nrows().max(1);
    m.diagonal().iter().map(|z| z.re).sum::<f64>() / n as f64
}

/// `‖M − Mᴴ‖_F / ‖M‖_F` (0 for the zero matrix).
pub fn hermitian_defect(m: &CMat) -> f64 {
    let norm = frobenius(m);
    if norm == 0.0 {
        return 0.0;
    }
    frobenius(&(m - m.adjoint())) / norm
}

/// Average `m` with its adjoint, removing rounding asymmetry.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
///
/// Each eigenvector's largest-magnitude component (first index on ties) is rotated
/// to be real and positive, so the output does not depend on solver phase choices.
pub fn hermitian_eigen(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    if !m.is_square() {
        return Err(StapError::Dimension(format!(
            "eigen-decomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(StapError::Numerical(
            "eigen-decomposition input has non-finite entries".into(),
        ));
    }
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(hermitize(m), f64::EPSILON, 0)
        .ok_or_else(|| StapError::Numerical("Hermitian eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        normalize_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Rotate a vector so its largest-magnitude entry is real positive.
pub fn normalize_phase(v: &mut CVec) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = mag;
        }
    }
    if best_mag > 0.0 {
        let phase = v[best].conj() / best_mag;
        *v *= phase;
    }
}

/// Thin QR orthonormalization with the R diagonal made real non-negative.
pub fn thin_qr(m: &CMat) -> CMat {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols().min(r.nrows()) {
        let d = r[(j, j)];
        let mag = d.norm();
        if mag > 0.0 {
            let phase = d / mag;
            for i in 0..q.nrows() {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// `‖UᴴU − I‖_max`.
pub fn orthonormality_defect(u: &CMat) -> f64 {
    let gram = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((gram[(i, j)] - target).norm());
        }
    }
    worst
}

/// Cholesky factor of a Hermitian positive-definite matrix, used for repeated solves.
pub struct HermitianSolver {
    chol: Cholesky<Complex64, Dyn>,
    condition_estimate: f64,
}

impl HermitianSolver {
    /// Factor `m`; `None` when it is not numerically positive definite.
    pub fn new(m: &CMat) -> Option<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return None;
        }
        let chol = Cholesky::new(hermitize(m))?;
        let diag = chol.l_dirty().diagonal();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for z in diag.iter() {
            // Complex Cholesky takes square roots of negative pivots instead of failing.
            if !(z.re > 0.0) || z.im.abs() > 1e-12 * z.re {
                return None;
            }
            lo = lo.min(z.re);
            hi = hi.max(z.re);
        }
        if !(lo > 0.0) {
            return None;
        }
        let condition_estimate = (hi / lo).powi(2);
        Some(HermitianSolver {
            chol,
            condition_estimate,
        })
    }

    /// Square of the Cholesky diagonal spread; a cheap lower bound on the condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    pub fn solve(&self, b: &CVec) -> CVec {
        self.chol.solve(b)
    }

    /// `bᴴ M⁻¹ b`, computed as `‖L⁻¹ b‖²`.
    pub fn quadratic_form(&self, b: &CVec) -> f64 {
        let l = self.chol.l();
        let y = l
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a nonzero diagonal");
        y.norm_squared()
    }
}

/// `xᴴ y`.
pub fn inner(x: &CVec, y: &CVec) -> Complex64 {
    x.dotc(y)
}

/// `Σ_q w_q A_q`, summed in input order.
pub fn weighted_sum<'a>(mats: impl IntoIterator<Item = (&'a CMat, f64)>, n: usize) -> CMat {
    let mut acc = CMat::zeros(n, n);
    for (m, w) in mats {
        acc += m.scale(w);
    }
    acc
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
