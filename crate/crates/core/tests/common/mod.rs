//! Reference computations for the integration and acceptance tests. Everything here
//! is written directly from textbook definitions and uses nalgebra's own solvers,
//! so it shares no code path with the library under test.

#![allow(dead_code)]

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Orthonormal basis of the span of a complex Gaussian `k × s` matrix.
pub fn random_basis(k: usize, s: usize, rng: &mut ChaCha8Rng) -> CMat {
    let m = CMat::from_fn(k, s, |_, _| gaussian(rng));
    m.qr().q()
}

/// Haar-ish random unitary `s × s`.
pub fn random_unitary(s: usize, rng: &mut ChaCha8Rng) -> CMat {
    random_basis(s, s, rng)
}

/// Reflection coefficient with magnitude uniform on `[0, max_mag]` and uniform phase.
pub fn random_reflection(rng: &mut ChaCha8Rng, max_mag: f64) -> Complex64 {
    Complex64::from_polar(
        max_mag * rng.random::<f64>(),
        std::f64::consts::TAU * rng.random::<f64>(),
    )
}

/// Reflection coefficients from an autocorrelation sequence by the textbook
/// Levinson–Durbin recursion.
///
/// For order `n` the forward predictor `e(k) = x(k) + Σ_{i=1}^{n} a_i x(k − i)`
/// satisfies `Σ_i a_i r_{j−i} = −r_j` for `j = 1..n`, with `r_{−m} = conj(r_m)`.
/// The `n`-th reflection coefficient is the last predictor coefficient `a_n`.
pub fn reflection_from_levinson_durbin(r: &[Complex64]) -> Vec<Complex64> {
    let mut a: Vec<Complex64> = vec![c(1.0, 0.0)];
    let mut err = r[0].re;
    let mut out = Vec::new();
    for n in 1..r.len() {
        let acc: Complex64 = (0..n).map(|i| a[i] * r[n - i]).sum();
        let k = -acc / err;
        let mut next = a.clone();
        next.push(c(0.0, 0.0));
        for i in 1..=n {
            next[i] = a.get(i).copied().unwrap_or_default() + k * a[n - i].conj();
        }
        a = next;
        err *= 1.0 - k.norm_sqr();
        out.push(k);
    }
    out
}

/// Same quantity as [`reflection_from_levinson_durbin`], solving each order's
/// normal equations with a dense LU. Only well conditioned for short sequences.
pub fn reflection_from_yule_walker(r: &[Complex64]) -> Vec<Complex64> {
    let lag = |m: isize| -> Complex64 {
        if m >= 0 {
            r[m as usize]
        } else {
            r[(-m) as usize].conj()
        }
    };
    (1..r.len())
        .map(|n| {
            let t = CMat::from_fn(n, n, |j, i| lag(j as isize - i as isize));
            let rhs = DVector::from_fn(n, |j, _| -r[j + 1]);
            let a = t
                .lu()
                .solve(&rhs)
                .expect("Yule–Walker system is nonsingular");
            a[n - 1]
        })
        .collect()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigenvalues(m: &CMat) -> Vec<f64> {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let mut v: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// `sqrt(det(Sᴴ S))`, the `d`-volume spanned by the columns of `S`.
pub fn gram_volume(s: &CMat) -> f64 {
    (s.adjoint() * s).determinant().re.max(0.0).sqrt()
}

/// `Π sqrt(1 − σ_i²)` over the singular values of `U1ᴴ U2`.
pub fn sine_product(u1: &CMat, u2: &CMat) -> f64 {
    let sv = (u1.adjoint() * u2).svd(false, false).singular_values;
    sv.iter()
        .map(|&s| (1.0 - (s * s).min(1.0)).sqrt())
        .product()
}

/// `sqrt(det(I − Uᴴ Uq Uqᴴ U))` for any (not necessarily orthonormal) `U`.
pub fn raw_vcf(uq: &CMat, u: &CMat) -> f64 {
    let m = uq.adjoint() * u;
    let s = u.ncols();
    (CMat::identity(s, s) - m.adjoint() * m)
        .determinant()
        .re
        .max(0.0)
        .sqrt()
}

/// Largest principal angle between two orthonormal bases.
pub fn max_principal_angle(u1: &CMat, u2: &CMat) -> f64 {
    let sv = (u1.adjoint() * u2).svd(false, false).singular_values;
    sv.iter()
        .fold(f64::INFINITY, |m, &s| m.min(s))
        .clamp(0.0, 1.0)
        .acos()
}

/// `Re tr(Aᴴ B)`.
pub fn real_inner(a: &CMat, b: &CMat) -> f64 {
    (a.adjoint() * b).trace().re
}

/// Random direction in the horizontal space at `u`: `(I − UUᴴ) Z`, unit Frobenius norm.
pub fn random_tangent(u: &CMat, rng: &mut ChaCha8Rng) -> CMat {
    let z = CMat::from_fn(u.nrows(), u.ncols(), |_, _| gaussian(rng));
    let t = &z - u * (u.adjoint() * &z);
    let n = t.norm();
    t / c(n, 0.0)
}

/// Print one acceptance line straight to stdout so it is visible even for
/// passing tests.
pub fn report(criterion: &str, pass: bool, detail: &str) {
    let line = format!(
        "{} {criterion}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}
