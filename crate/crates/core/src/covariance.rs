//! Limit covariances of centered statistics.
//!
//! For observables `(f_i, M_i)` the limit pair `(G_i, G_j)` has
//!
//! ```text
//! E G_i G_j     = sum_{n>=1} ((n-1) t_i t_j + beta) (a_n(f_i) a_-n(f_j) + a_-n(f_i) a_n(f_j))
//! E G_i conj(G_j) = sum_{n>=1} ((n-1) t_i conj(t_j) + alpha)
//!                   (a_n(f_i) conj(a_n(f_j)) b^2n + a_-n(f_i) conj(a_-n(f_j)) a^-2n)
//! ```
//!
//! with `t = lim N^-1 Tr M`, `alpha = lim N^-1 Tr M_i M_j^*`, `beta = lim N^-1 Tr M_i M_j`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{logdet_series, resolvent_series, LaurentPoly, PhiSign, Region, Weight};
use crate::linalg::{trace_of_product, ComplexMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Tolerance on the elliptic normalization `sum |a_n|^2 b^2n + |a_-n|^2 a^-2n = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    /// `E G_i G_j`.
    pub pseudo: Complex64,
    /// `E G_i conj(G_j)`.
    pub hermitian: Complex64,
}

impl CovarianceReport {
    pub const ZERO: Self = Self {
        pseudo: ZERO,
        hermitian: ZERO,
    };

    /// Covariance of the real parts, `E Re G_i Re G_j`.
    pub fn real_part_covariance(&self) -> f64 {
        0.5 * (self.hermitian + self.pseudo).re
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitParams {
    pub a: f64,
    pub b: f64,
    pub tau_i: Complex64,
    pub tau_j: Complex64,
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl LimitParams {
    /// Both weights equal to the identity.
    pub fn identity(a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            tau_i: ONE,
            tau_j: ONE,
            alpha: ONE,
            beta: ONE,
        }
    }

    /// Scaled dyads `M = sqrt(N) a b^*` have `t = 0`; `alpha` and `beta` are
    /// products of the inner products in `kappa`.
    pub fn dyad(a: f64, b: f64, kappa: &DyadKappa) -> Self {
        Self {
            a,
            b,
            tau_i: ZERO,
            tau_j: ZERO,
            alpha: kappa.alpha(),
            beta: kappa.beta(),
        }
    }

    /// Plug-in parameters for a pair of weights at dimension `dim`.
    pub fn from_weights(wi: &Weight, wj: &Weight, dim: usize, a: f64, b: f64) -> Result<Self> {
        let n = dim as f64;
        let tau = |w: &Weight| match w {
            Weight::Identity => ONE,
            Weight::ScaledDyad { .. } => ZERO,
            Weight::Custom { tau, .. } => *tau,
        };
        let (alpha, beta) = match (wi, wj) {
            (Weight::Identity, Weight::Identity) => (ONE, ONE),
            (Weight::ScaledDyad { left: ai, right: bi }, Weight::ScaledDyad { left: aj, right: bj }) => {
                let k = DyadKappa::from_vectors(ai, bi, aj, bj)?;
                (k.alpha(), k.beta())
            }
            (Weight::ScaledDyad { .. }, _) | (_, Weight::ScaledDyad { .. }) => (ZERO, ZERO),
            _ => {
                let mi = dense(wi, dim);
                let mj = dense(wj, dim);
                (
                    trace_of_product(&mi, &mj.adjoint())? / n,
                    trace_of_product(&mi, &mj)? / n,
                )
            }
        };
        Ok(Self {
            a,
            b,
            tau_i: tau(wi),
            tau_j: tau(wj),
            alpha,
            beta,
        })
    }
}

fn dense(w: &Weight, dim: usize) -> ComplexMatrix {
    match w {
        Weight::Identity => ComplexMatrix::identity(dim),
        Weight::Custom { m, .. } => m.clone(),
        Weight::ScaledDyad { left, right } => {
            let s = (dim as f64).sqrt();
            ComplexMatrix::from_fn(dim, dim, |i, j| left[i] * right[j].conj() * s)
        }
    }
}

/// Inner products `kappa^{x,y}_{ij} = x_i^* y_j` for two dyads `(a_i, b_i)`, `(a_j, b_j)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DyadKappa {
    pub bb_ij: Complex64,
    pub aa_ji: Complex64,
    pub ba_ij: Complex64,
    pub ba_ji: Complex64,
}

impl DyadKappa {
    pub fn from_vectors(ai: &[Complex64], bi: &[Complex64], aj: &[Complex64], bj: &[Complex64]) -> Result<Self> {
        let n = ai.len();
        if [bi.len(), aj.len(), bj.len()].iter().any(|&l| l != n) {
            return Err(Error::DimensionMismatch("dyad vectors differ in length".into()));
        }
        let dot = |x: &[Complex64], y: &[Complex64]| -> Complex64 { x.iter().zip(y).map(|(u, v)| u.conj() * v).sum() };
        Ok(Self {
            bb_ij: dot(bi, bj),
            aa_ji: dot(aj, ai),
            ba_ij: dot(bi, aj),
            ba_ji: dot(bj, ai),
        })
    }

    /// `lim N^-1 Tr M_i M_j^*`.
    pub fn alpha(&self) -> Complex64 {
        self.bb_ij * self.aa_ji
    }

    /// `lim N^-1 Tr M_i M_j`.
    pub fn beta(&self) -> Complex64 {
        self.ba_ij * self.ba_ji
    }
}

fn check_inner_radius(a: f64, fs: &[&LaurentPoly]) -> Result<()> {
    if a <= 0.0 && fs.iter().any(|f| f.has_negative_powers()) {
        return Err(Error::NegativePowersWithZeroInnerRadius);
    }
    Ok(())
}

fn max_degree(fi: &LaurentPoly, fj: &LaurentPoly) -> i32 {
    [fi.n_plus(), fi.n_minus(), fj.n_plus(), fj.n_minus()]
        .into_iter()
        .max()
        .unwrap_or(0) as i32
}

pub fn theorem_covariance(fi: &LaurentPoly, fj: &LaurentPoly, p: &LimitParams) -> Result<CovarianceReport> {
    check_inner_radius(p.a, &[fi, fj])?;
    let b2 = p.b * p.b;
    let a2_inv = if p.a > 0.0 { 1.0 / (p.a * p.a) } else { 0.0 };
    let mut pseudo = ZERO;
    let mut hermitian = ZERO;
    for n in 1..=max_degree(fi, fj) {
        let m = (n - 1) as f64;
        let (ip, im) = (fi.coeff(n), fi.coeff(-n));
        let (jp, jm) = (fj.coeff(n), fj.coeff(-n));
        pseudo += (p.tau_i * p.tau_j * m + p.beta) * (ip * jm + im * jp);
        let mut h = ip * jp.conj() * b2.powi(n);
        if im != ZERO && jm != ZERO {
            h += im * jm.conj() * a2_inv.powi(n);
        }
        hermitian += (p.tau_i * p.tau_j.conj() * m + p.alpha) * h;
    }
    Ok(CovarianceReport { pseudo, hermitian })
}

/// Identity-weight covariance in linear-statistics form:
/// `E G_i G_j = sum_{n in Z} |n| a_n(f_i) a_-n(f_j)` and
/// `E G_i conj(G_j) = sum_{n >= 1} n (a_n conj(a_n) b^2n + a_-n conj(a_-n) a^-2n)`.
pub fn linear_statistic_covariance(fi: &LaurentPoly, fj: &LaurentPoly, a: f64, b: f64) -> Result<CovarianceReport> {
    check_inner_radius(a, &[fi, fj])?;
    let mut pseudo = ZERO;
    for (n, c) in fi.terms().filter(|t| t.0 != 0) {
        pseudo += c * fj.coeff(-n) * n.unsigned_abs() as f64;
    }
    let mut hermitian = ZERO;
    for (n, c) in fi.terms().filter(|t| t.0 != 0) {
        let k = n.unsigned_abs() as i32;
        let r = if n > 0 { b * b } else { 1.0 / (a * a) };
        hermitian += c * fj.coeff(n).conj() * k as f64 * r.powi(k);
    }
    Ok(CovarianceReport { pseudo, hermitian })
}

/// Limit covariance of `Tr phi_n^s(A)` with itself. The phi functions are
/// mutually uncorrelated, see [`white_noise_cross_covariance`].
pub fn white_noise_covariance(n: u32, sign: PhiSign, a: f64, b: f64) -> CovarianceReport {
    let k = n as f64;
    if a <= 0.0 {
        // phi reduces to (z/b)^n
        return CovarianceReport {
            pseudo: ZERO,
            hermitian: Complex64::new(k, 0.0),
        };
    }
    CovarianceReport {
        pseudo: Complex64::new(sign.value() * 2.0 * k * (a / b).powi(n as i32), 0.0),
        hermitian: Complex64::new(2.0 * k, 0.0),
    }
}

pub fn white_noise_cross_covariance(
    (n, s): (u32, PhiSign),
    (m, t): (u32, PhiSign),
    a: f64,
    b: f64,
) -> CovarianceReport {
    if n == m && s == t {
        white_noise_covariance(n, s, a, b)
    } else {
        CovarianceReport::ZERO
    }
}

fn regions_valid(z: Complex64, region: Region, a: f64, b: f64) -> Result<()> {
    let r = z.norm();
    let ok = match region {
        Region::Inside => r < a,
        Region::Outside => r > b,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::RegionViolation(format!(
            "|z| = {r} is not {} the annulus [{a}, {b}]",
            match region {
                Region::Inside => "inside",
                Region::Outside => "outside",
            }
        )))
    }
}

/// Limit covariance of the centered resolvent traces at `z` and `z'`.
pub fn resolvent_kernel(z: Complex64, zp: Complex64, regions: (Region, Region), a: f64, b: f64) -> Result<CovarianceReport> {
    regions_valid(z, regions.0, a, b)?;
    regions_valid(zp, regions.1, a, b)?;
    let w = z * zp.conj();
    Ok(match regions {
        (Region::Inside, Region::Inside) => {
            let a2 = a * a;
            CovarianceReport {
                pseudo: ZERO,
                hermitian: a2 / ((a2 - w) * (a2 - w)),
            }
        }
        (Region::Outside, Region::Outside) => {
            let b2 = b * b;
            CovarianceReport {
                pseudo: ZERO,
                hermitian: b2 / ((w - b2) * (w - b2)),
            }
        }
        _ => CovarianceReport {
            pseudo: -1.0 / ((zp - z) * (zp - z)),
            hermitian: ZERO,
        },
    })
}

/// Limit covariance of the real log-modulus statistics at `z` and `z'`.
pub fn logdet_kernel(z: Complex64, zp: Complex64, regions: (Region, Region), a: f64, b: f64) -> Result<f64> {
    regions_valid(z, regions.0, a, b)?;
    regions_valid(zp, regions.1, a, b)?;
    let v = match regions {
        (Region::Inside, Region::Inside) => 1.0 - z * zp.conj() / (a * a),
        (Region::Outside, Region::Outside) => 1.0 - b * b / (z * zp.conj()),
        (Region::Inside, Region::Outside) => 1.0 - z / zp,
        (Region::Outside, Region::Inside) => 1.0 - zp / z,
    };
    Ok(-0.5 * v.norm().ln())
}

/// [`resolvent_kernel`] by truncated summation of the identity-weight series.
pub fn resolvent_kernel_series(
    z: Complex64,
    zp: Complex64,
    regions: (Region, Region),
    a: f64,
    b: f64,
    truncation: u32,
) -> Result<CovarianceReport> {
    regions_valid(z, regions.0, a, b)?;
    regions_valid(zp, regions.1, a, b)?;
    let fi = resolvent_series(z, regions.0, truncation);
    let fj = resolvent_series(zp, regions.1, truncation);
    linear_statistic_covariance(&fi, &fj, a, b)
}

/// [`logdet_kernel`] by truncated summation of the identity-weight series.
pub fn logdet_kernel_series(
    z: Complex64,
    zp: Complex64,
    regions: (Region, Region),
    a: f64,
    b: f64,
    truncation: u32,
) -> Result<f64> {
    regions_valid(z, regions.0, a, b)?;
    regions_valid(zp, regions.1, a, b)?;
    let fi = logdet_series(z, regions.0, truncation);
    let fj = logdet_series(zp, regions.1, truncation);
    Ok(linear_statistic_covariance(&fi, &fj, a, b)?.real_part_covariance())
}

pub fn dyad_covariance(fi: &LaurentPoly, fj: &LaurentPoly, kappa: &DyadKappa, a: f64, b: f64) -> Result<CovarianceReport> {
    theorem_covariance(fi, fj, &LimitParams::dyad(a, b, kappa))
}

/// `sum_n |a_n|^2 b^2n + |a_-n|^2 a^-2n` over `n >= 1`.
pub fn elliptic_norm(f: &LaurentPoly, a: f64, b: f64) -> Result<f64> {
    check_inner_radius(a, &[f])?;
    Ok(f
        .terms()
        .filter(|t| t.0 != 0)
        .map(|(n, c)| {
            let r = if n > 0 { b * b } else { 1.0 / (a * a) };
            c.norm_sqr() * r.powi(n.abs())
        })
        .sum())
}

/// `rho = 2 sum_{n>=1} a_n a_-n` for a normalized `f`.
pub fn elliptic_rho(f: &LaurentPoly, a: f64, b: f64) -> Result<Complex64> {
    let norm = elliptic_norm(f, a, b)?;
    if (norm - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NormalizationError { norm });
    }
    Ok((1..=f.n_plus() as i32).map(|n| f.coeff(n) * f.coeff(-n)).sum::<Complex64>() * 2.0)
}
