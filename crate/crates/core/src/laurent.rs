//! Laurent test functions and the centered statistics `Tr f(A) M - a_0(f) Tr M`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lu_factor, trace, ComplexMatrix, PowerLadder};
use crate::model::SingleRingModel;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Finite Laurent polynomial `sum_n a_n z^n`. Zero coefficients are not stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LaurentPoly {
    coeffs: BTreeMap<i32, Complex64>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(terms: impl IntoIterator<Item = (i32, Complex64)>) -> Self {
        let mut p = Self::zero();
        for (n, c) in terms {
            p.add_term(n, c);
        }
        p
    }

    pub fn monomial(n: i32, c: Complex64) -> Self {
        Self::new([(n, c)])
    }

    /// From `[n, re, im]` triples.
    pub fn from_triples(triples: &[(i32, f64, f64)]) -> Self {
        Self::new(triples.iter().map(|&(n, re, im)| (n, Complex64::new(re, im))))
    }

    pub fn add_term(&mut self, n: i32, c: Complex64) {
        let entry = self.coeffs.entry(n).or_insert(ZERO);
        *entry += c;
        if *entry == ZERO {
            self.coeffs.remove(&n);
        }
    }

    /// `a_n`, zero outside the stored range.
    pub fn coeff(&self, n: i32) -> Complex64 {
        self.coeffs.get(&n).copied().unwrap_or(ZERO)
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        self.coeffs.iter().map(|(&n, &c)| (n, c))
    }

    /// Highest positive degree `n_+` (0 if none).
    pub fn n_plus(&self) -> u32 {
        self.coeffs.keys().next_back().map_or(0, |&n| n.max(0) as u32)
    }

    /// Highest negative degree `n_-` (0 if none).
    pub fn n_minus(&self) -> u32 {
        self.coeffs.keys().next().map_or(0, |&n| (-n).max(0) as u32)
    }

    pub fn has_negative_powers(&self) -> bool {
        self.n_minus() > 0
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self::new(self.terms().map(|(n, a)| (n, a * c)))
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self::new(self.terms().chain(other.terms()))
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.terms().map(|(n, a)| a * z.powi(n)).sum()
    }

    /// Copy with the `z^0` term removed.
    pub fn centered(&self) -> Self {
        Self::new(self.terms().filter(|&(n, _)| n != 0))
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms().map(|(n, a)| format!("({a})z^{n}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiSign {
    Plus,
    Minus,
}

impl PhiSign {
    pub fn value(self) -> f64 {
        match self {
            PhiSign::Plus => 1.0,
            PhiSign::Minus => -1.0,
        }
    }
}

/// `phi_n^{+/-}(z) = (z/b)^n +/- (a/z)^n`; with `a = 0` only the first term remains.
pub fn phi_basis(n: u32, sign: PhiSign, a: f64, b: f64) -> LaurentPoly {
    assert!(n >= 1, "phi basis starts at n = 1");
    assert!(b > 0.0 && a >= 0.0);
    let n_i = n as i32;
    let mut p = LaurentPoly::monomial(n_i, Complex64::new(b.powi(-n_i), 0.0));
    if a > 0.0 {
        p.add_term(-n_i, Complex64::new(sign.value() * a.powi(n_i), 0.0));
    }
    p
}

/// Coordinates `(c_n^+, c_n^-)` of the degree-`n` part of `f` in the phi basis.
pub fn to_phi_coordinates(f: &LaurentPoly, n: u32, a: f64, b: f64) -> (Complex64, Complex64) {
    let n_i = n as i32;
    let pos = f.coeff(n_i) * b.powi(n_i);
    if a == 0.0 {
        return (pos / 2.0, pos / 2.0);
    }
    let neg = f.coeff(-n_i) * a.powi(-n_i);
    ((pos + neg) / 2.0, (pos - neg) / 2.0)
}

/// Inverse of [`to_phi_coordinates`]: `(a_n, a_-n)`.
pub fn from_phi_coordinates(c_plus: Complex64, c_minus: Complex64, n: u32, a: f64, b: f64) -> (Complex64, Complex64) {
    let n_i = n as i32;
    let bn = b.powi(-n_i);
    let an = a.powi(n_i);
    ((c_plus + c_minus) * bn, (c_plus - c_minus) * an)
}

/// The matrix `M` in `Tr f(A) M`.
#[derive(Clone, Debug)]
pub enum Weight {
    Identity,
    /// `M = sqrt(N) a b^*` with `a = left`, `b = right`.
    ScaledDyad { left: Vec<Complex64>, right: Vec<Complex64> },
    Custom { m: ComplexMatrix, tau: Complex64 },
}

impl Weight {
    pub fn dyad(left: Vec<Complex64>, right: Vec<Complex64>) -> Result<Self> {
        if left.len() != right.len() || left.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "dyad vectors of lengths {} and {}",
                left.len(),
                right.len()
            )));
        }
        Ok(Weight::ScaledDyad { left, right })
    }

    /// `e_j e_i^*` scaled by `sqrt(N)`, picking out `sqrt(N) (f(A))_{ij}`.
    pub fn matrix_entry(i: usize, j: usize, dim: usize) -> Self {
        let mut left = vec![ZERO; dim];
        let mut right = vec![ZERO; dim];
        left[j] = Complex64::new(1.0, 0.0);
        right[i] = Complex64::new(1.0, 0.0);
        Weight::ScaledDyad { left, right }
    }

    pub fn custom(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch("weight matrix must be square".into()));
        }
        let tau = trace(&m) / m.rows() as f64;
        Ok(Weight::Custom { m, tau })
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        let got = match self {
            Weight::Identity => return Ok(()),
            Weight::ScaledDyad { left, .. } => left.len(),
            Weight::Custom { m, .. } => m.rows(),
        };
        if got != dim {
            return Err(Error::DimensionMismatch(format!("weight of size {got} against a {dim}x{dim} matrix")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Observable {
    pub f: LaurentPoly,
    pub weight: Weight,
}

impl Observable {
    pub fn new(f: LaurentPoly, weight: Weight) -> Self {
        Self { f, weight }
    }

    pub fn trace(f: LaurentPoly) -> Self {
        Self::new(f, Weight::Identity)
    }
}

/// Side of the annulus a spectral parameter `z` lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Inside,
    Outside,
}

/// Classifies `z` relative to the annulus, keeping a margin `0.1 (b - a)`.
pub fn region_of(z: Complex64, a: f64, b: f64) -> Result<Region> {
    let delta = 0.1 * (b - a);
    let (lo, hi) = (a - delta, b + delta);
    let r = z.norm();
    if r > hi {
        Ok(Region::Outside)
    } else if r < lo {
        Ok(Region::Inside)
    } else {
        Err(Error::RingProximity { z, lo, hi })
    }
}

/// `Tr (z - A)^-1`, uncentered.
pub fn resolvent_trace(a: &ComplexMatrix, z: Complex64) -> Result<Complex64> {
    let lu = lu_factor(&a.shifted_negation(z))?;
    Ok(trace(&lu.invert()))
}

/// `Tr (z - A)^-1` minus its limit mean: `N/z` outside the ring, 0 inside.
pub fn resolvent_statistic(a: &ComplexMatrix, z: Complex64, model: &SingleRingModel) -> Result<Complex64> {
    let region = region_of(z, model.a(), model.b())?;
    let raw = resolvent_trace(a, z)?;
    Ok(match region {
        Region::Outside => raw - a.rows() as f64 / z,
        Region::Inside => raw,
    })
}

/// `log|det(z - A)|` minus `N log|z|` (outside) or `Tr log T` (inside).
pub fn logdet_statistic(a: &ComplexMatrix, z: Complex64, model: &SingleRingModel) -> Result<f64> {
    let region = region_of(z, model.a(), model.b())?;
    let lu = lu_factor(&a.shifted_negation(z))?;
    let centering = match region {
        Region::Outside => a.rows() as f64 * z.norm().ln(),
        Region::Inside => model.singular_values().iter().map(|s| s.ln()).sum(),
    };
    Ok(lu.log_abs_det() - centering)
}

/// Truncated Laurent series in `w` of `1/(z - w)` on the given side.
/// Outside: `sum_{k>=1} z^{-k-1} w^k` (the constant `1/z` is the centering and
/// is dropped); inside: `-sum_{m>=1} z^{m-1} w^{-m}`.
pub fn resolvent_series(z: Complex64, region: Region, truncation: u32) -> LaurentPoly {
    let t = truncation as i32;
    match region {
        Region::Outside => LaurentPoly::new((1..=t).map(|k| (k, z.powi(-k - 1)))),
        Region::Inside => LaurentPoly::new((1..=t).map(|m| (-m, -z.powi(m - 1)))),
    }
}

/// Truncated series of the centered `log(z - w)`, whose real part is the log-modulus statistic.
pub fn logdet_series(z: Complex64, region: Region, truncation: u32) -> LaurentPoly {
    let t = truncation as i32;
    match region {
        Region::Outside => LaurentPoly::new((1..=t).map(|m| (m, -z.powi(-m) / m as f64))),
        Region::Inside => LaurentPoly::new((1..=t).map(|m| (-m, -z.powi(m) / m as f64))),
    }
}

/// Evaluates many statistics against one sampled matrix, sharing the power
/// ladder and LU factorization between them.
pub struct StatisticEvaluator<'a> {
    ladder: PowerLadder<'a>,
}

impl<'a> StatisticEvaluator<'a> {
    pub fn new(a: &'a ComplexMatrix) -> Result<Self> {
        Ok(Self {
            ladder: PowerLadder::new(a)?,
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.ladder.base()
    }

    pub fn dim(&self) -> usize {
        self.ladder.base().rows()
    }

    /// `sum_{n != 0} a_n Tr(A^n M)`.
    pub fn eval(&mut self, obs: &Observable) -> Result<Complex64> {
        obs.weight.check_dim(self.dim())?;
        match &obs.weight {
            Weight::Identity => {
                let mut acc = ZERO;
                for (n, c) in obs.f.terms().filter(|t| t.0 != 0) {
                    acc += c * self.ladder.trace_power(n)?;
                }
                Ok(acc)
            }
            Weight::Custom { m, .. } => {
                let mut acc = ZERO;
                for (n, c) in obs.f.terms().filter(|t| t.0 != 0) {
                    acc += c * self.ladder.trace_power_times(n, m)?;
                }
                Ok(acc)
            }
            Weight::ScaledDyad { left, right } => {
                let v = self.apply(&obs.f, left)?;
                let inner: Complex64 = right.iter().zip(&v).map(|(b, x)| b.conj() * x).sum();
                Ok(inner * (self.dim() as f64).sqrt())
            }
        }
    }

    /// `(f(A) - a_0 I) v` via repeated products and LU solves.
    pub fn apply(&mut self, f: &LaurentPoly, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.dim();
        if v.len() != n {
            return Err(Error::DimensionMismatch(format!("vector of length {} for dimension {n}", v.len())));
        }
        let mut out = vec![ZERO; n];
        let mut w = v.to_vec();
        for k in 1..=f.n_plus() as i32 {
            w = self.ladder.base().matvec(&w)?;
            let c = f.coeff(k);
            if c != ZERO {
                out.iter_mut().zip(&w).for_each(|(o, x)| *o += c * x);
            }
        }
        if f.has_negative_powers() {
            let lu = self.ladder.lu()?;
            let mut w = v.to_vec();
            for k in 1..=f.n_minus() as i32 {
                lu.solve_in_place(&mut w)?;
                let c = f.coeff(-k);
                if c != ZERO {
                    out.iter_mut().zip(&w).for_each(|(o, x)| *o += c * x);
                }
            }
        }
        Ok(out)
    }
}

pub fn eval_statistic(obs: &Observable, a: &ComplexMatrix) -> Result<Complex64> {
    StatisticEvaluator::new(a)?.eval(obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigenvalues, matmul};
    use crate::model::{Composition, SingularProfile};
    use crate::rng::{ginibre, SeededStream};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn coefficient_access() {
        let f = LaurentPoly::from_triples(&[(2, 1.0, 0.0), (-3, 0.0, 1.0), (0, 5.0, 0.0)]);
        assert_eq!(f.n_plus(), 2);
        assert_eq!(f.n_minus(), 3);
        assert_eq!(f.coeff(7), ZERO);
        assert_eq!(f.coeff(-3), c(0.0, 1.0));
        let g = f.plus(&LaurentPoly::monomial(2, c(-1.0, 0.0)));
        assert_eq!(g.n_plus(), 0);
    }

    #[test]
    fn phi_basis_coefficients() {
        let p = phi_basis(1, PhiSign::Plus, 1.0, 1.0);
        assert_eq!(p, LaurentPoly::from_triples(&[(1, 1.0, 0.0), (-1, 1.0, 0.0)]));
        let p = phi_basis(2, PhiSign::Minus, 1.0, 2.0);
        assert_eq!(p, LaurentPoly::from_triples(&[(2, 0.25, 0.0), (-2, -1.0, 0.0)]));
        let p = phi_basis(3, PhiSign::Minus, 0.0, 2.0);
        assert_eq!(p, LaurentPoly::from_triples(&[(3, 0.125, 0.0)]));
    }

    #[test]
    fn phi_coordinates_recover_basis_elements() {
        let (a, b) = (2f64.sqrt(), 2.4664414);
        let (cp, cm) = to_phi_coordinates(&phi_basis(2, PhiSign::Plus, a, b), 2, a, b);
        assert!(rel(cp, c(1.0, 0.0)) < 1e-14 && cm.norm() < 1e-14);
        let (cp, cm) = to_phi_coordinates(&phi_basis(2, PhiSign::Minus, a, b), 2, a, b);
        assert!(cp.norm() < 1e-14 && rel(cm, c(1.0, 0.0)) < 1e-14);
    }

    #[test]
    fn eval_trace_statistics() {
        let a = ComplexMatrix::from_real_diag(&[1.0, 2.0, 3.0]);
        let f = LaurentPoly::monomial(1, c(1.0, 0.0));
        assert_eq!(eval_statistic(&Observable::trace(f), &a).unwrap(), c(6.0, 0.0));

        let a = ComplexMatrix::from_real_diag(&[2.0, 0.5]);
        let f = LaurentPoly::from_triples(&[(1, 1.0, 0.0), (-1, 1.0, 0.0), (0, 9.0, 0.0)]);
        assert!(rel(eval_statistic(&Observable::trace(f), &a).unwrap(), c(5.0, 0.0)) < 1e-15);
    }

    #[test]
    fn dyad_picks_scaled_entry() {
        let a = ginibre(4, &mut SeededStream::new(0, 1).rng());
        let obs = Observable::new(LaurentPoly::monomial(1, c(1.0, 0.0)), Weight::matrix_entry(0, 0, 4));
        let v = eval_statistic(&obs, &a).unwrap();
        assert!(rel(v, a[(0, 0)] * 2.0) < 1e-15);

        let obs = Observable::new(LaurentPoly::from_triples(&[(2, 1.0, 0.0), (-1, 0.0, 2.0)]), Weight::matrix_entry(1, 3, 4));
        let inv = lu_factor(&a).unwrap().invert();
        let a2 = matmul(&a, &a).unwrap();
        let expected = (a2[(1, 3)] + c(0.0, 2.0) * inv[(1, 3)]) * 2.0;
        assert!(rel(eval_statistic(&obs, &a).unwrap(), expected) < 1e-12);
    }

    #[test]
    fn custom_weight_matches_dyad() {
        let n = 6;
        let a = ginibre(n, &mut SeededStream::new(0, 2).rng());
        let left: Vec<Complex64> = (0..n).map(|i| c(i as f64, 1.0)).collect();
        let right: Vec<Complex64> = (0..n).map(|i| c(1.0, -(i as f64))).collect();
        let scale = (n as f64).sqrt();
        let m = ComplexMatrix::from_fn(n, n, |i, j| left[i] * right[j].conj() * scale);
        let f = LaurentPoly::from_triples(&[(1, 0.5, 0.0), (3, 0.0, 1.0), (-2, 1.0, 1.0)]);
        let x = eval_statistic(&Observable::new(f.clone(), Weight::custom(m).unwrap()), &a).unwrap();
        let y = eval_statistic(&Observable::new(f, Weight::dyad(left, right).unwrap()), &a).unwrap();
        assert!(rel(x, y) < 1e-10);
    }

    #[test]
    fn resolvent_of_zero_matrix() {
        let a = ComplexMatrix::zeros(5, 5);
        assert!(rel(resolvent_trace(&a, c(2.0, 0.0)).unwrap(), c(2.5, 0.0)) < 1e-15);
        let model = SingleRingModel::new(SingularProfile::identity(5), Composition::UT);
        assert!(logdet_statistic(&a, c(2.0, 0.0), &model).unwrap().abs() < 1e-12);
    }

    #[test]
    fn resolvent_matches_eigenvalues() {
        let a = ginibre(16, &mut SeededStream::new(0, 3).rng());
        let z = c(2.5, -0.5);
        let ev = eigenvalues(&a).unwrap();
        let expected: Complex64 = ev.iter().map(|l| 1.0 / (z - l)).sum();
        assert!(rel(resolvent_trace(&a, z).unwrap(), expected) < 1e-6);
    }

    #[test]
    fn ring_proximity_is_enforced() {
        let model = SingleRingModel::new(SingularProfile::uniform(0.5, 4.0, 8).unwrap(), Composition::UT);
        let a = model.sample_A(&mut SeededStream::new(0, 0).rng());
        // a - delta is about 1.31, b + delta about 2.57
        assert!(matches!(resolvent_statistic(&a, c(2.0, 0.0), &model), Err(Error::RingProximity { .. })));
        assert!(matches!(logdet_statistic(&a, c(1.35, 0.0), &model), Err(Error::RingProximity { .. })));
        assert!(logdet_statistic(&a, c(1.2, 0.0), &model).is_ok());
        assert!(resolvent_statistic(&a, c(3.0, 0.0), &model).is_ok());
    }

    #[test]
    fn series_reproduce_closed_forms() {
        let (z, w) = (c(3.0, 1.0), c(0.4, -0.2));
        let f = resolvent_series(z, Region::Outside, 200);
        assert!(rel(f.eval(w) + 1.0 / z, 1.0 / (z - w)) < 1e-12);
        let f = resolvent_series(w, Region::Inside, 200);
        assert!(rel(f.eval(z), 1.0 / (w - z)) < 1e-12);
        let f = logdet_series(z, Region::Outside, 200);
        assert!((f.eval(w).re + z.norm().ln() - (z - w).norm().ln()).abs() < 1e-12);
        let f = logdet_series(w, Region::Inside, 200);
        assert!((f.eval(z).re + z.norm().ln() - (w - z).norm().ln()).abs() < 1e-12);
    }
}
