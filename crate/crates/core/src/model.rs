//! The Single Ring ensemble `A = U T V`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matmul, ComplexMatrix};
use crate::rng::haar_unitary;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Limiting law of the singular values of `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileLaw {
    Identity,
    Uniform { lo: f64, hi: f64 },
    /// Point masses `(value, weight)`.
    Atoms { atoms: Vec<(f64, f64)> },
}

impl ProfileLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProfileLaw::Identity => Ok(()),
            ProfileLaw::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidProfile("uniform bounds must be finite".into()));
                }
                if *lo < 0.0 {
                    return Err(Error::InvalidProfile(format!("lo = {lo} is negative")));
                }
                if lo >= hi {
                    return Err(Error::InvalidProfile(format!("lo = {lo} must be below hi = {hi}")));
                }
                Ok(())
            }
            ProfileLaw::Atoms { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidProfile("no atoms".into()));
                }
                for &(s, w) in atoms {
                    if !s.is_finite() || s < 0.0 {
                        return Err(Error::InvalidProfile(format!("atom value {s} must be finite and >= 0")));
                    }
                    if !w.is_finite() || w <= 0.0 {
                        return Err(Error::InvalidProfile(format!("atom weight {w} must be positive")));
                    }
                }
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(Error::InvalidProfile(format!("atom weights sum to {total}, not 1")));
                }
                if atoms.iter().all(|a| a.0 == 0.0) {
                    return Err(Error::InvalidProfile("all atoms sit at 0".into()));
                }
                Ok(())
            }
        }
    }

    /// `(a, b)` with `b^2 = E s^2` and `a^-2 = E s^-2`; `a = 0` when the law
    /// charges or touches the origin.
    pub fn annulus_radii(&self) -> (f64, f64) {
        match self {
            ProfileLaw::Identity => (1.0, 1.0),
            ProfileLaw::Uniform { lo, hi } => {
                let width = hi - lo;
                let b2 = (hi.powi(3) - lo.powi(3)) / (3.0 * width);
                let a = if *lo > 0.0 {
                    let inv_a2 = (1.0 / lo - 1.0 / hi) / width;
                    inv_a2.powf(-0.5)
                } else {
                    0.0
                };
                (a, b2.sqrt())
            }
            ProfileLaw::Atoms { atoms } => {
                let b2: f64 = atoms.iter().map(|&(s, w)| w * s * s).sum();
                let a = if atoms.iter().any(|a| a.0 == 0.0) {
                    0.0
                } else {
                    let inv_a2: f64 = atoms.iter().map(|&(s, w)| w / (s * s)).sum();
                    inv_a2.powf(-0.5)
                };
                (a, b2.sqrt())
            }
        }
    }

    /// Quantile function at `p` in `(0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            ProfileLaw::Identity => 1.0,
            ProfileLaw::Uniform { lo, hi } => lo + (hi - lo) * p,
            ProfileLaw::Atoms { atoms } => {
                let mut sorted = atoms.clone();
                sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
                let mut cum = 0.0;
                for &(s, w) in &sorted {
                    cum += w;
                    if cum >= p - WEIGHT_SUM_TOL {
                        return s;
                    }
                }
                sorted.last().expect("validated non-empty").0
            }
        }
    }
}

/// A profile law together with the dimension it is realized at.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularProfile {
    law: ProfileLaw,
    dim: usize,
}

impl SingularProfile {
    pub fn new(law: ProfileLaw, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidProfile("dimension must be at least 1".into()));
        }
        law.validate()?;
        Ok(Self { law, dim })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(ProfileLaw::Identity, dim).expect("identity profile is valid")
    }

    pub fn uniform(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::new(ProfileLaw::Uniform { lo, hi }, dim)
    }

    pub fn atoms(atoms: Vec<(f64, f64)>, dim: usize) -> Result<Self> {
        Self::new(ProfileLaw::Atoms { atoms }, dim)
    }

    pub fn law(&self) -> &ProfileLaw {
        &self.law
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Midpoint quantiles `s_i = Q((i - 1/2) / N)`, in ascending order.
    pub fn singular_values(&self) -> Vec<f64> {
        let n = self.dim as f64;
        (0..self.dim)
            .map(|i| self.law.quantile((i as f64 + 0.5) / n))
            .collect()
    }
}

pub fn annulus_radii(profile: &SingularProfile) -> (f64, f64) {
    profile.law.annulus_radii()
}

#[allow(non_snake_case)]
pub fn realize_T(profile: &SingularProfile) -> ComplexMatrix {
    ComplexMatrix::from_real_diag(&profile.singular_values())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Composition {
    #[default]
    UTV,
    UT,
}

#[derive(Clone, Debug)]
pub struct SingleRingModel {
    profile: SingularProfile,
    singular_values: Vec<f64>,
    inner_radius: f64,
    outer_radius: f64,
    composition: Composition,
}

impl SingleRingModel {
    pub fn new(profile: SingularProfile, composition: Composition) -> Self {
        let (a, b) = annulus_radii(&profile);
        Self {
            singular_values: profile.singular_values(),
            profile,
            inner_radius: a,
            outer_radius: b,
            composition,
        }
    }

    pub fn profile(&self) -> &SingularProfile {
        &self.profile
    }

    pub fn dim(&self) -> usize {
        self.profile.dim
    }

    /// Inner radius `a`.
    pub fn a(&self) -> f64 {
        self.inner_radius
    }

    /// Outer radius `b`.
    pub fn b(&self) -> f64 {
        self.outer_radius
    }

    pub fn composition(&self) -> Composition {
        self.composition
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn supports_negative_powers(&self) -> bool {
        self.inner_radius > 0.0
    }

    /// The same model at another dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        let profile = SingularProfile::new(self.profile.law.clone(), dim)?;
        Ok(Self::new(profile, self.composition))
    }

    #[allow(non_snake_case)]
    pub fn sample_A<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexMatrix {
        let n = self.dim();
        let s: Vec<Complex64> = self.singular_values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let ut = haar_unitary(n, rng).scale_columns(&s);
        match self.composition {
            Composition::UT => ut,
            Composition::UTV => {
                let v = haar_unitary(n, rng);
                matmul(&ut, &v).expect("square factors of equal size")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigenvalues, frobenius_norm, trace};
    use crate::rng::SeededStream;

    fn close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol * y.abs().max(1.0)
    }

    #[test]
    fn radii_closed_forms() {
        assert_eq!(ProfileLaw::Identity.annulus_radii(), (1.0, 1.0));

        let (a, b) = ProfileLaw::Uniform { lo: 0.5, hi: 4.0 }.annulus_radii();
        assert!(close(a, 2f64.sqrt(), 1e-12));
        assert!(close(b * b, (64.0 - 0.125) / 10.5, 1e-12));
        assert!(close(b, 2.466441431, 1e-9));

        let (a, b) = ProfileLaw::Atoms { atoms: vec![(1.0, 0.5), (2.0, 0.5)] }.annulus_radii();
        assert!(close(b, 2.5f64.sqrt(), 1e-14));
        assert!(close(a, 1.6f64.sqrt(), 1e-14));
    }

    #[test]
    fn radii_match_quadrature() {
        for (lo, hi) in [(0.5, 4.0), (0.1, 0.3), (1.0, 7.5)] {
            let steps = 20_000;
            let h = (hi - lo) / steps as f64;
            let simpson = |g: &dyn Fn(f64) -> f64| {
                let mut acc = g(lo) + g(hi);
                for k in 1..steps {
                    let x = lo + k as f64 * h;
                    acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(x);
                }
                acc * h / 3.0 / (hi - lo)
            };
            let b2 = simpson(&|x| x * x);
            let inv_a2 = simpson(&|x| 1.0 / (x * x));
            let (a, b) = ProfileLaw::Uniform { lo, hi }.annulus_radii();
            assert!(close(b * b, b2, 1e-10));
            assert!(close(a.powi(-2), inv_a2, 1e-10));
        }
    }

    #[test]
    fn touching_zero_gives_zero_inner_radius() {
        let p = SingularProfile::uniform(0.0, 1.0, 4).unwrap();
        let m = SingleRingModel::new(p, Composition::UTV);
        assert_eq!(m.a(), 0.0);
        assert!(!m.supports_negative_powers());
        let m = SingleRingModel::new(SingularProfile::atoms(vec![(0.0, 0.5), (1.0, 0.5)], 4).unwrap(), Composition::UT);
        assert_eq!(m.a(), 0.0);
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        assert!(SingularProfile::uniform(2.0, 1.0, 4).is_err());
        assert!(SingularProfile::uniform(-1.0, 1.0, 4).is_err());
        assert!(SingularProfile::atoms(vec![(1.0, 0.3)], 4).is_err());
        assert!(SingularProfile::atoms(vec![(1.0, 1.5), (2.0, -0.5)], 4).is_err());
        assert!(SingularProfile::atoms(vec![], 4).is_err());
        assert!(SingularProfile::new(ProfileLaw::Identity, 0).is_err());
    }

    #[test]
    fn quantile_realizations() {
        assert_eq!(SingularProfile::identity(5).singular_values(), vec![1.0; 5]);
        assert_eq!(SingularProfile::uniform(0.5, 4.0, 2).unwrap().singular_values(), vec![1.375, 3.125]);
        assert_eq!(
            SingularProfile::atoms(vec![(2.0, 0.5), (1.0, 0.5)], 4).unwrap().singular_values(),
            vec![1.0, 1.0, 2.0, 2.0]
        );
        let t = realize_T(&SingularProfile::uniform(0.5, 4.0, 2).unwrap());
        assert_eq!(t[(1, 1)].re, 3.125);
        assert_eq!(t[(0, 1)].norm(), 0.0);
    }

    #[test]
    fn realized_second_moment_converges() {
        let law = ProfileLaw::Uniform { lo: 0.5, hi: 4.0 };
        let (_, b) = law.annulus_radii();
        for n in [10, 100, 1000] {
            let s = SingularProfile::new(law.clone(), n).unwrap().singular_values();
            let m2 = s.iter().map(|x| x * x).sum::<f64>() / n as f64;
            assert!((m2 - b * b).abs() < 10.0 / n as f64);
        }
    }

    #[test]
    fn identity_ut_is_unitary() {
        let m = SingleRingModel::new(SingularProfile::identity(12), Composition::UT);
        let a = m.sample_A(&mut SeededStream::new(0, 0).rng());
        let err = matmul(&a.adjoint(), &a).unwrap().sub(&ComplexMatrix::identity(12)).unwrap();
        assert!(frobenius_norm(&err) < 1e-10);
    }

    #[test]
    fn sampled_singular_values_match_profile() {
        for comp in [Composition::UT, Composition::UTV] {
            let m = SingleRingModel::new(SingularProfile::uniform(0.5, 4.0, 32).unwrap(), comp);
            let a = m.sample_A(&mut SeededStream::new(1, 0).rng());
            let mut sv: Vec<f64> = eigenvalues(&matmul(&a.adjoint(), &a).unwrap())
                .unwrap()
                .iter()
                .map(|l| l.re.max(0.0).sqrt())
                .collect();
            sv.sort_by(f64::total_cmp);
            for (x, y) in sv.iter().zip(m.singular_values()) {
                assert!((x - y).abs() < 1e-6, "{x} vs {y}");
            }
            let n = 32.0;
            let lhs = trace(&matmul(&a, &a.adjoint()).unwrap()).re / n;
            let rhs = m.singular_values().iter().map(|s| s * s).sum::<f64>() / n;
            assert!((lhs - rhs).abs() < 1e-12 * rhs);
        }
    }

    #[test]
    fn spectrum_stays_near_annulus() {
        let m = SingleRingModel::new(SingularProfile::uniform(0.5, 4.0, 1000).unwrap(), Composition::UTV);
        for idx in 0..5 {
            let a = m.sample_A(&mut SeededStream::new(9, idx).rng());
            for l in eigenvalues(&a).unwrap() {
                let r = l.norm();
                assert!(r >= m.a() - 0.15 && r <= m.b() + 0.15, "|lambda| = {r}");
            }
        }
    }
}
