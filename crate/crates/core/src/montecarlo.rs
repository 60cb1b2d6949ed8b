//! Monte Carlo harness: repeated sampling, moment estimates with standard
//! errors, and Gaussianity diagnostics.
//!
//! Trial `t` draws from stream `(seed, t)`. Per-trial results land in a slot
//! array and every reduction runs sequentially in trial order, so the output
//! does not depend on the number of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::{elliptic_rho, CovarianceReport};
use crate::error::{Error, Result};
use crate::laurent::{logdet_statistic, region_of, resolvent_statistic, LaurentPoly, Observable, StatisticEvaluator, Weight};
use crate::model::SingleRingModel;
use crate::rng::SeededStream;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Flag threshold, in standard errors.
pub const FLAG_THRESHOLD: f64 = 4.0;

/// Fewest trials for which [`gaussianity_report`] produces z-scores.
pub const MIN_DIAGNOSTIC_TRIALS: usize = 500;

/// Highest total order of the univariate moment table.
pub const MAX_MOMENT_ORDER: u32 = 6;

/// Highest total order of the bivariate recursion tests.
pub const MAX_JOINT_ORDER: u32 = 4;

/// One centered spectral statistic.
#[derive(Clone, Debug)]
pub enum Statistic {
    /// `Tr f(A) M - a_0(f) Tr M`.
    Laurent(Observable),
    /// `Tr (z - A)^-1` minus its limit mean.
    Resolvent(Complex64),
    /// `log|det(z - A)|` minus its centering; real valued.
    LogDet(Complex64),
}

#[derive(Clone, Debug)]
pub struct NamedStatistic {
    pub name: String,
    pub statistic: Statistic,
}

impl NamedStatistic {
    pub fn new(name: impl Into<String>, statistic: Statistic) -> Self {
        Self {
            name: name.into(),
            statistic,
        }
    }

    pub fn trace(name: impl Into<String>, f: LaurentPoly) -> Self {
        Self::new(name, Statistic::Laurent(Observable::trace(f)))
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    model: SingleRingModel,
    statistics: Vec<NamedStatistic>,
    trials: usize,
    seed: u64,
}

impl ExperimentPlan {
    pub fn new(model: SingleRingModel, statistics: Vec<NamedStatistic>, trials: usize, seed: u64) -> Result<Self> {
        if trials < 2 {
            return Err(Error::InvalidPlan(format!("{trials} trials; need at least 2")));
        }
        let n = model.dim();
        for (idx, s) in statistics.iter().enumerate() {
            if s.name.is_empty() {
                return Err(Error::InvalidPlan(format!("statistic {idx} has an empty name")));
            }
            if statistics[..idx].iter().any(|o| o.name == s.name) {
                return Err(Error::InvalidPlan(format!("duplicate statistic name `{}`", s.name)));
            }
            match &s.statistic {
                Statistic::Laurent(obs) => {
                    if obs.f.has_negative_powers() && !model.supports_negative_powers() {
                        return Err(Error::NegativePowersWithZeroInnerRadius);
                    }
                    let len = match &obs.weight {
                        Weight::Identity => n,
                        Weight::ScaledDyad { left, .. } => left.len(),
                        Weight::Custom { m, .. } => m.rows(),
                    };
                    if len != n {
                        return Err(Error::DimensionMismatch(format!("weight of `{}` has size {len}, model has N = {n}", s.name)));
                    }
                }
                Statistic::Resolvent(z) | Statistic::LogDet(z) => {
                    region_of(*z, model.a(), model.b())?;
                }
            }
        }
        Ok(Self {
            model,
            statistics,
            trials,
            seed,
        })
    }

    pub fn model(&self) -> &SingleRingModel {
        &self.model
    }

    pub fn statistics(&self) -> &[NamedStatistic] {
        &self.statistics
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn evaluate_trial(&self, t: usize) -> Result<Vec<Complex64>> {
        let mut rng = SeededStream::new(self.seed, t as u64).rng();
        let a = self.model.sample_A(&mut rng);
        let mut ev = StatisticEvaluator::new(&a)?;
        let mut out = Vec::with_capacity(self.statistics.len());
        for s in &self.statistics {
            let v = match &s.statistic {
                Statistic::Laurent(obs) => ev.eval(obs)?,
                Statistic::Resolvent(z) => resolvent_statistic(&a, *z, &self.model)?,
                Statistic::LogDet(z) => Complex64::new(logdet_statistic(&a, *z, &self.model)?, 0.0),
            };
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite("statistic value"));
            }
            out.push(v);
        }
        Ok(out)
    }
}

/// A complex mean with separate standard errors for its real and imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: Complex64,
    pub se_re: f64,
    pub se_im: f64,
}

impl Estimate {
    /// Sample mean with the jackknife standard error (identical to the
    /// textbook `s / sqrt(n)` for a mean).
    pub fn mean_of(samples: impl ExactSizeIterator<Item = Complex64> + Clone) -> Self {
        let n = samples.len() as f64;
        let value = samples.clone().sum::<Complex64>() / n;
        let (mut ss_re, mut ss_im) = (0.0, 0.0);
        for x in samples {
            ss_re += (x.re - value.re).powi(2);
            ss_im += (x.im - value.im).powi(2);
        }
        let denom = n * (n - 1.0);
        Self {
            value,
            se_re: (ss_re / denom).sqrt(),
            se_im: (ss_im / denom).sqrt(),
        }
    }

    /// Largest of the two component z-scores against `target`.
    pub fn z_score(&self, target: Complex64) -> f64 {
        let z = |d: f64, se: f64| {
            if d == 0.0 {
                0.0
            } else if se == 0.0 {
                f64::INFINITY
            } else {
                d.abs() / se
            }
        };
        z(self.value.re - target.re, self.se_re).max(z(self.value.im - target.im, self.se_im))
    }

    pub fn within(&self, target: Complex64, k: f64) -> bool {
        self.z_score(target) <= k
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairEstimate {
    pub i: usize,
    pub j: usize,
    /// `E X_i X_j`.
    pub pseudo: Estimate,
    /// `E X_i conj(X_j)`.
    pub hermitian: Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentEstimate {
    pub p: u32,
    pub q: u32,
    /// `E X^p conj(X)^q`.
    pub estimate: Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleStats {
    names: Vec<String>,
    trials: usize,
    pairs: Vec<PairEstimate>,
    moments: Vec<Vec<MomentEstimate>>,
    #[serde(skip)]
    samples: Vec<Vec<Complex64>>,
}

impl EnsembleStats {
    /// Builds the estimates from per-trial samples, `samples[t][i]` being
    /// statistic `i` in trial `t`.
    pub fn from_samples(names: Vec<String>, samples: Vec<Vec<Complex64>>) -> Result<Self> {
        let trials = samples.len();
        if trials < 2 {
            return Err(Error::InvalidPlan(format!("{trials} trials; need at least 2")));
        }
        let k = names.len();
        if samples.iter().any(|row| row.len() != k) {
            return Err(Error::DimensionMismatch("trial rows differ from the number of statistics".into()));
        }
        let col = |i: usize| samples.iter().map(move |row| row[i]);
        let mut pairs = Vec::new();
        for i in 0..k {
            for j in i..k {
                let pseudo = Estimate::mean_of(col(i).zip(col(j)).map(|(x, y)| x * y));
                let hermitian = Estimate::mean_of(col(i).zip(col(j)).map(|(x, y)| x * y.conj()));
                pairs.push(PairEstimate { i, j, pseudo, hermitian });
            }
        }
        let moments = (0..k)
            .map(|i| {
                let mut table = Vec::new();
                for total in 1..=MAX_MOMENT_ORDER {
                    for q in 0..=total {
                        let p = total - q;
                        let estimate = Estimate::mean_of(col(i).map(|x| monomial(x, ZERO, [p, q, 0, 0])));
                        table.push(MomentEstimate { p, q, estimate });
                    }
                }
                table
            })
            .collect();
        Ok(Self {
            names,
            trials,
            pairs,
            moments,
            samples,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn samples(&self) -> &[Vec<Complex64>] {
        &self.samples
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn pairs(&self) -> &[PairEstimate] {
        &self.pairs
    }

    /// Estimates for the pair `(i, j)`; the order of `i` and `j` is respected.
    pub fn pair(&self, i: usize, j: usize) -> PairEstimate {
        let (lo, hi) = (i.min(j), i.max(j));
        let p = self
            .pairs
            .iter()
            .find(|p| p.i == lo && p.j == hi)
            .expect("pair indices within range")
            .clone();
        if i <= j {
            p
        } else {
            let h = p.hermitian;
            PairEstimate {
                i,
                j,
                pseudo: p.pseudo,
                hermitian: Estimate {
                    value: h.value.conj(),
                    ..h
                },
            }
        }
    }

    pub fn pair_by_name(&self, x: &str, y: &str) -> Option<PairEstimate> {
        Some(self.pair(self.index_of(x)?, self.index_of(y)?))
    }

    /// Point estimates of the pair as a covariance report.
    pub fn covariance(&self, i: usize, j: usize) -> CovarianceReport {
        let p = self.pair(i, j);
        CovarianceReport {
            pseudo: p.pseudo.value,
            hermitian: p.hermitian.value,
        }
    }

    pub fn moments(&self, i: usize) -> &[MomentEstimate] {
        &self.moments[i]
    }

    pub fn moment(&self, i: usize, p: u32, q: u32) -> Option<&Estimate> {
        self.moments[i].iter().find(|m| m.p == p && m.q == q).map(|m| &m.estimate)
    }

    /// Plain mean of statistic `i`.
    pub fn mean(&self, i: usize) -> Estimate {
        *self.moment(i, 1, 0).expect("order one is always tabulated")
    }

    /// Mean of `g` applied to every trial row.
    pub fn mean_of<F: Fn(&[Complex64]) -> Complex64>(&self, g: F) -> Estimate {
        let values: Vec<Complex64> = self.samples.iter().map(|row| g(row)).collect();
        Estimate::mean_of(values.iter().copied())
    }
}

pub fn run(plan: &ExperimentPlan) -> Result<EnsembleStats> {
    let results: Vec<Result<Vec<Complex64>>> = (0..plan.trials).into_par_iter().map(|t| plan.evaluate_trial(t)).collect();
    let mut samples = Vec::with_capacity(plan.trials);
    for (t, r) in results.into_iter().enumerate() {
        samples.push(r.map_err(|e| e.in_trial(t))?);
    }
    let names = plan.statistics.iter().map(|s| s.name.clone()).collect();
    EnsembleStats::from_samples(names, samples)
}

fn monomial(x: Complex64, y: Complex64, [p, q, r, s]: [u32; 4]) -> Complex64 {
    let pw = |z: Complex64, e: u32| if e == 0 { Complex64::new(1.0, 0.0) } else { z.powu(e) };
    pw(x, p) * pw(x.conj(), q) * pw(y, r) * pw(y.conj(), s)
}

/// One moment-recursion check.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticTest {
    /// Statistic indices `(X, Y)`; `Y` absent for univariate tests.
    pub x: usize,
    pub y: Option<usize>,
    /// Exponents `(p, q, r, s)` of `X^p conj(X)^q Y^r conj(Y)^s`.
    pub exponents: [u32; 4],
    pub observed: Complex64,
    pub predicted: Complex64,
    pub se_re: f64,
    pub se_im: f64,
    pub z_score: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussianityReport {
    pub threshold: f64,
    pub trials: usize,
    pub tests: Vec<DiagnosticTest>,
}

impl GaussianityReport {
    pub fn flags(&self) -> impl Iterator<Item = &DiagnosticTest> {
        self.tests.iter().filter(|t| t.flagged)
    }

    pub fn is_clean(&self) -> bool {
        self.flags().next().is_none()
    }

    pub fn max_z_score(&self) -> f64 {
        self.tests.iter().map(|t| t.z_score).fold(0.0, f64::max)
    }
}

/// Moment-recursion residuals for every statistic and every pair.
///
/// For a centered complex Gaussian `(X, Y)` Wick's theorem gives, expanding
/// one factor `X`,
///
/// ```text
/// m_{p,q,r,s} = (p-1) E[X X] m_{p-2,q,r,s} + q E[X conj X] m_{p-1,q-1,r,s}
///             + r E[X Y] m_{p-1,q,r-1,s} + s E[X conj Y] m_{p-1,q,r,s-1}.
/// ```
///
/// For rotation-invariant statistics `E[X X] = 0`, and the recursion forces
/// `m_{p,q} = 0` whenever `p != q`. Both sides use the empirical moments;
/// standard errors come from the leave-one-out jackknife of the residual.
pub fn gaussianity_report(stats: &EnsembleStats) -> Result<GaussianityReport> {
    if stats.trials < MIN_DIAGNOSTIC_TRIALS {
        return Err(Error::InsufficientTrials {
            trials: stats.trials,
            required: MIN_DIAGNOSTIC_TRIALS,
        });
    }
    let k = stats.names.len();
    let mut tests = Vec::new();
    for x in 0..k {
        for total in (1..=MAX_MOMENT_ORDER).filter(|&t| t != 2) {
            for q in 0..=total / 2 {
                tests.push(recursion_test(stats, x, None, [total - q, q, 0, 0]));
            }
        }
    }
    for x in 0..k {
        for y in x + 1..k {
            for total in 3..=MAX_JOINT_ORDER {
                for p in 1..=total {
                    for q in 0..=total - p {
                        for r in 0..=total - p - q {
                            let s = total - p - q - r;
                            if r + s >= 1 {
                                tests.push(recursion_test(stats, x, Some(y), [p, q, r, s]));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(GaussianityReport {
        threshold: FLAG_THRESHOLD,
        trials: stats.trials,
        tests,
    })
}

fn recursion_test(stats: &EnsembleStats, x: usize, y: Option<usize>, e: [u32; 4]) -> DiagnosticTest {
    let [p, q, r, s] = e;
    let n = stats.trials;
    let nf = n as f64;
    let rows: Vec<(Complex64, Complex64)> = stats
        .samples
        .iter()
        .map(|row| (row[x], y.map_or(ZERO, |j| row[j])))
        .collect();

    // Each product term is (coefficient, second-order monomial, lower monomial).
    let mut terms: Vec<(f64, [u32; 4], [u32; 4])> = Vec::new();
    if p >= 2 {
        terms.push(((p - 1) as f64, [2, 0, 0, 0], [p - 2, q, r, s]));
    }
    if q >= 1 {
        terms.push((q as f64, [1, 1, 0, 0], [p - 1, q - 1, r, s]));
    }
    if r >= 1 {
        terms.push((r as f64, [1, 0, 1, 0], [p - 1, q, r - 1, s]));
    }
    if s >= 1 {
        terms.push((s as f64, [1, 0, 0, 1], [p - 1, q, r, s - 1]));
    }

    let series = |m: [u32; 4]| -> Vec<Complex64> { rows.iter().map(|&(a, b)| monomial(a, b, m)).collect() };
    let lhs = series(e);
    let parts: Vec<(f64, Vec<Complex64>, Vec<Complex64>)> = terms.iter().map(|&(c, m2, lo)| (c, series(m2), series(lo))).collect();

    let sum = |v: &[Complex64]| v.iter().sum::<Complex64>();
    let lhs_sum = sum(&lhs);
    let part_sums: Vec<(Complex64, Complex64)> = parts.iter().map(|(_, a, b)| (sum(a), sum(b))).collect();

    let residual_with = |drop: Option<usize>| -> (Complex64, Complex64) {
        let loo = |total: Complex64, v: &[Complex64]| match drop {
            None => total / nf,
            Some(t) => (total - v[t]) / (nf - 1.0),
        };
        let observed = loo(lhs_sum, &lhs);
        let mut predicted = ZERO;
        for ((c, a, b), (sa, sb)) in parts.iter().zip(&part_sums) {
            predicted += *c * loo(*sa, a) * loo(*sb, b);
        }
        (observed, predicted)
    };

    let (observed, predicted) = residual_with(None);
    let residual = observed - predicted;
    let loo: Vec<Complex64> = (0..n)
        .map(|t| {
            let (o, pr) = residual_with(Some(t));
            o - pr
        })
        .collect();
    let mean_loo = loo.iter().sum::<Complex64>() / nf;
    let factor = (nf - 1.0) / nf;
    let se_re = (factor * loo.iter().map(|v| (v.re - mean_loo.re).powi(2)).sum::<f64>()).sqrt();
    let se_im = (factor * loo.iter().map(|v| (v.im - mean_loo.im).powi(2)).sum::<f64>()).sqrt();
    let est = Estimate {
        value: residual,
        se_re,
        se_im,
    };
    let z_score = est.z_score(ZERO);
    DiagnosticTest {
        x,
        y,
        exponents: e,
        observed,
        predicted,
        se_re,
        se_im,
        z_score,
        flagged: z_score > FLAG_THRESHOLD,
    }
}

/// Empirical moments of the `k x k` corner of `sqrt(N) (f(A) - a_0 I)`.
#[derive(Clone, Debug, Serialize)]
pub struct EllipticComparison {
    pub rho: Complex64,
    pub k: usize,
    pub trials: usize,
    /// `E |X_ij|^2`, `i != j`; target 1.
    pub offdiag_abs2: Estimate,
    /// `E X_ij X_ji`, `i != j`; target `rho`.
    pub offdiag_swap: Estimate,
    /// `E X_ij^2`, `i != j`; target 0.
    pub offdiag_square: Estimate,
    /// `E |X_ii|^2`; target 1.
    pub diag_abs2: Estimate,
    /// `E X_ii^2`; target `rho`.
    pub diag_square: Estimate,
}

impl EllipticComparison {
    /// `(name, estimate, target)` rows.
    pub fn rows(&self) -> Vec<(&'static str, Estimate, Complex64)> {
        let one = Complex64::new(1.0, 0.0);
        let mut out = vec![("diag_abs2", self.diag_abs2, one), ("diag_square", self.diag_square, self.rho)];
        if self.k > 1 {
            out.extend([
                ("offdiag_abs2", self.offdiag_abs2, one),
                ("offdiag_swap", self.offdiag_swap, self.rho),
                ("offdiag_square", self.offdiag_square, ZERO),
            ]);
        }
        out
    }
}

/// Samples the corner entries and pools each moment over the index pairs of
/// a trial, so the standard errors account for correlations within a trial.
pub fn elliptic_submatrix_experiment(
    model: &SingleRingModel,
    f: &LaurentPoly,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<EllipticComparison> {
    let rho = elliptic_rho(f, model.a(), model.b())?;
    let n = model.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidPlan(format!("corner size {k} outside 1..={n}")));
    }
    if trials < 2 {
        return Err(Error::InvalidPlan(format!("{trials} trials; need at least 2")));
    }
    let scale = (n as f64).sqrt();
    let results: Vec<Result<Vec<Complex64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = SeededStream::new(seed, t as u64).rng();
            let a = model.sample_A(&mut rng);
            let mut ev = StatisticEvaluator::new(&a)?;
            let mut x = vec![ZERO; k * k];
            for j in 0..k {
                let mut e = vec![ZERO; n];
                e[j] = Complex64::new(1.0, 0.0);
                let col = ev.apply(f, &e)?;
                for i in 0..k {
                    x[i * k + j] = col[i] * scale;
                }
            }
            Ok(x)
        })
        .collect();
    let mut corners = Vec::with_capacity(trials);
    for (t, r) in results.into_iter().enumerate() {
        corners.push(r.map_err(|e| e.in_trial(t))?);
    }
    let off = (k * (k - 1)) as f64;
    let pooled = |g: &dyn Fn(&[Complex64]) -> Complex64| Estimate::mean_of(corners.iter().map(|c| g(c)).collect::<Vec<_>>().into_iter());
    let offdiag = |h: fn(Complex64, Complex64) -> Complex64| {
        move |c: &[Complex64]| {
            if k < 2 {
                return ZERO;
            }
            let mut acc = ZERO;
            for i in 0..k {
                for j in 0..k {
                    if i != j {
                        acc += h(c[i * k + j], c[j * k + i]);
                    }
                }
            }
            acc / off
        }
    };
    let diag = |h: fn(Complex64) -> Complex64| move |c: &[Complex64]| (0..k).map(|i| h(c[i * k + i])).sum::<Complex64>() / k as f64;
    Ok(EllipticComparison {
        rho,
        k,
        trials,
        offdiag_abs2: pooled(&offdiag(|x, _| Complex64::new(x.norm_sqr(), 0.0))),
        offdiag_swap: pooled(&offdiag(|x, y| x * y)),
        offdiag_square: pooled(&offdiag(|x, _| x * x)),
        diag_abs2: pooled(&diag(|x| Complex64::new(x.norm_sqr(), 0.0))),
        diag_square: pooled(&diag(|x| x * x)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Composition, SingularProfile};
    use crate::rng::complex_gaussian;

    fn gaussian_samples(seed: u64, trials: usize) -> Vec<Vec<Complex64>> {
        let mut rng = SeededStream::new(seed, 0).rng();
        (0..trials)
            .map(|_| {
                let g1 = complex_gaussian(&mut rng, 1.0);
                let g2 = complex_gaussian(&mut rng, 1.0);
                // X circular, Y correlated through E X Y != 0, plus a real one.
                vec![g1, 0.6 * g1.conj() + 0.8 * g2, Complex64::new(g2.re, 0.0)]
            })
            .collect()
    }

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn estimates_on_fixed_data() {
        let samples = vec![vec![Complex64::new(1.0, 0.0)], vec![Complex64::new(-1.0, 2.0)]];
        let st = EnsembleStats::from_samples(names(1), samples).unwrap();
        let m = st.mean(0);
        assert_eq!(m.value, Complex64::new(0.0, 1.0));
        assert!((m.se_re - 1.0).abs() < 1e-15 && (m.se_im - 1.0).abs() < 1e-15);
        let h = st.pair(0, 0).hermitian;
        assert_eq!(h.value, Complex64::new(3.0, 0.0));
    }

    #[test]
    fn pair_order_conjugates_hermitian() {
        let st = EnsembleStats::from_samples(names(3), gaussian_samples(1, 50)).unwrap();
        let a = st.pair(0, 1);
        let b = st.pair(1, 0);
        assert_eq!(a.hermitian.value, b.hermitian.value.conj());
        assert_eq!(a.pseudo.value, b.pseudo.value);
    }

    #[test]
    fn report_requires_enough_trials() {
        let st = EnsembleStats::from_samples(names(3), gaussian_samples(1, 499)).unwrap();
        assert!(matches!(gaussianity_report(&st), Err(Error::InsufficientTrials { .. })));
    }

    #[test]
    fn synthetic_gaussians_mostly_pass() {
        let seeds = 40;
        let clean = (0..seeds)
            .filter(|&s| {
                let st = EnsembleStats::from_samples(names(3), gaussian_samples(100 + s, 2000)).unwrap();
                gaussianity_report(&st).unwrap().is_clean()
            })
            .count();
        assert!(clean as f64 >= 0.95 * seeds as f64, "{clean} of {seeds} clean");
    }

    #[test]
    fn modulus_is_flagged() {
        let samples: Vec<Vec<Complex64>> = gaussian_samples(7, 2000)
            .into_iter()
            .map(|row| vec![Complex64::new(row[0].norm(), 0.0)])
            .collect();
        let st = EnsembleStats::from_samples(names(1), samples).unwrap();
        let rep = gaussianity_report(&st).unwrap();
        assert!(rep.flags().any(|t| t.exponents[0] + t.exponents[1] == 4));
    }

    #[test]
    fn zero_statistic_gives_zero_stats() {
        let model = SingleRingModel::new(SingularProfile::identity(8), Composition::UT);
        let plan = ExperimentPlan::new(model, vec![NamedStatistic::trace("zero", LaurentPoly::zero())], 10, 0).unwrap();
        let st = run(&plan).unwrap();
        assert!(st.pairs().iter().all(|p| p.pseudo.value == ZERO && p.hermitian.value == ZERO));
    }

    #[test]
    fn plan_validation() {
        let model = SingleRingModel::new(SingularProfile::uniform(0.0, 1.0, 8).unwrap(), Composition::UT);
        let neg = NamedStatistic::trace("inv", LaurentPoly::monomial(-1, Complex64::new(1.0, 0.0)));
        assert!(matches!(ExperimentPlan::new(model.clone(), vec![neg], 10, 0), Err(Error::NegativePowersWithZeroInnerRadius)));
        let near = NamedStatistic::new("r", Statistic::Resolvent(Complex64::new(0.6, 0.0)));
        assert!(matches!(ExperimentPlan::new(model.clone(), vec![near], 10, 0), Err(Error::RingProximity { .. })));
        let z = NamedStatistic::trace("z", LaurentPoly::monomial(1, Complex64::new(1.0, 0.0)));
        assert!(ExperimentPlan::new(model.clone(), vec![z.clone()], 1, 0).is_err());
        assert!(ExperimentPlan::new(model, vec![z.clone(), z], 10, 0).is_err());
    }
}
