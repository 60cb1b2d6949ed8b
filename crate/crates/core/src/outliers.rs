//! Multiplicative finite-rank perturbations `A (I + P)` and `A (I + A P)`.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, ComplexMatrix};
use crate::model::SingleRingModel;
use crate::rng::SeededStream;

/// Largest supported rank of `P`.
pub const MAX_RANK: usize = 8;

/// Smallest dimension for which detection is meaningful.
pub const MIN_DETECTION_DIM: usize = 200;

/// Annulus margin factor: eigenvalues count as outliers beyond `0.05 (b - a)`.
pub const ANNULUS_MARGIN: f64 = 0.05;

/// Matching radius is `MATCH_RADIUS_CONSTANT / sqrt(N)`.
pub const MATCH_RADIUS_CONSTANT: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `A + A^2 P = A (I + A P)`.
    #[serde(rename = "a_plus_ap")]
    APlusAP,
    /// `A + A P = A (I + P)`.
    #[serde(rename = "a_plus_p")]
    APlusP,
}

/// `P = diag(p_1, .., p_r, 0, .., 0)` and the perturbation variant.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSpec {
    diagonal: Vec<Complex64>,
    variant: Variant,
}

impl PerturbationSpec {
    pub fn new(diagonal: Vec<Complex64>, variant: Variant) -> Result<Self> {
        if diagonal.len() > MAX_RANK {
            return Err(Error::InvalidPerturbation(format!(
                "{} diagonal entries; at most {MAX_RANK} are supported",
                diagonal.len()
            )));
        }
        if diagonal.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidPerturbation("non-finite eigenvalue".into()));
        }
        Ok(Self { diagonal, variant })
    }

    pub fn diagonal(&self) -> &[Complex64] {
        &self.diagonal
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        Self {
            diagonal: self.diagonal.clone(),
            variant,
        }
    }

    pub fn rank(&self) -> usize {
        self.diagonal.iter().filter(|z| z.norm() > 0.0).count()
    }

    /// Distinct nonzero eigenvalues with multiplicities.
    pub fn eigenvalues(&self) -> Vec<(Complex64, usize)> {
        let mut out: Vec<(Complex64, usize)> = Vec::new();
        for &z in self.diagonal.iter().filter(|z| z.norm() > 0.0) {
            match out.iter_mut().find(|(w, _)| *w == z) {
                Some(entry) => entry.1 += 1,
                None => out.push((z, 1)),
            }
        }
        out
    }

    /// The perturbed matrix, formed in `O(N^2 r)`.
    pub fn apply(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = a.rows();
        if !a.is_square() || n < self.diagonal.len() {
            return Err(Error::DimensionMismatch(format!(
                "rank-{} perturbation of a {}x{} matrix",
                self.diagonal.len(),
                a.rows(),
                a.cols()
            )));
        }
        let mut out = a.clone();
        for (j, &p) in self.diagonal.iter().enumerate() {
            if p.norm() == 0.0 {
                continue;
            }
            let col = a.column(j);
            let add = match self.variant {
                Variant::APlusP => col,
                Variant::APlusAP => a.matvec(&col)?,
            };
            for (i, v) in add.into_iter().enumerate() {
                out[(i, j)] += v * p;
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PredictedOutlier {
    pub location: Complex64,
    pub source: Complex64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutlierPrediction {
    pub outliers: Vec<PredictedOutlier>,
    /// Eigenvalues with modulus in `[inner_margin, outer_margin]` are bulk.
    pub inner_margin: f64,
    pub outer_margin: f64,
}

fn margins(model: &SingleRingModel) -> (f64, f64) {
    let delta = ANNULUS_MARGIN * (model.b() - model.a());
    (model.a() - delta, model.b() + delta)
}

/// `A (I + P)` has no outliers; `A (I + A P)` has one at `-1/lambda` for every
/// eigenvalue `lambda` of `P` with `|lambda| > 1/a`.
pub fn predict(spec: &PerturbationSpec, model: &SingleRingModel) -> OutlierPrediction {
    let (inner_margin, outer_margin) = margins(model);
    let outliers = match spec.variant {
        Variant::APlusP => Vec::new(),
        Variant::APlusAP if model.a() <= 0.0 => Vec::new(),
        Variant::APlusAP => spec
            .eigenvalues()
            .into_iter()
            .filter(|(l, _)| l.norm() > 1.0 / model.a())
            .map(|(l, m)| PredictedOutlier {
                location: -1.0 / l,
                source: l,
                multiplicity: m,
            })
            .filter(|o| o.location.norm() <= model.b())
            .collect(),
    };
    OutlierPrediction {
        outliers,
        inner_margin,
        outer_margin,
    }
}

pub fn matching_radius(dim: usize) -> f64 {
    MATCH_RADIUS_CONSTANT / (dim as f64).sqrt()
}

/// Samples `A` and returns the perturbed matrix.
pub fn sample_perturbed<R: Rng + ?Sized>(spec: &PerturbationSpec, model: &SingleRingModel, rng: &mut R) -> Result<ComplexMatrix> {
    spec.apply(&model.sample_A(rng))
}

/// Eigenvalues lying outside the annulus margins.
pub fn outside_annulus(eigs: &[Complex64], model: &SingleRingModel) -> Vec<Complex64> {
    let (lo, hi) = margins(model);
    eigs.iter().copied().filter(|z| z.norm() < lo || z.norm() > hi).collect()
}

/// Full spectrum of one perturbed sample.
pub fn perturbed_spectrum(spec: &PerturbationSpec, model: &SingleRingModel, stream: SeededStream) -> Result<Vec<Complex64>> {
    let m = sample_perturbed(spec, model, &mut stream.rng())?;
    eigenvalues(&m)
}

pub fn detect(spec: &PerturbationSpec, model: &SingleRingModel, stream: SeededStream) -> Result<Vec<Complex64>> {
    if model.dim() < MIN_DETECTION_DIM {
        return Err(Error::InvalidPlan(format!(
            "detection needs N >= {MIN_DETECTION_DIM}, got {}",
            model.dim()
        )));
    }
    Ok(outside_annulus(&perturbed_spectrum(spec, model, stream)?, model))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchReport {
    /// `(predicted, detected)` pairs.
    pub matched: Vec<(Complex64, Complex64)>,
    pub unmatched_predicted: Vec<Complex64>,
    pub unmatched_detected: Vec<Complex64>,
}

impl MatchReport {
    /// Every prediction found exactly its multiplicity of detections and nothing else escaped.
    pub fn is_exact(&self) -> bool {
        self.unmatched_predicted.is_empty() && self.unmatched_detected.is_empty()
    }
}

/// Pairs each predicted outlier (counted with multiplicity) with the nearest
/// still-unused detection within `radius`.
pub fn match_outliers(detected: &[Complex64], prediction: &OutlierPrediction, radius: f64) -> MatchReport {
    let mut free: Vec<Complex64> = detected.to_vec();
    let mut matched = Vec::new();
    let mut unmatched_predicted = Vec::new();
    for o in &prediction.outliers {
        for _ in 0..o.multiplicity {
            let nearest = free
                .iter()
                .enumerate()
                .map(|(i, z)| (i, (z - o.location).norm()))
                .filter(|&(_, d)| d <= radius)
                .min_by(|x, y| x.1.total_cmp(&y.1));
            match nearest {
                Some((i, _)) => matched.push((o.location, free.remove(i))),
                None => unmatched_predicted.push(o.location),
            }
        }
    }
    MatchReport {
        matched,
        unmatched_predicted,
        unmatched_detected: free,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FluctuationPoint {
    pub dim: usize,
    pub rms: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FluctuationReport {
    pub points: Vec<FluctuationPoint>,
    /// Least-squares slope of `log rms` against `log N`.
    pub slope: f64,
}

/// RMS distance between each simple predicted outlier and the nearest
/// eigenvalue, pooled over outliers and trials, at each dimension.
pub fn fluctuation_scale(
    spec: &PerturbationSpec,
    model: &SingleRingModel,
    dims: &[usize],
    trials: usize,
    seed: u64,
) -> Result<FluctuationReport> {
    if trials == 0 || dims.len() < 2 {
        return Err(Error::InvalidPlan("need at least one trial and two dimensions".into()));
    }
    let mut points = Vec::with_capacity(dims.len());
    for &dim in dims {
        let m = model.with_dim(dim)?;
        let prediction = predict(spec, &m);
        if prediction.outliers.is_empty() {
            return Err(Error::MissingOutlier {
                predicted: None,
                radius: matching_radius(dim),
            });
        }
        if prediction.outliers.iter().any(|o| o.multiplicity > 1) {
            return Err(Error::InvalidPerturbation("fluctuations are only measured for simple eigenvalues".into()));
        }
        let radius = matching_radius(dim);
        let per_trial: Vec<Result<Vec<f64>>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let stream = SeededStream::new(seed, ((dim as u64) << 32) | t as u64);
                let eigs = perturbed_spectrum(spec, &m, stream)?;
                prediction
                    .outliers
                    .iter()
                    .map(|o| {
                        let d = eigs.iter().map(|z| (z - o.location).norm()).fold(f64::INFINITY, f64::min);
                        if d <= radius {
                            Ok(d * d)
                        } else {
                            Err(Error::MissingOutlier {
                                predicted: Some(o.location),
                                radius,
                            })
                        }
                    })
                    .collect()
            })
            .collect();
        let mut sq = Vec::new();
        for (t, r) in per_trial.into_iter().enumerate() {
            sq.extend(r.map_err(|e| e.in_trial(t))?);
        }
        let rms = (sq.iter().sum::<f64>() / sq.len() as f64).sqrt();
        points.push(FluctuationPoint {
            dim,
            rms,
            samples: sq.len(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.dim as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.rms.ln()).collect();
    Ok(FluctuationReport {
        slope: least_squares_slope(&xs, &ys),
        points,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matmul;
    use crate::model::{Composition, SingularProfile};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub(crate) fn figure_diagonal() -> Vec<Complex64> {
        vec![c(-2.0, 0.0), 1.0 / c(0.8, 0.5), c(1.0 / 3.0, 0.0)]
    }

    fn uniform_model(n: usize) -> SingleRingModel {
        SingleRingModel::new(SingularProfile::uniform(0.5, 4.0, n).unwrap(), Composition::UTV)
    }

    #[test]
    fn predictions_for_figure_configuration() {
        let model = uniform_model(16);
        let hat = PerturbationSpec::new(figure_diagonal(), Variant::APlusAP).unwrap();
        let p = predict(&hat, &model);
        assert_eq!(p.outliers.len(), 2);
        assert!((p.outliers[0].location - c(0.5, 0.0)).norm() < 1e-15);
        assert!((p.outliers[1].location - c(-0.8, -0.5)).norm() < 1e-15);
        assert!(predict(&hat.with_variant(Variant::APlusP), &model).outliers.is_empty());
        let zero = PerturbationSpec::new(vec![], Variant::APlusAP).unwrap();
        assert!(predict(&zero, &model).outliers.is_empty());
    }

    #[test]
    fn multiplicities_are_grouped() {
        let spec = PerturbationSpec::new(vec![c(-2.0, 0.0), c(-2.0, 0.0), c(0.0, 0.0)], Variant::APlusAP).unwrap();
        assert_eq!(spec.rank(), 2);
        assert_eq!(spec.eigenvalues(), vec![(c(-2.0, 0.0), 2)]);
        assert!(PerturbationSpec::new(vec![c(1.0, 0.0); 9], Variant::APlusP).is_err());
    }

    #[test]
    fn perturbation_matches_dense_formula() {
        let n = 12;
        let model = uniform_model(n);
        let a = model.sample_A(&mut SeededStream::new(0, 0).rng());
        let mut pd = vec![c(0.0, 0.0); n];
        pd[..3].copy_from_slice(&figure_diagonal());
        let p = ComplexMatrix::from_diag(&pd);
        let ap = matmul(&a, &p).unwrap();
        let tilde = a.add(&ap).unwrap();
        let hat = a.add(&matmul(&a, &ap).unwrap()).unwrap();
        for (variant, dense) in [(Variant::APlusP, tilde), (Variant::APlusAP, hat)] {
            let fast = PerturbationSpec::new(figure_diagonal(), variant).unwrap().apply(&a).unwrap();
            let err = crate::linalg::frobenius_norm(&fast.sub(&dense).unwrap());
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn matching_is_greedy_and_exclusive() {
        let pred = OutlierPrediction {
            outliers: vec![PredictedOutlier { location: c(0.5, 0.0), source: c(-2.0, 0.0), multiplicity: 1 }],
            inner_margin: 1.0,
            outer_margin: 2.0,
        };
        let r = match_outliers(&[c(0.52, 0.0), c(0.49, 0.0)], &pred, 0.1);
        assert_eq!(r.matched, vec![(c(0.5, 0.0), c(0.49, 0.0))]);
        assert_eq!(r.unmatched_detected, vec![c(0.52, 0.0)]);
        assert!(!r.is_exact());
    }

    #[test]
    fn small_dimensions_are_refused() {
        let spec = PerturbationSpec::new(figure_diagonal(), Variant::APlusAP).unwrap();
        assert!(matches!(detect(&spec, &uniform_model(50), SeededStream::new(0, 0)), Err(Error::InvalidPlan(_))));
    }

    #[test]
    fn zero_perturbation_has_nothing_to_track() {
        let spec = PerturbationSpec::new(vec![], Variant::APlusAP).unwrap();
        let r = fluctuation_scale(&spec, &uniform_model(200), &[200, 250], 1, 0);
        assert!(matches!(r, Err(Error::MissingOutlier { predicted: None, .. })));
    }

    #[test]
    fn slope_of_exact_power_law() {
        let xs: Vec<f64> = [250.0f64, 500.0, 1000.0].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        assert!((least_squares_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn unperturbed_escapes_hug_the_annulus() {
        // The soft edges still spill slightly past the margin at N = 1000.
        let model = uniform_model(1000);
        let spec = PerturbationSpec::new(vec![], Variant::APlusAP).unwrap();
        let d = detect(&spec, &model, SeededStream::new(4, 0)).unwrap();
        assert!(d.iter().all(|z| z.norm() > model.a() - 0.15 && z.norm() < model.b() + 0.15), "{d:?}");
    }
}
