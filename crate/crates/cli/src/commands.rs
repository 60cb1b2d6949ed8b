//! One function per subcommand. Each prints a JSON summary and writes its files.

use anyhow::{Context, Result};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use single_ring::covariance::{logdet_kernel, resolvent_kernel, theorem_covariance, CovarianceReport, LimitParams};
use single_ring::laurent::{region_of, resolvent_series, LaurentPoly, Observable, Weight};
use single_ring::linalg::eigenvalues;
use single_ring::model::SingleRingModel;
use single_ring::montecarlo::{gaussianity_report, run, EnsembleStats, Estimate, ExperimentPlan, NamedStatistic, Statistic, MIN_DIAGNOSTIC_TRIALS};
use single_ring::outliers::{fluctuation_scale, match_outliers, matching_radius, outside_annulus, perturbed_spectrum, predict, MIN_DETECTION_DIM};
use single_ring::rng::SeededStream;
use single_ring::weingarten::wg_table;

use crate::config::{ObservableConfig, ObservableKind, RunConfig};
use crate::output::{complex_cells, points_table, Sink};

/// Whether the run raised diagnostic flags.
pub struct Outcome {
    pub flagged: bool,
}

const CLEAN: Outcome = Outcome { flagged: false };

fn print<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn model_json(m: &SingleRingModel) -> serde_json::Value {
    json!({
        "profile": m.profile().law(),
        "composition": m.composition(),
        "dim": m.dim(),
        "a": m.a(),
        "b": m.b(),
    })
}

pub fn spectrum(cfg: &RunConfig, sink: &Sink) -> Result<Outcome> {
    let a = cfg.model.sample_A(&mut SeededStream::new(cfg.seed, 0).rng());
    let eigs = eigenvalues(&a)?;
    let moduli: Vec<f64> = eigs.iter().map(|z| z.norm()).collect();
    let (lo, hi) = (cfg.model.a() - 0.15, cfg.model.b() + 0.15);
    let summary = json!({
        "kind": "spectrum",
        "seed": cfg.seed,
        "model": model_json(&cfg.model),
        "eigenvalues": eigs.len(),
        "min_modulus": moduli.iter().copied().fold(f64::INFINITY, f64::min),
        "max_modulus": moduli.iter().copied().fold(0.0, f64::max),
        "outside_band": moduli.iter().filter(|&&r| r < lo || r > hi).count(),
    });
    let (header, rows) = points_table(&eigs);
    sink.csv("spectrum.csv", &header, rows)?;
    sink.json("stats.json", &summary)?;
    print(&summary)?;
    Ok(CLEAN)
}

/// Laurent form of an observable, used when the two sides of a pair differ in kind.
fn as_laurent(o: &ObservableConfig, model: &SingleRingModel, truncation: u32) -> Result<Option<(LaurentPoly, Weight)>> {
    Ok(match &o.kind {
        ObservableKind::Laurent { f, weight } => Some((f.clone(), weight.clone())),
        ObservableKind::Resolvent(z) => Some((resolvent_series(*z, region_of(*z, model.a(), model.b())?, truncation), Weight::Identity)),
        ObservableKind::LogDet(_) => None,
    })
}

/// Limit covariance of a pair; `None` when no closed form applies.
fn predict_pair(x: &ObservableConfig, y: &ObservableConfig, model: &SingleRingModel, truncation: u32) -> Result<Option<CovarianceReport>> {
    let (a, b) = (model.a(), model.b());
    match (&x.kind, &y.kind) {
        (ObservableKind::Resolvent(z), ObservableKind::Resolvent(zp)) => {
            let regions = (region_of(*z, a, b)?, region_of(*zp, a, b)?);
            return Ok(Some(resolvent_kernel(*z, *zp, regions, a, b)?));
        }
        (ObservableKind::LogDet(z), ObservableKind::LogDet(zp)) => {
            let regions = (region_of(*z, a, b)?, region_of(*zp, a, b)?);
            let v = Complex64::new(logdet_kernel(*z, *zp, regions, a, b)?, 0.0);
            return Ok(Some(CovarianceReport { pseudo: v, hermitian: v }));
        }
        _ => {}
    }
    let (Some((fx, wx)), Some((fy, wy))) = (as_laurent(x, model, truncation)?, as_laurent(y, model, truncation)?) else {
        return Ok(None);
    };
    let params = LimitParams::from_weights(&wx, &wy, model.dim(), a, b)?;
    Ok(Some(theorem_covariance(&fx, &fy, &params)?))
}

#[derive(Serialize)]
struct PredictedPair<'a> {
    x: &'a str,
    y: &'a str,
    pseudo: Option<Complex64>,
    hermitian: Option<Complex64>,
}

fn predicted_pairs(cfg: &RunConfig) -> Result<Vec<PredictedPair<'_>>> {
    let obs = &cfg.observables;
    let mut out = Vec::new();
    for i in 0..obs.len() {
        for j in i..obs.len() {
            let p = predict_pair(&obs[i], &obs[j], &cfg.model, cfg.truncation).with_context(|| format!("predicting ({}, {})", obs[i].name, obs[j].name))?;
            out.push(PredictedPair {
                x: &obs[i].name,
                y: &obs[j].name,
                pseudo: p.map(|r| r.pseudo),
                hermitian: p.map(|r| r.hermitian),
            });
        }
    }
    Ok(out)
}

pub fn covariance(cfg: &RunConfig, sink: &Sink) -> Result<Outcome> {
    let pairs = predicted_pairs(cfg)?;
    sink.json(
        "stats.json",
        &json!({
            "kind": "covariance",
            "model": model_json(&cfg.model),
            "truncation": cfg.truncation,
            "pairs": pairs,
        }),
    )?;
    if let [only] = pairs.as_slice() {
        print(&json!({ "pseudo": only.pseudo, "hermitian": only.hermitian }))?;
    } else {
        print(&pairs)?;
    }
    Ok(CLEAN)
}

#[derive(Serialize)]
struct Compared {
    estimate: Complex64,
    se: [f64; 2],
    predicted: Option<Complex64>,
    z_score: Option<f64>,
}

impl Compared {
    fn new(e: Estimate, predicted: Option<Complex64>) -> Self {
        Self {
            estimate: e.value,
            se: [e.se_re, e.se_im],
            predicted,
            z_score: predicted.map(|p| e.z_score(p)),
        }
    }
}

#[derive(Serialize)]
struct ComparedPair<'a> {
    x: &'a str,
    y: &'a str,
    pseudo: Compared,
    hermitian: Compared,
}

fn statistic(o: &ObservableConfig) -> NamedStatistic {
    let s = match &o.kind {
        ObservableKind::Laurent { f, weight } => Statistic::Laurent(Observable::new(f.clone(), weight.clone())),
        ObservableKind::Resolvent(z) => Statistic::Resolvent(*z),
        ObservableKind::LogDet(z) => Statistic::LogDet(*z),
    };
    NamedStatistic::new(o.name.clone(), s)
}

fn write_trials(sink: &Sink, stats: &EnsembleStats) -> Result<()> {
    let mut header = vec!["trial".to_string()];
    for n in stats.names() {
        header.push(format!("re_{n}"));
        header.push(format!("im_{n}"));
    }
    let rows = stats.samples().iter().enumerate().map(|(t, row)| {
        let mut r = vec![t.to_string()];
        r.extend(row.iter().flat_map(|&z| complex_cells(z)));
        r
    });
    sink.csv("trials.csv", &header, rows)
}

/// Monte Carlo over the configured observables with limit predictions and the
/// Gaussianity gate.
fn monte_carlo(cfg: &RunConfig, kind: &str, observables: &[ObservableConfig], sink: &Sink) -> Result<Outcome> {
    let plan = ExperimentPlan::new(cfg.model.clone(), observables.iter().map(statistic).collect(), cfg.trials, cfg.seed)?;
    let stats = run(&plan)?;
    let mut pairs = Vec::new();
    for i in 0..observables.len() {
        for j in i..observables.len() {
            let pred = predict_pair(&observables[i], &observables[j], &cfg.model, cfg.truncation)?;
            let est = stats.pair(i, j);
            pairs.push(ComparedPair {
                x: &observables[i].name,
                y: &observables[j].name,
                pseudo: Compared::new(est.pseudo, pred.map(|p| p.pseudo)),
                hermitian: Compared::new(est.hermitian, pred.map(|p| p.hermitian)),
            });
        }
    }
    let means: Vec<_> = observables
        .iter()
        .enumerate()
        .map(|(i, o)| json!({ "name": o.name, "mean": Compared::new(stats.mean(i), Some(Complex64::new(0.0, 0.0))) }))
        .collect();
    let report = if cfg.trials >= MIN_DIAGNOSTIC_TRIALS { Some(gaussianity_report(&stats)?) } else { None };
    let gate = match &report {
        Some(r) => json!({
            "threshold": r.threshold,
            "tests": r.tests.len(),
            "flags": r.flags().count(),
            "max_z_score": r.max_z_score(),
        }),
        None => json!({ "skipped": format!("needs at least {MIN_DIAGNOSTIC_TRIALS} trials") }),
    };
    let summary = json!({
        "kind": kind,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "model": model_json(&cfg.model),
        "means": means,
        "pairs": pairs,
        "gaussianity": gate,
    });
    write_trials(sink, &stats)?;
    let mut full = summary.clone();
    full["gaussianity_tests"] = json!(report.as_ref().map(|r| &r.tests));
    sink.json("stats.json", &full)?;
    print(&summary)?;
    Ok(Outcome {
        flagged: report.is_some_and(|r| !r.is_clean()),
    })
}

pub fn fluctuations(cfg: &RunConfig, sink: &Sink) -> Result<Outcome> {
    monte_carlo(cfg, "fluctuations", &cfg.observables, sink)
}

pub fn charpoly(cfg: &RunConfig, sink: &Sink) -> Result<Outcome> {
    let obs: Vec<ObservableConfig> = cfg
        .points
        .iter()
        .enumerate()
        .map(|(i, &z)| ObservableConfig {
            name: format!("logdet{i}"),
            kind: ObservableKind::LogDet(z),
        })
        .collect();
    monte_carlo(cfg, "charpoly", &obs, sink)
}

pub fn weingarten(cfg: &RunConfig, sink: &Sink) -> Result<Outcome> {
    let table = wg_table(cfg.k, cfg.dim)?;
    let entries: Vec<_> = table
        .entries()
        .into_iter()
        .map(|(p, v)| {
            json!({
                "class": p.to_string(),
                "cycle_type": p.cycle_type(),
                "value": v.to_string(),
                "approx": num_traits::ToPrimitive::to_f64(&v),
            })
        })
        .collect();
    sink.json("stats.json", &json!({ "kind": "weingarten", "k": cfg.k, "dim": cfg.dim, "entries": entries }))?;
    println!("{table}");
    Ok(CLEAN)
}

pub fn outliers(cfg: &RunConfig, sink: &Sink) -> Result<Outcome> {
    let spec = cfg.perturbation.as_ref().context("perturbation: required for `outliers`")?;
    if cfg.dim < MIN_DETECTION_DIM {
        anyhow::bail!("dim: outlier detection needs N >= {MIN_DETECTION_DIM}, got {}", cfg.dim);
    }
    let prediction = predict(spec, &cfg.model);
    let eigs = perturbed_spectrum(spec, &cfg.model, SeededStream::new(cfg.seed, 0))?;
    let detected = outside_annulus(&eigs, &cfg.model);
    let radius = matching_radius(cfg.dim);
    let matched = match_outliers(&detected, &prediction, radius);
    let scan = if cfg.fluctuation_dims.is_empty() {
        None
    } else {
        Some(fluctuation_scale(spec, &cfg.model, &cfg.fluctuation_dims, cfg.trials, cfg.seed)?)
    };
    let summary = json!({
        "kind": "outliers",
        "seed": cfg.seed,
        "model": model_json(&cfg.model),
        "variant": spec.variant(),
        "prediction": prediction,
        "matching_radius": radius,
        "detected": detected,
        "matching": matched,
        "exact_match": matched.is_exact(),
        "fluctuations": scan,
    });
    let (header, rows) = points_table(&eigs);
    sink.csv("spectrum.csv", &header, rows)?;
    let pred_header: Vec<String> = ["re", "im", "source_re", "source_im", "multiplicity"].iter().map(|s| s.to_string()).collect();
    let pred_rows = prediction.outliers.iter().map(|o| {
        let mut r = complex_cells(o.location).to_vec();
        r.extend(complex_cells(o.source));
        r.push(o.multiplicity.to_string());
        r
    });
    sink.csv("predictions.csv", &pred_header, pred_rows)?;
    sink.json("stats.json", &summary)?;
    print(&summary)?;
    Ok(CLEAN)
}
