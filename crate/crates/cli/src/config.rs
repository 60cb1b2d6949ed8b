//! JSON run configuration, command-line overrides and validation.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;
use single_ring::laurent::{region_of, LaurentPoly, Weight};
use single_ring::model::{Composition, ProfileLaw, SingleRingModel, SingularProfile};
use single_ring::outliers::{PerturbationSpec, Variant, MAX_RANK};

pub const DEFAULT_DIM: usize = 256;
pub const DEFAULT_TRIALS: usize = 2000;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_TRUNCATION: u32 = 8;

/// A validation or parse failure tied to a config field.
#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Spectrum,
    Covariance,
    Fluctuations,
    Weingarten,
    Outliers,
    Charpoly,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Covariance => "covariance",
            ExperimentKind::Fluctuations => "fluctuations",
            ExperimentKind::Weingarten => "weingarten",
            ExperimentKind::Outliers => "outliers",
            ExperimentKind::Charpoly => "charpoly",
        }
    }
}

/// The file format, before validation.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub kind: Option<ExperimentKind>,
    pub profile: Option<Value>,
    pub composition: Option<Composition>,
    pub dim: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub truncation: Option<u32>,
    /// Shorthand for a single observable named `f`.
    pub f: Option<Vec<(i32, f64, f64)>>,
    pub observables: Option<Vec<Value>>,
    /// Spectral parameters for `charpoly`.
    pub points: Option<Vec<[f64; 2]>>,
    /// Order for `weingarten`.
    pub k: Option<usize>,
    pub perturbation: Option<Value>,
    /// Dimensions for the outlier fluctuation scan.
    pub fluctuation_dims: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObservable {
    name: String,
    f: Option<Vec<(i32, f64, f64)>>,
    resolvent: Option<[f64; 2]>,
    logdet: Option<[f64; 2]>,
    weight: Option<Value>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawWeight {
    Identity,
    Entry { i: usize, j: usize },
    Dyad { left: Vec<[f64; 2]>, right: Vec<[f64; 2]> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPerturbation {
    eigenvalues: Vec<[f64; 2]>,
    variant: Variant,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub dim: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub truncation: Option<u32>,
    pub k: Option<usize>,
}

#[derive(Clone, Debug)]
pub enum ObservableKind {
    Laurent { f: LaurentPoly, weight: Weight },
    Resolvent(Complex64),
    LogDet(Complex64),
}

#[derive(Clone, Debug)]
pub struct ObservableConfig {
    pub name: String,
    pub kind: ObservableKind,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub model: SingleRingModel,
    pub dim: usize,
    pub trials: usize,
    pub seed: u64,
    pub truncation: u32,
    pub observables: Vec<ObservableConfig>,
    pub points: Vec<Complex64>,
    pub k: usize,
    pub perturbation: Option<PerturbationSpec>,
    pub fluctuation_dims: Vec<usize>,
}

fn typed<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { prefix.to_string() } else { format!("{prefix}.{inner}") };
        ConfigError::new(path, e.into_inner().to_string())
    })
}

pub fn read_raw(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    parse_raw(&text)
}

pub fn parse_raw(text: &str) -> Result<RawConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| ConfigError::new(e.path().to_string(), e.into_inner().to_string()))
}

fn complex(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

fn parse_profile(value: Option<Value>, dim: usize) -> Result<SingularProfile> {
    let law = match value {
        None => ProfileLaw::Identity,
        Some(Value::String(s)) if s == "identity" => ProfileLaw::Identity,
        Some(Value::String(s)) => return Err(ConfigError::new("profile", format!("unknown profile `{s}`; expected \"identity\" or an object"))),
        Some(v) => typed::<ProfileLaw>(v, "profile")?,
    };
    match &law {
        ProfileLaw::Uniform { lo, hi } => {
            if !(lo.is_finite() && *lo >= 0.0) {
                return Err(ConfigError::new("profile.lo", format!("must be finite and >= 0, got {lo}")));
            }
            if !(hi.is_finite() && lo < hi) {
                return Err(ConfigError::new("profile.lo", format!("must be below profile.hi (lo = {lo}, hi = {hi})")));
            }
        }
        ProfileLaw::Atoms { atoms } => {
            if atoms.is_empty() {
                return Err(ConfigError::new("profile.atoms", "needs at least one atom"));
            }
            for (i, (s, w)) in atoms.iter().enumerate() {
                if !(s.is_finite() && *s >= 0.0) {
                    return Err(ConfigError::new(format!("profile.atoms[{i}][0]"), format!("location must be finite and >= 0, got {s}")));
                }
                if !(w.is_finite() && *w > 0.0) {
                    return Err(ConfigError::new(format!("profile.atoms[{i}][1]"), format!("weight must be positive, got {w}")));
                }
            }
        }
        ProfileLaw::Identity => {}
    }
    SingularProfile::new(law, dim).map_err(|e| ConfigError::new("profile", e.to_string()))
}

fn parse_weight(value: Option<Value>, dim: usize, path: &str) -> Result<Weight> {
    let raw = match value {
        None => return Ok(Weight::Identity),
        Some(Value::String(s)) if s == "identity" => return Ok(Weight::Identity),
        Some(v) => typed::<RawWeight>(v, path)?,
    };
    match raw {
        RawWeight::Identity => Ok(Weight::Identity),
        RawWeight::Entry { i, j } => {
            if i >= dim || j >= dim {
                return Err(ConfigError::new(path, format!("entry ({i}, {j}) outside a {dim}x{dim} matrix")));
            }
            Ok(Weight::matrix_entry(i, j, dim))
        }
        RawWeight::Dyad { left, right } => {
            for (side, v) in [("left", &left), ("right", &right)] {
                if v.len() != dim {
                    return Err(ConfigError::new(format!("{path}.{side}"), format!("has {} entries, expected dim = {dim}", v.len())));
                }
            }
            Weight::dyad(left.into_iter().map(complex).collect(), right.into_iter().map(complex).collect())
                .map_err(|e| ConfigError::new(path, e.to_string()))
        }
    }
}

fn parse_observable(value: Value, dim: usize, index: usize) -> Result<ObservableConfig> {
    let path = format!("observables[{index}]");
    let raw: RawObservable = typed(value, &path)?;
    if raw.name.is_empty() {
        return Err(ConfigError::new(format!("{path}.name"), "must not be empty"));
    }
    let given = [raw.f.is_some(), raw.resolvent.is_some(), raw.logdet.is_some()].iter().filter(|&&b| b).count();
    if given != 1 {
        return Err(ConfigError::new(&path, "give exactly one of `f`, `resolvent`, `logdet`"));
    }
    if raw.weight.is_some() && raw.f.is_none() {
        return Err(ConfigError::new(format!("{path}.weight"), "only Laurent observables (`f`) take a weight"));
    }
    let kind = if let Some(f) = raw.f {
        ObservableKind::Laurent {
            f: laurent(&f, &format!("{path}.f"))?,
            weight: parse_weight(raw.weight, dim, &format!("{path}.weight"))?,
        }
    } else if let Some(z) = raw.resolvent {
        ObservableKind::Resolvent(complex(z))
    } else {
        ObservableKind::LogDet(complex(raw.logdet.expect("one field is present")))
    };
    Ok(ObservableConfig { name: raw.name, kind })
}

fn laurent(triples: &[(i32, f64, f64)], path: &str) -> Result<LaurentPoly> {
    if let Some(i) = triples.iter().position(|t| !t.1.is_finite() || !t.2.is_finite()) {
        return Err(ConfigError::new(format!("{path}[{i}]"), "coefficient is not finite"));
    }
    Ok(LaurentPoly::from_triples(triples))
}

fn parse_perturbation(value: Value) -> Result<PerturbationSpec> {
    let raw: RawPerturbation = typed(value, "perturbation")?;
    if raw.eigenvalues.len() > MAX_RANK {
        return Err(ConfigError::new("perturbation.eigenvalues", format!("at most {MAX_RANK} entries")));
    }
    PerturbationSpec::new(raw.eigenvalues.into_iter().map(complex).collect(), raw.variant).map_err(|e| ConfigError::new("perturbation", e.to_string()))
}

impl RawConfig {
    /// Merges command-line values and validates everything before any sampling.
    pub fn resolve(self, command: ExperimentKind, ov: &Overrides) -> Result<RunConfig> {
        if let Some(kind) = self.kind {
            if kind != command {
                return Err(ConfigError::new("kind", format!("config is for `{}` but the command is `{}`", kind.name(), command.name())));
            }
        }
        let dim = ov.dim.or(self.dim).unwrap_or(DEFAULT_DIM);
        let trials = ov.trials.or(self.trials).unwrap_or(DEFAULT_TRIALS);
        let seed = ov.seed.or(self.seed).unwrap_or(DEFAULT_SEED);
        let truncation = ov.truncation.or(self.truncation).unwrap_or(DEFAULT_TRUNCATION);
        let k = ov.k.or(self.k).unwrap_or(2);
        if dim == 0 {
            return Err(ConfigError::new("dim", "must be positive"));
        }
        if trials < 2 && matches!(command, ExperimentKind::Fluctuations | ExperimentKind::Charpoly) {
            return Err(ConfigError::new("trials", format!("need at least 2, got {trials}")));
        }
        if truncation == 0 {
            return Err(ConfigError::new("truncation", "must be positive"));
        }
        let profile = parse_profile(self.profile, dim)?;
        let model = SingleRingModel::new(profile, self.composition.unwrap_or_default());

        let mut observables = Vec::new();
        if let Some(f) = self.f {
            observables.push(ObservableConfig {
                name: "f".into(),
                kind: ObservableKind::Laurent {
                    f: laurent(&f, "f")?,
                    weight: Weight::Identity,
                },
            });
        }
        for (i, v) in self.observables.unwrap_or_default().into_iter().enumerate() {
            observables.push(parse_observable(v, dim, i)?);
        }
        let mut seen = BTreeSet::new();
        for (i, o) in observables.iter().enumerate() {
            if !seen.insert(o.name.clone()) {
                return Err(ConfigError::new(format!("observables[{i}].name"), format!("duplicate name `{}`", o.name)));
            }
        }
        for (i, o) in observables.iter().enumerate() {
            let path = if o.name == "f" && i == 0 { "f".to_string() } else { format!("observables[{i}]") };
            match &o.kind {
                ObservableKind::Laurent { f, .. } if f.has_negative_powers() && model.a() <= 0.0 => {
                    return Err(ConfigError::new(
                        path,
                        "negative powers need singular values bounded away from 0 (inner radius a > 0); this profile touches 0",
                    ));
                }
                ObservableKind::Resolvent(z) | ObservableKind::LogDet(z) => {
                    region_of(*z, model.a(), model.b()).map_err(|e| ConfigError::new(path, e.to_string()))?;
                }
                _ => {}
            }
        }
        let points: Vec<Complex64> = self.points.unwrap_or_default().into_iter().map(complex).collect();
        for (i, z) in points.iter().enumerate() {
            region_of(*z, model.a(), model.b()).map_err(|e| ConfigError::new(format!("points[{i}]"), e.to_string()))?;
        }
        let perturbation = self.perturbation.map(parse_perturbation).transpose()?;
        let fluctuation_dims = self.fluctuation_dims.unwrap_or_default();

        match command {
            ExperimentKind::Covariance | ExperimentKind::Fluctuations if observables.is_empty() => {
                return Err(ConfigError::new("observables", "no observables given (use `f` or `observables`)"));
            }
            ExperimentKind::Charpoly if points.is_empty() => {
                return Err(ConfigError::new("points", "give at least one spectral parameter"));
            }
            ExperimentKind::Outliers if perturbation.is_none() => {
                return Err(ConfigError::new("perturbation", "required for `outliers`"));
            }
            ExperimentKind::Outliers if !fluctuation_dims.is_empty() && fluctuation_dims.len() < 2 => {
                return Err(ConfigError::new("fluctuation_dims", "give at least two dimensions"));
            }
            ExperimentKind::Weingarten if !(1..=single_ring::weingarten::MAX_ORDER).contains(&k) => {
                return Err(ConfigError::new("k", format!("must be in 1..={}", single_ring::weingarten::MAX_ORDER)));
            }
            _ => {}
        }

        Ok(RunConfig {
            kind: command,
            model,
            dim,
            trials,
            seed,
            truncation,
            observables,
            points,
            k,
            perturbation,
            fluctuation_dims,
        })
    }
}

pub fn load(path: Option<&PathBuf>, command: ExperimentKind, ov: &Overrides) -> Result<RunConfig> {
    let raw = match path {
        Some(p) => read_raw(p)?,
        None => RawConfig::default(),
    };
    raw.resolve(command, ov)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str, kind: ExperimentKind) -> Result<RunConfig> {
        parse_raw(text)?.resolve(kind, &Overrides::default())
    }

    #[test]
    fn minimal_covariance_config_gets_defaults() {
        let c = resolve(r#"{"kind": "covariance", "f": [[1, 1, 0]], "profile": "identity"}"#, ExperimentKind::Covariance).unwrap();
        assert_eq!((c.dim, c.trials, c.seed, c.truncation), (256, 2000, 0, 8));
        assert_eq!(c.observables.len(), 1);
    }

    #[test]
    fn uniform_bounds_name_the_field() {
        let e = resolve(r#"{"f": [[1, 1, 0]], "profile": {"kind": "uniform", "lo": 3, "hi": 1}}"#, ExperimentKind::Covariance).unwrap_err();
        assert_eq!(e.path, "profile.lo");
    }

    #[test]
    fn negative_powers_need_inner_radius() {
        let e = resolve(r#"{"f": [[-1, 1, 0]], "profile": {"kind": "uniform", "lo": 0, "hi": 1}}"#, ExperimentKind::Covariance).unwrap_err();
        assert_eq!(e.path, "f");
        assert!(e.message.contains("a > 0"));
    }

    #[test]
    fn unknown_keys_are_rejected_with_paths() {
        let e = parse_raw(r#"{"trails": 3}"#).unwrap_err();
        assert!(e.message.contains("unknown field"), "{e}");
        let e = resolve(r#"{"profile": {"kind": "uniform", "lo": 1, "hi": 2, "mid": 1}, "f": [[1,1,0]]}"#, ExperimentKind::Covariance).unwrap_err();
        assert!(e.path.starts_with("profile"), "{e}");
        let e = resolve(r#"{"observables": [{"name": "x", "f": [[1,1,0]], "weight": {"kind": "entry", "i": 0}}]}"#, ExperimentKind::Covariance).unwrap_err();
        assert!(e.path.starts_with("observables[0].weight"), "{e}");
    }

    #[test]
    fn overrides_take_precedence() {
        let ov = Overrides {
            dim: Some(12),
            seed: Some(7),
            ..Default::default()
        };
        let c = parse_raw(r#"{"dim": 64, "seed": 1, "trials": 30, "f": [[1,1,0]]}"#)
            .unwrap()
            .resolve(ExperimentKind::Fluctuations, &ov)
            .unwrap();
        assert_eq!((c.dim, c.seed, c.trials), (12, 7, 30));
    }

    #[test]
    fn kind_must_match_command() {
        let e = resolve(r#"{"kind": "spectrum"}"#, ExperimentKind::Weingarten).unwrap_err();
        assert_eq!(e.path, "kind");
    }

    #[test]
    fn spectral_points_must_avoid_the_ring() {
        let e = resolve(r#"{"points": [[1, 0]]}"#, ExperimentKind::Charpoly).unwrap_err();
        assert_eq!(e.path, "points[0]");
        let e = resolve(
            r#"{"profile": {"kind": "uniform", "lo": 0.5, "hi": 4}, "observables": [{"name": "r", "resolvent": [2.5, 0]}]}"#,
            ExperimentKind::Fluctuations,
        )
        .unwrap_err();
        assert_eq!(e.path, "observables[0]");
    }

    #[test]
    fn perturbation_is_parsed() {
        let c = resolve(
            r#"{"profile": {"kind": "uniform", "lo": 0.5, "hi": 4}, "perturbation": {"eigenvalues": [[-2, 0]], "variant": "a_plus_ap"}}"#,
            ExperimentKind::Outliers,
        )
        .unwrap();
        assert_eq!(c.perturbation.unwrap().rank(), 1);
        let e = resolve(r#"{"perturbation": {"eigenvalues": [], "variant": "both"}}"#, ExperimentKind::Outliers).unwrap_err();
        assert_eq!(e.path, "perturbation.variant");
    }
}
