use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular to working precision (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("non-finite entry encountered in {0}")]
    NonFinite(&'static str),

    #[error("eigenvalue iteration failed to converge on a {dim}x{dim} matrix")]
    NoConvergence { dim: usize },

    #[error("invalid singular-value profile: {0}")]
    InvalidProfile(String),

    #[error("negative Laurent powers require an inner radius a > 0")]
    NegativePowersWithZeroInnerRadius,

    #[error("point {z} is too close to the annulus [{lo:.6}, {hi:.6}]")]
    RingProximity { z: Complex64, lo: f64, hi: f64 },

    #[error("region violation: {0}")]
    RegionViolation(String),

    #[error("test function is not normalized: weighted norm {norm} differs from 1")]
    NormalizationError { norm: f64 },

    #[error("Gram matrix of S_{k} is singular at dimension {dim}")]
    GramSingular { k: usize, dim: usize },

    #[error("moment order {k} exceeds the supported maximum of 6")]
    OrderTooLarge { k: usize },

    #[error("brute-force index sum needs {terms} terms, budget is {budget}")]
    ComplexityBudgetExceeded { terms: u128, budget: u128 },

    #[error("{trials} trials is too few for diagnostics (need at least {required})")]
    InsufficientTrials { trials: usize, required: usize },

    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("{}", missing_outlier_message(.predicted, *.radius))]
    MissingOutlier { predicted: Option<Complex64>, radius: f64 },

    #[error("trial {index}: {source}")]
    Trial {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

fn missing_outlier_message(predicted: &Option<Complex64>, radius: f64) -> String {
    match predicted {
        Some(z) => format!("no detected eigenvalue within {radius:.4} of predicted outlier {z}"),
        None => "the perturbation predicts no outlier to track".to_string(),
    }
}

impl Error {
    pub(crate) fn in_trial(self, index: usize) -> Self {
        Error::Trial {
            index,
            source: Box::new(self),
        }
    }
}
