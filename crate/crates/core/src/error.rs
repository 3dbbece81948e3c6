use thiserror::Error;

/// Failure modes shared by every module of the toolkit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeoError {
    #[error("metric is singular or not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue:e})")]
    SingularMetric { point: Vec<f64>, min_eigenvalue: f64 },
    #[error("metric is not symmetric at {point:?} (asymmetry {asymmetry:e})")]
    AsymmetricMetric { point: Vec<f64>, asymmetry: f64 },
    #[error("point {point:?} lies outside the chart")]
    OutOfChart { point: Vec<f64> },
    #[error("evaluation produced a non-finite value at {point:?}")]
    NonFinite { point: Vec<f64> },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate plane (Gram determinant {gram:e})")]
    DegeneratePlane { gram: f64 },
    #[error("geodesic left the chart at t = {t}")]
    LeftChart { t: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("point is at distance {distance} > declared injectivity radius {radius}")]
    OutsideDeclaredInjRadius { distance: f64, radius: f64 },
    #[error("warping function is not positive ({value}) at {point:?}")]
    NonpositiveWarp { point: Vec<f64>, value: f64 },
    #[error("field kind mismatch: {0}")]
    KindMismatch(String),
    #[error("immersion differential is rank deficient at {point:?} (smallest singular value {sigma:e})")]
    RankDeficient { point: Vec<f64>, sigma: f64 },
    #[error("ambient is not a warped product")]
    AmbientNotWarped,
    #[error("ambient of the immersion does not match the submersion's total space")]
    AmbientMismatch,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("dimension error: {0}")]
    DimensionError(String),
    #[error("search failed: {0}")]
    SearchFailed(String),
    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),
    #[error("containment violated at M-point {witness:?} (base distance {distance} >= r = {radius})")]
    ContainmentViolated { witness: Vec<f64>, distance: f64, radius: f64 },
    #[error("dimension hypothesis 2 n_M >= 2 n_V + n_X + 1 fails: {n_m}, {n_v}, {n_x}")]
    DimensionHypothesisFailed { n_m: usize, n_v: usize, n_x: usize },
    #[error("not a Riemannian submersion at {witness:?}: {reason}")]
    NotASubmersion { witness: Vec<f64>, reason: String },
    #[error("field extension ill-conditioned: {0}")]
    ExtensionFailure(String),
    #[error("family is not orthonormal (Gram deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("empty sampling region")]
    EmptyRegion,
    #[error("no Omori-Yau point found for n = {n}")]
    NotFound { n: f64 },
    #[error("iterated logarithm undefined: log^({j}) of {rho} is not positive")]
    IterateDomainError { j: usize, rho: f64 },
    #[error("scenario declares no divergent rays")]
    NoDivergentRays,
}

impl GeoError {
    /// Failures that mean a theorem hypothesis does not hold, as opposed to
    /// a numerical breakdown.
    pub fn is_hypothesis_failure(&self) -> bool {
        matches!(
            self,
            GeoError::HypothesisFailed(_)
                | GeoError::ContainmentViolated { .. }
                | GeoError::DimensionHypothesisFailed { .. }
                | GeoError::NotASubmersion { .. }
                | GeoError::OutsideDeclaredInjRadius { .. }
                | GeoError::AmbientNotWarped
                | GeoError::AmbientMismatch
        )
    }
}

pub type Result<T> = std::result::Result<T, GeoError>;
