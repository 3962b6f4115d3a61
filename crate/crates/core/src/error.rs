use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("dimension {0} not supported (need 2 < n <= {max})", max = crate::jet::MAX_DIM)]
    UnsupportedDimension(usize),
    #[error("point {point:?} lies outside the chart domain")]
    PointOutsideDomain { point: Vec<f64> },
    #[error("metric is not positive definite at {point:?}")]
    MetricNotPositiveDefinite { point: Vec<f64> },
    #[error("finite-difference step {step} reaches outside the chart domain at {point:?}")]
    StepTooLargeForDomain { point: Vec<f64>, step: f64 },
    #[error("invalid radial profile: {0}")]
    InvalidProfile(String),
    #[error("point {point:?} is on the cut locus (lift gap {gap:e})")]
    CutLocusPoint { point: Vec<f64>, gap: f64 },
    #[error("no regular points found at level {level} after {attempts} attempts")]
    NoRegularPoints { level: f64, attempts: usize },
    #[error("manifold is parabolic: area growth exponent {slope} gives a divergent Green's tail")]
    ParabolicManifold { slope: f64 },
    #[error("area profile is not asymptotically conical: fitted exponent {slope}, expected {expected}")]
    TailNotConical { slope: f64, expected: f64 },
    #[error("|∇u| = {grad_norm:e} at {point:?} is below the gradient floor {floor:e}")]
    DegenerateGradient { point: Vec<f64>, grad_norm: f64, floor: f64 },
    #[error("beta = {beta} below the critical exponent {critical} for n = {n}")]
    BetaBelowCritical { n: usize, beta: f64, critical: f64 },
    #[error("u fails Δu² = 2n|∇u|² at {point:?}: relative residual {residual:e}")]
    PrecheckFailed { point: Vec<f64>, residual: f64 },
    #[error("level {level} is not a regular value")]
    NonRegularLevel { level: f64 },
    #[error("coarea paths disagree on [{r1}, {r2}]: shells {shells}, volume {volume}")]
    CoareaMismatch { r1: f64, r2: f64, shells: f64, volume: f64 },
    #[error("tail bound {tail:e} dominates the match tolerance {tolerance:e}; enlarge R_max")]
    TailTruncationDominates { tail: f64, tolerance: f64 },
    #[error("operation requires a {expected} model, got {got}")]
    WrongModel { expected: &'static str, got: String },
    #[error("quadrature did not converge on [{a}, {b}] (error estimate {err:e})")]
    QuadratureFailed { a: f64, b: f64, err: f64 },
    #[error("integrand ~ s^{exponent:.4} below s = {near:e} is not integrable at the pole")]
    DivergentPoleIntegral { exponent: f64, near: f64 },
    #[error("invalid radius grid: {0}")]
    InvalidGrid(String),
    #[error("root finding failed: {0}")]
    RootNotFound(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
