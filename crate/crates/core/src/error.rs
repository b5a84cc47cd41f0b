use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{0} must be finite")]
    NotFinite(&'static str),
    #[error("r must be positive")]
    RateNotPositive,
    #[error("sigma must be positive")]
    VolatilityNotPositive,
    #[error("c must be positive")]
    ConsumptionNotPositive,
    #[error("mu must exceed r")]
    DriftBelowRate,
    #[error("lambda must be non-negative")]
    HazardNegative,
    #[error("eps must be non-negative")]
    AmbiguityNegative,
    #[error("b must be below safe level (b = {b}, safe level = {safe})")]
    RuinAboveSafe { b: f64, safe: f64 },
    #[error("eps must lie in (0, 1000] for the numerical solvers, got {0}")]
    AmbiguityRange(f64),
    #[error("lambda must lie in (0, 10] for the numerical solvers, got {0}")]
    HazardRange(f64),
    #[error("grid needs at least 17 nodes, got {0}")]
    GridTooSmall(usize),
    #[error("grid does not span [b, safe level] for these parameters")]
    GridMismatch,
    #[error("policy table does not match the grid")]
    PolicyMismatch,
    #[error("expansion constant denominator is not positive")]
    ExpansionDenominator,
    #[error("lambda must be positive for the non-robust policy")]
    HazardZero,
    #[error("eps must be positive for deviation")]
    DeviationAmbiguity,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("no convergence after {iterations} iterations (last step {last_step:e})")]
    NonConvergence { iterations: usize, last_step: f64 },
    #[error("discrete convexity of exp(eps*psi) lost; refine the grid")]
    ConvexityLoss,
    #[error("denominator eps*psi'^2 + psi'' not positive at node {0}")]
    DegenerateDenominator(usize),
    #[error("psi'' changes sign {0} times; grid is under-resolved")]
    InconsistentConcavity(usize),
    #[error("fixed-policy value left [0, 1] by {0:e}")]
    OutOfRange(f64),
}
