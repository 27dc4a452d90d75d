use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degeneracy exponent alpha = {0} must lie in (0, 2)")]
    AlphaOutOfRange(f64),
    #[error("epsilon_cut = {0} must lie in (0, 1) so that Omega_1 = (epsilon, 1) is a proper subinterval")]
    EpsilonOutOfRange(f64),
    #[error("grid needs at least 4 cells, got {0}")]
    TooFewCells(usize),
    #[error("Omega_1 contains no cell for epsilon_cut = {0}")]
    EmptyControlRegion(f64),
    #[error("time grid requires 0 < tau < T and a window of at least one step (T = {horizon}, tau = {tau}, n_steps = {n_steps})")]
    InvalidTimeWindow {
        horizon: f64,
        tau: f64,
        n_steps: usize,
    },
    #[error("volume fraction lambda = {0} must lie in (0, 1)")]
    LambdaOutOfRange(f64),
    #[error("approximation threshold eps0 = {0} must be positive")]
    NonPositiveEps(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("actuator density infeasible: {0}")]
    InfeasibleDensity(String),
    #[error("singular tridiagonal system at row {0}")]
    SingularSystem(usize),
    #[error("target not reachable to eps0/2 at this resolution (best residual {residual:.3e}, target {target:.3e})")]
    RangeUnreachable { residual: f64, target: f64 },
    #[error("observability sampling degenerate: every sampled observation energy vanished (is tau >= T?)")]
    DegenerateObservability,
    #[error("Euler-Lagrange residual undefined at eta* = 0; use the subgradient test")]
    DegenerateMinimizer,
    #[error("infeasible at resolution: smallest attainable terminal residual {floor:.3e} exceeds eps0 = {eps0:.3e}")]
    InfeasibleAtResolution { floor: f64, eps0: f64 },
    #[error("combinatorial budget exceeded: C({m}, {k}) = {count} > {budget}")]
    BudgetExceeded {
        m: usize,
        k: usize,
        count: u128,
        budget: u128,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("linear program failed: {0}")]
    LinearProgram(String),
}

pub type Result<T> = std::result::Result<T, Error>;
