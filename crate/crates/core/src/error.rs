use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("non-real spectrum at sample {0:?}")]
    NonRealSpectrum(Vec<f64>),
    #[error("model evaluation rejected state {0:?}")]
    EvaluationOutsideBox(Vec<f64>),
    #[error("complex eigenvalues at state {0:?}")]
    ComplexEigenvalues(Vec<f64>),
    #[error("degenerate spectrum (gap {gap:.3e}) at state {state:?}")]
    DegenerateSpectrum { gap: f64, state: Vec<f64> },
    #[error("resonant denominator {denominator:.3e} for families {i},{j}")]
    ResonantDenominator { i: usize, j: usize, denominator: f64 },
    #[error("state left the admissible box at cell {cell} (t = {time})")]
    StateLeftBox { cell: usize, time: f64 },
    #[error("non-finite state at cell {cell} (t = {time})")]
    NonFiniteState { cell: usize, time: f64 },
    #[error("Newton iteration did not converge at cell {cell} (residual {residual:.3e})")]
    NewtonDivergence { cell: usize, residual: f64 },
    #[error("data too large for the decomposition: |u_x|={ux:.3e}, |u_xx|={uxx:.3e}, threshold {threshold:.3e}")]
    DataTooLarge { ux: f64, uxx: f64, threshold: f64 },
    #[error("speed gap violated: c = {0:.3e}")]
    GapViolated(f64),
    #[error("viscosity floor violated: min d = {0:.3e}")]
    ViscosityFloorViolated(f64),
    #[error("model has no conservative flux")]
    NoFlux,
    #[error("no travelling-wave connection: {0}")]
    NoConnection(String),
    #[error("insufficient window: {0}")]
    InsufficientWindow(String),
    #[error("grid too coarse: h = {h:.3e} > eps/8 = {limit:.3e}")]
    GridTooCoarse { h: f64, limit: f64 },
    #[error("grid too large for O(M^2) functional: M = {0} > 4096")]
    GridTooLarge(usize),
    #[error("hypotheses failed: {0}")]
    HypothesisFailed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config error (line {line}): {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
