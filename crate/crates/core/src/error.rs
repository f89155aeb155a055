use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum LevyError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid lattice specification: {0}")]
    InvalidLattice(String),

    #[error("quadrature did not converge (achieved error {achieved:.3e}, requested {requested:.3e}): {context}")]
    Quadrature { context: String, achieved: f64, requested: f64 },

    #[error("no density guarantee: neither diffusion nor Orey data: {0}")]
    NoDensity(String),

    #[error("invalid scheme: {0}")]
    SchemeInvalid(String),

    #[error("step h = {h} is not below the validity threshold h* = {h_star}")]
    StepTooLarge { h: f64, h_star: f64 },

    #[error("negative off-diagonal rate {rate:.6e} at offset {offset:?}")]
    NegativeRate { offset: Vec<i64>, rate: f64 },

    #[error("jump-weight enumeration overflow: {0}; raise tail_cut or supply closed-form tails")]
    EnumerationOverflow(String),

    #[error("negative time t = {0}")]
    NegativeTime(f64),

    #[error("matrix exponential too stiff (rate*t = {rate_t:.3e}); split the horizon into at least {suggested_steps} steps or coarsen h")]
    ExpmTooStiff { rate_t: f64, suggested_steps: usize },

    #[error("exponential moment absent: {0}")]
    NoExponentialMoment(String),

    #[error("density window too small: boundary density {boundary:.3e} exceeds tolerance {tol:.3e}")]
    WindowTooSmall { boundary: f64, tol: f64 },

    #[error("state {0:?} is outside the truncated state space")]
    StateOutside(Vec<f64>),

    #[error("{0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LevyError>;
