use thiserror::Error;

/// Errors raised by the model, the solvers and the verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("profile sample at velocity node {index} is not strictly positive ({value})")]
    NonPositiveProfile { index: usize, value: f64 },

    #[error(
        "truncated tail mass {tail_mass:.3e} exceeds 1e-6 of the total; increase vmax (currently {vmax})"
    )]
    TruncatedTail { tail_mass: f64, vmax: f64 },

    #[error("invalid profile parameters: {0}")]
    InvalidProfile(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state shape {found:?} does not match grid shape {expected:?}")]
    GridMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("negative density {value} of species {species} at x node {x_index}")]
    NegativeDensity {
        species: Species,
        x_index: usize,
        value: f64,
    },

    #[error("non-positive value {value} of species {species} at node ({x_index}, {v_index})")]
    NonPositiveState {
        species: Species,
        x_index: usize,
        v_index: usize,
        value: f64,
    },

    #[error(
        "envelope violated at t = {time}: species {species}, node ({x_index}, {v_index}), ratio {ratio} outside [{lower}, {upper}]"
    )]
    EnvelopeViolation {
        time: f64,
        species: Species,
        x_index: usize,
        v_index: usize,
        ratio: f64,
        lower: f64,
        upper: f64,
    },

    #[error("non-finite value encountered at t = {time}")]
    NonFinite { time: f64 },

    #[error("Picard iteration did not converge after {halvings} step halvings (increment {increment:.3e})")]
    PicardDivergence { halvings: usize, increment: f64 },

    #[error("decay fit: {0}")]
    Fit(String),

    #[error("eigenvalue iteration did not converge: {0}")]
    Eigen(String),

    #[error("dense assembly of dimension {dim} exceeds the limit of 8192")]
    DenseTooLarge { dim: usize },
}

/// Species label used in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    F,
    G,
}

impl std::fmt::Display for Species {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Species::F => write!(f, "f"),
            Species::G => write!(f, "g"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
