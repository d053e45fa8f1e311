use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("hamiltonian overflow at (x={x:?}, p={p:?}, u={u}) in `{name}`")]
    HamiltonianOverflow {
        name: String,
        x: Vec<f64>,
        p: Vec<f64>,
        u: f64,
    },

    #[error("gradient stencil failure in `{name}` at (x={x:?}, p={p:?}, u={u})")]
    GradientStencil {
        name: String,
        x: Vec<f64>,
        p: Vec<f64>,
        u: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite Legendre transform of `{name}` at x={x:?}, q={q:?}, u={u}")]
    NonFiniteConjugate {
        name: String,
        x: Vec<f64>,
        q: Vec<f64>,
        u: f64,
    },

    #[error("t/dt not integral (t={t}, dt={dt})")]
    StepCount { t: f64, dt: f64 },

    #[error("fixed point did not converge after {iterations} sweeps (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("curve leaves the grid: {0}")]
    CurveOffGrid(String),

    #[error("enumeration budget exceeded: {size} curves > {budget}")]
    EnumerationBudget { size: u128, budget: u128 },

    #[error("parse error in {what}: {message}")]
    Parse { what: &'static str, message: String },

    #[error("unknown hamiltonian `{0}`")]
    UnknownHamiltonian(String),
}

impl Error {
    pub(crate) fn parse(what: &'static str, message: impl Into<String>) -> Self {
        Error::Parse {
            what,
            message: message.into(),
        }
    }
}
