use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid site pair ({0}, {1})")]
    InvalidPair(usize, usize),

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("disorder sampling could not keep sites ordered after {0} attempts")]
    DisorderOrdering(usize),

    #[error("sector {sector} is empty for a chain of {n_sites} sites")]
    EmptySector { sector: String, n_sites: usize },

    #[error("post-selection probability {0:e} is below the configured floor")]
    EmptyPostSelection(f64),

    #[error("facilitation resonance on pair ({i}, {j}): |detuning + V| = {gap:.6} rad/us")]
    FacilitationResonance { i: usize, j: usize, gap: f64 },

    #[error("large-detuning condition violated at site {site}: rabi/|detuning| = {ratio:.4}")]
    WeakDetuning { site: usize, ratio: f64 },

    #[error("vanishing energy denominator between configurations {a:#b} and {c:#b}")]
    SingularDenominator { a: u64, c: u64 },

    #[error("step size underflow at t = {0} us")]
    Stiffness(f64),

    #[error("dimension {dim} exceeds the dense cap {cap}; use trajectory mode")]
    DimensionCap { dim: usize, cap: usize },

    #[error("bands {lower} and {upper} touch at grid point (k index {k}, phi index {phi}): gap {gap:e}")]
    DegenerateBands { lower: usize, upper: usize, k: usize, phi: usize, gap: f64 },

    #[error("coupling design did not converge: residual {residual:e} after {iterations} iterations")]
    DesignFailure { residual: f64, iterations: usize },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
