use crate::lti::Family;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("denominator is empty or identically zero")]
    ZeroDenominator,

    #[error("improper transfer function: numerator degree {num} exceeds denominator degree {den}")]
    Improper { num: usize, den: usize },

    #[error("{family} module expects {expected} parameter(s), got {got}")]
    ParameterCount {
        family: Family,
        expected: usize,
        got: usize,
    },

    #[error("non-finite coefficient in transfer function")]
    NonFinite,

    #[error("unstable transfer function (spectral radius {radius:.6})")]
    Unstable { radius: f64 },

    #[error("module G{index} is unstable (spectral radius {radius:.6})")]
    UnstableModule { index: usize, radius: f64 },

    #[error("a cascade needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("node {node} is outside 1..={n}")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("no path from node {from} to node {to}: cascade paths only run forward")]
    ReversePath { from: usize, to: usize },

    #[error("invalid EMP: {0}")]
    InvalidEmp(&'static str),

    #[error("EMP is defined for {emp} nodes but the network has {network}")]
    NodeCountMismatch { emp: usize, network: usize },

    #[error("EMP {0} is not minimal")]
    NotMinimal(alloc::string::String),

    #[error("invalid variance {value} at node {node}: variances must be finite and positive")]
    InvalidVariance { node: usize, value: f64 },

    #[error("non-informative EMP: reciprocal condition number {rcond:.3e} is below threshold")]
    NonInformative { rcond: f64 },

    #[error("impulse response did not reach the tail tolerance within {max_len} taps")]
    TruncationNotConverged { max_len: usize },

    #[error("every minimal EMP is non-informative for this network")]
    EmptyRanking,

    #[error("enumeration of minimal EMPs is limited to {max} nodes, got {n}")]
    TooManyNodes { n: usize, max: usize },

    #[error("cannot parse EMP literal: {0}")]
    Parse(alloc::string::String),

    #[error("{got} replications requested, at least {min} are needed")]
    TooFewReplications { got: usize, min: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
}
