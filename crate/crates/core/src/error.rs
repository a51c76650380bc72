use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("lattice length must be even and at least 2, got {0}")]
    InvalidLength(usize),
    #[error("site {site} out of range for lattice of length {len}")]
    SiteOutOfRange { site: usize, len: usize },
    #[error("vector length {got} does not match lattice length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("bond set does not match the active bonds of layer t={t}")]
    BondMismatch { t: u64 },
    #[error("impossible outcome {outcome} at site {site}")]
    ImpossibleOutcome { site: usize, outcome: u8 },
    #[error("no-click measurement has no stochastic outcome")]
    NoStochasticOutcome,
    #[error("postselection impossible: particle fully localized on measured site {0}")]
    PostselectionImpossible(usize),
    #[error("inconsistent detection at site {0}: estimated mass is zero")]
    InconsistentDetection(usize),
    #[error("inconsistent miss at site {0}: all estimated mass sits there")]
    InconsistentMiss(usize),
    #[error("divergent time integral: mean IPR requires q < 3, got q = {0}")]
    DivergentIntegral(f64),
    #[error("power-law fit needs at least {needed} points with L >= {min_l}, found {found}")]
    InsufficientPoints { needed: usize, found: usize, min_l: f64 },
    #[error("power-law fit requires positive values, got {value} at L = {l}")]
    NonPositiveValue { l: f64, value: f64 },
    #[error("trajectory {index} at L = {length} failed: {source}")]
    Trajectory {
        length: usize,
        index: u64,
        #[source]
        source: Box<Error>,
    },
}
