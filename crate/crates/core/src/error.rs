use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("walk data exhausted: needed {needed} entries, {available} available")]
    InsufficientData { needed: usize, available: usize },
    #[error("raw coins exhausted after {used} entries while completing bridge {bridge}")]
    InsufficientCoins { used: usize, bridge: usize },
    #[error("walk covers {available} steps but {needed} are required")]
    InsufficientSteps { needed: usize, available: usize },
    #[error("coin row {row} would exceed the cap of {cap} entries")]
    RowCapExceeded { row: usize, cap: usize },
    #[error("level {m} is too coarse (m0 = {m0})")]
    LevelTooCoarse { m: u32, m0: f64 },
    #[error("down factor d_m = {d} is not positive at level {m}")]
    NonPositiveDownFactor { m: u32, d: f64 },
    #[error("horizon {horizon} is not a multiple of 2^-{}", 2 * .m)]
    NonDyadicHorizon { horizon: f64, m: u32 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },
    #[error("{steps} steps exceeds the configured cap of {cap}")]
    StepCapExceeded { steps: usize, cap: usize },
    #[error("payoff does not provide a derivative of order {order}")]
    DerivativeUnavailable { order: u32 },
    #[error("depth {depth} exceeds the tree cap {cap} and Monte Carlo is disabled")]
    DepthExceeded { depth: usize, cap: usize },
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
    #[error("rate fit needs at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("error value {value} at m = {m} is not positive")]
    NonPositiveError { m: f64, value: f64 },
}

impl Error {
    /// True for guards that trip on numerical limits rather than bad input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::RowCapExceeded { .. }
                | Error::StepCapExceeded { .. }
                | Error::DepthExceeded { .. }
                | Error::NonPositiveError { .. }
                | Error::InsufficientCoins { .. }
        )
    }
}
