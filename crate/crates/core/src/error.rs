use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid preference: {0}")]
    InvalidPreference(String),
    #[error("votes disagree on the number of candidates ({expected} vs {found})")]
    MismatchedCandidates { expected: usize, found: usize },
    #[error("k-approval needs 1 <= k <= m-1, got k={k} with m={m}")]
    InvalidK { k: usize, m: usize },
    #[error("invalid scoring profile: {0}")]
    InvalidScores(String),
    #[error("tie-break policy needs a reference preference")]
    MissingReference,
    #[error("oracle needs {needed} winner evaluations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("classifier for {expected} called with rule {found}")]
    WrongRule { expected: String, found: String },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("instance too large: {size} exceeds limit {limit}")]
    TooLarge { size: u128, limit: u128 },
    #[error("out of regime: {0}")]
    OutOfRegime(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
