use thiserror::Error;

use crate::lp::LpError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("row {row} sums to {sum}, expected 1")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("entry ({row}, {col}) is negative: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("matrix is not rectangular: row {row} has {found} columns, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("invalid means: {0}")]
    InvalidMeans(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("run has no rounds")]
    EmptyRun,
    #[error("run did not store per-round profiles")]
    MissingProfiles,
    #[error("pull count must be at least 1")]
    ZeroCount,
    #[error("empty sample sequence")]
    EmptySequence,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("robust learner observed different arms in one round")]
    MixedArmsForRobust,
    #[error("learner state mismatch: {0}")]
    StateMismatch(String),
    #[error("horizon too small: n*T = {nt} but the construction needs at least {needed}")]
    HorizonTooSmall { nt: usize, needed: usize },
    #[error("rating references item {0} with no genre entry")]
    UnknownItem(u64),
    #[error("dataset has no ratings")]
    EmptyDataset,
    #[error("invalid rating {rating} for user {user}, item {item}")]
    InvalidRating { user: u64, item: u64, rating: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
    #[error("round {round}: {source}")]
    AtRound { round: usize, source: Box<Error> },
    #[error("seed {seed}: {source}")]
    AtSeed { seed: u64, source: Box<Error> },
}
