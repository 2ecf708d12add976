//! Diversity-constrained recommendation as a multi-user stochastic bandit.
//!
//! A platform shows each of `n` users one of `k` content categories per round.
//! Three ways of discouraging filter bubbles are supported:
//!
//! * a hard cap, `p[i][j] >= gamma * mean_i' p[i'][j]`, for every user and arm;
//! * a per-round tax `eta * sum max(gamma * mean - p, 0)` on the played
//!   distributions;
//! * the same tax charged once on the empirical play frequencies of a run.
//!
//! The crate computes exact optimal profiles with a built-in simplex solver,
//! runs the matching UCB-style learners, and measures their regret.

pub mod error;
pub mod estimators;
pub mod instances;
pub mod learners;
pub mod lp;
pub mod model;
pub mod optima;
pub mod penalties;
pub mod sim;

pub use error::{Error, Result};
pub use learners::{Algorithm, LearnerState};
pub use model::{
    empirical_profile, validate_policy_profile, ConstraintParams, EmpiricalProfile, Instance, MeanMatrix,
    PolicyProfile, RewardFamily, RunRecord,
};
pub use optima::{Formulation, OptimalPolicyResult};
pub use sim::{batch, evaluate, run, BatchStats, RegretReport, SimConfig};
