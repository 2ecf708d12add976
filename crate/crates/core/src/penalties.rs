//! Polarization-tax accounting: per-round penalties on played distributions,
//! end-of-horizon penalties on empirical frequencies, and the benchmark used
//! for regret when the penalty is charged on realizations.

use crate::error::{Error, Result};
use crate::model::{
    column_means, empirical_profile, ConstraintParams, EmpiricalProfile, MeanMatrix, PolicyProfile,
    RunRecord,
};
use crate::optima::optimal_form2;

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyBreakdown {
    pub per_user: Vec<f64>,
    pub total: f64,
}

/// Which reward stream a [`RewardAccounting`] nets its penalty against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardBasis {
    /// `sum_t sum_i mu_i . pi_i^(t)`
    Pseudo,
    /// Sum of realized rewards.
    Realized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccountingKind {
    Constrained,
    PerRoundPenalty,
    EmpiricalPenalty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardAccounting {
    pub raw_reward: f64,
    /// `None` when the run carried no per-round profiles.
    pub expected_reward: Option<f64>,
    pub penalty_total: f64,
    pub net: f64,
    pub basis: RewardBasis,
    pub kind: AccountingKind,
}

/// `per_user[i] = eta * sum_j max(gamma * mean_j - p[i][j], 0)` over a
/// row-major `n x k` matrix of distributions.
fn penalty_of(p: &[f64], n: usize, k: usize, params: &ConstraintParams) -> PenaltyBreakdown {
    let avg = column_means(p, n, k);
    let per_user: Vec<f64> = p
        .chunks(k)
        .map(|row| {
            let shortfall: f64 = row
                .iter()
                .zip(&avg)
                .map(|(&v, &a)| (params.gamma * a - v).max(0.0))
                .sum();
            params.eta * shortfall
        })
        .collect();
    let total = per_user.iter().sum();
    PenaltyBreakdown { per_user, total }
}

/// Penalty charged for one round of play under `profile`.
pub fn step_penalty(profile: &PolicyProfile, params: &ConstraintParams) -> PenaltyBreakdown {
    penalty_of(profile.as_slice(), profile.n(), profile.k(), params)
}

/// End-of-horizon penalty on observed play frequencies.
pub fn empirical_penalty(p_hat: &EmpiricalProfile, params: &ConstraintParams) -> PenaltyBreakdown {
    penalty_of(p_hat.as_slice(), p_hat.n(), p_hat.k(), params)
}

fn pseudo_reward(run: &RunRecord, means: &MeanMatrix) -> Option<f64> {
    run.played_profiles
        .as_ref()
        .map(|profiles| profiles.iter().map(|p| means.expected_reward(p)).sum())
}

/// Reward minus a penalty charged every round on the played distributions.
pub fn reward2(run: &RunRecord, means: &MeanMatrix, params: &ConstraintParams) -> Result<RewardAccounting> {
    let profiles = run.played_profiles.as_ref().ok_or(Error::MissingProfiles)?;
    let expected: f64 = profiles.iter().map(|p| means.expected_reward(p)).sum();
    let penalty_total: f64 = profiles.iter().map(|p| step_penalty(p, params).total).sum();
    Ok(RewardAccounting {
        raw_reward: run.total_reward(),
        expected_reward: Some(expected),
        penalty_total,
        net: expected - penalty_total,
        basis: RewardBasis::Pseudo,
        kind: AccountingKind::PerRoundPenalty,
    })
}

/// Reward minus a single penalty on the empirical profile of the whole run.
pub fn reward3(run: &RunRecord, means: &MeanMatrix, params: &ConstraintParams) -> Result<RewardAccounting> {
    let p_hat = empirical_profile(run, means.k())?;
    let penalty_total = empirical_penalty(&p_hat, params).total;
    let raw_reward = run.total_reward();
    let expected = pseudo_reward(run, means);
    let (basis, reward) = match expected {
        Some(e) => (RewardBasis::Pseudo, e),
        None => (RewardBasis::Realized, raw_reward),
    };
    Ok(RewardAccounting {
        raw_reward,
        expected_reward: expected,
        penalty_total,
        net: reward - penalty_total,
        basis,
        kind: AccountingKind::EmpiricalPenalty,
    })
}

/// Cumulative reward with no penalty; used for the hard-constraint regret.
pub fn reward1(run: &RunRecord, means: &MeanMatrix) -> RewardAccounting {
    let raw_reward = run.total_reward();
    let expected = pseudo_reward(run, means);
    let (basis, net) = match expected {
        Some(e) => (RewardBasis::Pseudo, e),
        None => (RewardBasis::Realized, raw_reward),
    };
    RewardAccounting {
        raw_reward,
        expected_reward: expected,
        penalty_total: 0.0,
        net,
        basis,
        kind: AccountingKind::Constrained,
    }
}

/// Upper bound on the best achievable end-of-horizon-penalized reward: `T`
/// times the per-round optimum of the per-round-penalty program at `eta / T`.
pub fn form3_benchmark(means: &MeanMatrix, params: &ConstraintParams, horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::EmptyRun);
    }
    let t = horizon as f64;
    let scaled = ConstraintParams::new(params.gamma, params.eta / t, params.delta_naive)?;
    Ok(t * optimal_form2(means, &scaled)?.objective_value)
}

/// `eta * n * k * (gamma + 1) * sqrt(10 ln T / T)`: how far the per-round
/// penalty at `eta / T` can undercut the empirical penalty at `eta`.
pub fn gap_bound(params: &ConstraintParams, n: usize, k: usize, horizon: usize) -> Result<f64> {
    if horizon < 2 {
        return Err(Error::PreconditionViolated("gap bound needs T >= 2".into()));
    }
    let t = horizon as f64;
    Ok(params.eta * (n * k) as f64 * (params.gamma + 1.0) * (10.0 * t.ln() / t).sqrt())
}
