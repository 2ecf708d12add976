//! Step-wise learners. Each round the caller asks for a profile, plays it,
//! and feeds the realized arms and rewards back through [`LearnerState::observe`].
//!
//! All three learners spend rounds `1..=k` on a fixed schedule in which every
//! user is shown arm `t - 1`; those rounds ignore the diversity cap.

use crate::error::{Error, Result};
use crate::estimators::{median_of_means, robust_radius, ucb_radius, ArmStats};
use crate::model::{ConstraintParams, PolicyProfile};
use crate::optima::{solve_form1_scores, solve_form2_scores};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Per-user UCB estimates fed to the capped program.
    NUcb,
    /// Median-of-means UCB on aggregated rewards; one shared arm per round.
    RobustUcb,
    /// Per-user UCB estimates fed to the taxed program.
    PenaltyUcb,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::NUcb => "n-ucb",
            Algorithm::RobustUcb => "robust-ucb",
            Algorithm::PenaltyUcb => "penalty-ucb",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n-ucb" | "nucb" => Ok(Algorithm::NUcb),
            "robust-ucb" | "robustucb" => Ok(Algorithm::RobustUcb),
            "penalty-ucb" | "penaltyucb" => Ok(Algorithm::PenaltyUcb),
            other => Err(Error::Parse(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LearnerStats {
    /// `n * k` cells, row-major by user.
    PerUser(Vec<ArmStats>),
    /// One cell per arm, plus every aggregated sample in arrival order.
    Aggregated { arms: Vec<ArmStats>, samples: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub algorithm: Algorithm,
    /// Completed rounds.
    pub round: usize,
    pub n: usize,
    pub k: usize,
    pub stats: LearnerStats,
    /// Optimistic estimates: `n * k` for per-user learners, `k` for Robust-UCB.
    /// Unpulled cells hold `+inf`.
    pub optimistic: Vec<f64>,
    pub params: ConstraintParams,
    pub delta: f64,
    pub horizon: usize,
}

impl LearnerState {
    pub fn new(
        algorithm: Algorithm,
        n: usize,
        k: usize,
        params: ConstraintParams,
        delta: f64,
        horizon: usize,
    ) -> Result<Self> {
        if n == 0 || k < 2 {
            return Err(Error::InvalidParams(format!("need n >= 1 and k >= 2, got n = {n}, k = {k}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParams(format!("delta = {delta} must lie in (0, 1)")));
        }
        if horizon == 0 {
            return Err(Error::InvalidParams("horizon must be at least 1".into()));
        }
        let (stats, cells) = match algorithm {
            Algorithm::RobustUcb => (
                LearnerStats::Aggregated { arms: vec![ArmStats::default(); k], samples: vec![Vec::new(); k] },
                k,
            ),
            Algorithm::NUcb | Algorithm::PenaltyUcb => (LearnerStats::PerUser(vec![ArmStats::default(); n * k]), n * k),
        };
        Ok(Self {
            algorithm,
            round: 0,
            n,
            k,
            stats,
            optimistic: vec![f64::INFINITY; cells],
            params,
            delta,
            horizon,
        })
    }

    /// `1 / (n T)`.
    pub fn default_delta(n: usize, horizon: usize) -> f64 {
        1.0 / (n as f64 * horizon as f64)
    }

    /// 1-based index of the round about to be played.
    pub fn next_round(&self) -> usize {
        self.round + 1
    }

    pub fn in_exploration(&self) -> bool {
        self.next_round() <= self.k
    }

    /// Profile for the next round, dispatching on the algorithm.
    pub fn next_profile(&self) -> Result<PolicyProfile> {
        match self.algorithm {
            Algorithm::NUcb => self.nucb_step(),
            Algorithm::PenaltyUcb => self.penalty_ucb_step(),
            Algorithm::RobustUcb => PolicyProfile::shared(self.n, &self.robust_ucb_step()?),
        }
    }

    fn exploration_profile(&self) -> PolicyProfile {
        PolicyProfile::pure(self.n, self.k, self.round)
    }

    fn expect(&self, algorithm: Algorithm) -> Result<()> {
        if self.algorithm == algorithm {
            Ok(())
        } else {
            Err(Error::StateMismatch(format!(
                "{} step called on a {} state",
                algorithm.name(),
                self.algorithm.name()
            )))
        }
    }

    /// Capped-program argmax over the current optimistic estimates.
    pub fn nucb_step(&self) -> Result<PolicyProfile> {
        self.expect(Algorithm::NUcb)?;
        if self.in_exploration() {
            return Ok(self.exploration_profile());
        }
        let (profile, _) = solve_form1_scores(&self.optimistic, self.n, self.k, self.params.gamma)?;
        Ok(profile)
    }

    /// Taxed-program argmax over the current optimistic estimates.
    pub fn penalty_ucb_step(&self) -> Result<PolicyProfile> {
        self.expect(Algorithm::PenaltyUcb)?;
        if self.in_exploration() {
            return Ok(self.exploration_profile());
        }
        let (profile, _) = solve_form2_scores(&self.optimistic, self.n, self.k, &self.params)?;
        Ok(profile)
    }

    /// Shared distribution (a pure arm) for every user; ties go to the lowest index.
    pub fn robust_ucb_step(&self) -> Result<Vec<f64>> {
        self.expect(Algorithm::RobustUcb)?;
        let arm = if self.in_exploration() {
            self.round
        } else {
            let mut best = 0;
            for j in 1..self.k {
                if self.optimistic[j] > self.optimistic[best] {
                    best = j;
                }
            }
            best
        };
        let mut row = vec![0.0; self.k];
        row[arm] = 1.0;
        Ok(row)
    }

    /// Records one round of play and refreshes the estimates of pulled arms.
    pub fn observe(&mut self, actions: &[usize], rewards: &[f64]) -> Result<()> {
        if actions.len() != self.n || rewards.len() != self.n {
            return Err(Error::StateMismatch(format!(
                "expected {} actions and rewards, got {} and {}",
                self.n,
                actions.len(),
                rewards.len()
            )));
        }
        if let Some(&bad) = actions.iter().find(|&&j| j >= self.k) {
            return Err(Error::StateMismatch(format!("arm {bad} out of range")));
        }
        let (n, k, horizon, delta) = (self.n, self.k, self.horizon, self.delta);
        match &mut self.stats {
            LearnerStats::PerUser(cells) => {
                for (i, (&j, &r)) in actions.iter().zip(rewards).enumerate() {
                    let cell = &mut cells[i * k + j];
                    cell.record(r);
                    self.optimistic[i * k + j] = cell.mean() + ucb_radius(cell.count, horizon, n, k, delta)?;
                }
            }
            LearnerStats::Aggregated { arms, samples } => {
                let j = actions[0];
                if actions.iter().any(|&a| a != j) {
                    return Err(Error::MixedArmsForRobust);
                }
                let total: f64 = rewards.iter().sum();
                arms[j].record(total);
                samples[j].push(total);
                self.optimistic[j] =
                    median_of_means(&samples[j], delta)? + robust_radius(arms[j].count, horizon, n, k, delta)?;
            }
        }
        self.round += 1;
        Ok(())
    }

    /// Pull count of user `i` on arm `j` (or of arm `j` for Robust-UCB).
    pub fn count(&self, i: usize, j: usize) -> u64 {
        match &self.stats {
            LearnerStats::PerUser(cells) => cells[i * self.k + j].count,
            LearnerStats::Aggregated { arms, .. } => arms[j].count,
        }
    }

    /// Empirical mean behind the optimistic estimate of cell `(i, j)`.
    pub fn empirical_mean(&self, i: usize, j: usize) -> f64 {
        match &self.stats {
            LearnerStats::PerUser(cells) => cells[i * self.k + j].mean(),
            LearnerStats::Aggregated { arms, .. } => arms[j].mean(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::polarized_instance;
    use crate::optima::{closed_form_form1, optimal_form2};

    fn params(gamma: f64, eta: f64) -> ConstraintParams {
        ConstraintParams::new(gamma, eta, 0.0).unwrap()
    }

    fn state(algorithm: Algorithm, n: usize, k: usize, p: ConstraintParams) -> LearnerState {
        LearnerState::new(algorithm, n, k, p, 0.05, 100).unwrap()
    }

    /// Past exploration with the given optimistic estimates.
    fn primed(algorithm: Algorithm, n: usize, k: usize, p: ConstraintParams, estimates: Vec<f64>) -> LearnerState {
        let mut s = state(algorithm, n, k, p);
        s.round = k;
        s.optimistic = estimates;
        s
    }

    #[test]
    fn first_round_plays_arm_zero() {
        let s = state(Algorithm::NUcb, 4, 3, params(0.5, 0.0));
        let p = s.nucb_step().unwrap();
        assert_eq!(p, PolicyProfile::pure(4, 3, 0));
    }

    #[test]
    fn exploration_schedule_covers_every_arm() {
        for alg in [Algorithm::NUcb, Algorithm::PenaltyUcb, Algorithm::RobustUcb] {
            let mut s = state(alg, 3, 4, params(1.0, 0.5));
            for t in 0..4 {
                let p = s.next_profile().unwrap();
                assert_eq!(p, PolicyProfile::pure(3, 4, t));
                s.observe(&[t; 3], &[0.5; 3]).unwrap();
            }
            for i in 0..3 {
                for j in 0..4 {
                    assert!(s.count(i, j) >= 1);
                }
            }
            assert!(s.optimistic.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn zero_gamma_picks_each_users_best_arm() {
        let est = vec![0.3, 0.9, 0.1, 0.5, 0.2, 0.4];
        let s = primed(Algorithm::NUcb, 2, 3, params(0.0, 0.0), est.clone());
        let p = s.nucb_step().unwrap();
        let value: f64 = est.iter().zip(p.as_slice()).map(|(a, b)| a * b).sum();
        assert!((value - 1.4).abs() < 1e-9);
    }

    #[test]
    fn polarized_estimates_reproduce_closed_form_value() {
        let means = polarized_instance(4, 3).unwrap();
        let s = primed(Algorithm::NUcb, 4, 2, params(0.5, 0.0), means.as_slice().to_vec());
        let p = s.nucb_step().unwrap();
        let closed = closed_form_form1(4, 3, 0.5).unwrap();
        assert!((means.expected_reward(&p) - means.expected_reward(&closed)).abs() < 1e-6);
        assert!(p.gamma_violation(0.5) <= 1e-8);
    }

    #[test]
    fn penalty_step_without_tax_is_greedy() {
        let est = vec![0.3, 0.9, 0.1, 0.5, 0.2, 0.4];
        let s = primed(Algorithm::PenaltyUcb, 2, 3, params(0.8, 0.0), est.clone());
        let p = s.penalty_ucb_step().unwrap();
        let value: f64 = est.iter().zip(p.as_slice()).map(|(a, b)| a * b).sum();
        assert!((value - 1.4).abs() < 1e-9);
    }

    #[test]
    fn penalty_step_with_huge_tax_shares_best_column() {
        let est = vec![1.2, 0.3, 0.1, 0.9, 0.5, 0.6];
        let s = primed(Algorithm::PenaltyUcb, 3, 2, params(1.0, 1e6), est.clone());
        let p = s.penalty_ucb_step().unwrap();
        assert!(p.max_row_spread() < 1e-8);
        let value: f64 = est.iter().zip(p.as_slice()).map(|(a, b)| a * b).sum();
        // column sums (1.8, 1.0)
        assert!((value - 1.8).abs() < 1e-6);
    }

    #[test]
    fn penalty_step_matches_taxed_optimum_on_true_means() {
        let means = polarized_instance(4, 3).unwrap();
        let prm = params(0.5, 0.3);
        let s = primed(Algorithm::PenaltyUcb, 4, 2, prm, means.as_slice().to_vec());
        let p = s.penalty_ucb_step().unwrap();
        let value = means.expected_reward(&p) - crate::penalties::step_penalty(&p, &prm).total;
        let best = optimal_form2(&means, &prm).unwrap().objective_value;
        assert!((value - best).abs() < 1e-6);
    }

    #[test]
    fn robust_step_prefers_dominant_arm_and_breaks_ties_low() {
        let n = 3;
        let mut s = state(Algorithm::RobustUcb, n, 2, params(1.0, 0.0));
        for _ in 0..5 {
            s.observe(&[0; 3], &[1.0; 3]).unwrap();
            s.observe(&[1; 3], &[0.0; 3]).unwrap();
        }
        assert_eq!(s.robust_ucb_step().unwrap(), vec![1.0, 0.0]);

        let mut s = state(Algorithm::RobustUcb, n, 3, params(1.0, 0.0));
        for _ in 0..4 {
            for j in 0..3 {
                s.observe(&[j; 3], &[0.5; 3]).unwrap();
            }
        }
        assert_eq!(s.optimistic[0], s.optimistic[2]);
        assert_eq!(s.robust_ucb_step().unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn robust_rejects_mixed_arms() {
        let mut s = state(Algorithm::RobustUcb, 2, 2, params(1.0, 0.0));
        assert_eq!(s.observe(&[0, 1], &[1.0, 0.0]).unwrap_err(), Error::MixedArmsForRobust);
    }

    #[test]
    fn observe_updates_only_pulled_cells() {
        let mut s = state(Algorithm::NUcb, 2, 3, params(0.2, 0.0));
        s.observe(&[1, 2], &[0.7, 0.0]).unwrap();
        let radius = ucb_radius(1, 100, 2, 3, 0.05).unwrap();
        assert!((s.optimistic[1] - (0.7 + radius)).abs() < 1e-12);
        assert_eq!(s.count(0, 0), 0);
        assert_eq!(s.count(1, 1), 0);
        assert!(s.optimistic[0].is_infinite());
        s.observe(&[1, 2], &[0.0, 1.0]).unwrap();
        assert!((s.empirical_mean(0, 1) - 0.35).abs() < 1e-12);
        assert_eq!(s.empirical_mean(1, 2), 0.5);
        assert_eq!(s.round, 2);
    }

    #[test]
    fn wrong_step_for_state_is_rejected() {
        let s = state(Algorithm::NUcb, 2, 2, params(0.2, 0.0));
        assert!(matches!(s.penalty_ucb_step(), Err(Error::StateMismatch(_))));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for alg in [Algorithm::NUcb, Algorithm::RobustUcb, Algorithm::PenaltyUcb] {
            assert_eq!(alg.name().parse::<Algorithm>().unwrap(), alg);
        }
        assert!("thompson".parse::<Algorithm>().is_err());
    }
}
