//! Shared domain types: mean matrices, policy profiles, instances, run records
//! and constraint parameters.

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance used when validating stochastic rows at construction.
pub const CONSTRUCTION_TOL: f64 = 1e-9;

/// Expected rewards `mu[i][j]` for user `i` and arm `j`, all in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanMatrix {
    n: usize,
    k: usize,
    mu: Vec<f64>,
}

impl MeanMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let (n, k, mu) = flatten(rows)?;
        if n < 1 {
            return Err(Error::InvalidMeans("at least one user is required".into()));
        }
        if k < 2 {
            return Err(Error::InvalidMeans(format!("at least two arms are required, got {k}")));
        }
        for (idx, &v) in mu.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidMeans(format!(
                    "entry ({}, {}) = {v} is outside [0, 1]",
                    idx / k,
                    idx % k
                )));
            }
        }
        Ok(Self { n, k, mu })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mu[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.mu[i * self.k..(i + 1) * self.k]
    }

    /// Row-major view of all entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.mu
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.mu.chunks(self.k)
    }

    /// Keeps only the listed arm columns, in the given order.
    pub fn select_arms(&self, arms: &[usize]) -> Result<Self> {
        if let Some(&bad) = arms.iter().find(|&&j| j >= self.k) {
            return Err(Error::InvalidMeans(format!("arm {bad} out of range")));
        }
        let rows = self
            .rows()
            .map(|r| arms.iter().map(|&j| r[j]).collect())
            .collect();
        Self::new(rows)
    }

    /// Total expected reward `sum_i mu_i . p_i` of a profile.
    pub fn expected_reward(&self, profile: &PolicyProfile) -> f64 {
        debug_assert_eq!((self.n, self.k), (profile.n(), profile.k()));
        self.mu.iter().zip(profile.as_slice()).map(|(m, p)| m * p).sum()
    }
}

/// One distribution over arms per user.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyProfile {
    n: usize,
    k: usize,
    p: Vec<f64>,
}

impl PolicyProfile {
    /// Validates a raw matrix as a profile. Entries in `[-1e-9, 0)` are clamped
    /// to zero and rows within `1e-9` of one are renormalized.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let (n, k, p) = flatten(rows)?;
        Self::from_flat(n, k, p, CONSTRUCTION_TOL)
    }

    pub(crate) fn from_flat(n: usize, k: usize, mut p: Vec<f64>, tol: f64) -> Result<Self> {
        debug_assert_eq!(p.len(), n * k);
        for (row, chunk) in p.chunks_mut(k.max(1)).enumerate() {
            for (col, v) in chunk.iter_mut().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NegativeEntry { row, col, value: *v });
                }
                if *v < -tol {
                    return Err(Error::NegativeEntry { row, col, value: *v });
                }
                *v = v.clamp(0.0, 1.0);
            }
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::NonStochasticRow { row, sum });
            }
            chunk.iter_mut().for_each(|v| *v /= sum);
        }
        Ok(Self { n, k, p })
    }

    /// Every user plays `arm` with probability one.
    pub fn pure(n: usize, k: usize, arm: usize) -> Self {
        assert!(arm < k, "arm {arm} out of range for k = {k}");
        let mut p = vec![0.0; n * k];
        for i in 0..n {
            p[i * k + arm] = 1.0;
        }
        Self { n, k, p }
    }

    /// Every user plays the same distribution `row`.
    pub fn shared(n: usize, row: &[f64]) -> Result<Self> {
        let k = row.len();
        let p = row.iter().copied().cycle().take(n * k).collect();
        Self::from_flat(n, k, p, CONSTRUCTION_TOL)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.p[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.p.chunks(self.k)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    /// Population-average distribution (column means).
    pub fn column_means(&self) -> Vec<f64> {
        column_means(&self.p, self.n, self.k)
    }

    /// Largest slack violation of `p[i][j] >= gamma * mean_j`; non-positive
    /// when the profile satisfies the diversity constraint.
    pub fn gamma_violation(&self, gamma: f64) -> f64 {
        let avg = self.column_means();
        self.p
            .iter()
            .enumerate()
            .map(|(idx, &v)| gamma * avg[idx % self.k] - v)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_{i,j} |p[i][j] - mean_j|`.
    pub fn max_row_spread(&self) -> f64 {
        let avg = self.column_means();
        self.p
            .iter()
            .enumerate()
            .map(|(idx, &v)| (v - avg[idx % self.k]).abs())
            .fold(0.0, f64::max)
    }

    /// Draws an arm for user `i` by inverting the row's CDF at `u ∈ [0, 1)`.
    pub fn sample_arm(&self, i: usize, u: f64) -> usize {
        let row = self.row(i);
        let mut acc = 0.0;
        for (j, &v) in row.iter().enumerate() {
            acc += v;
            if u < acc {
                return j;
            }
        }
        // u landed in the rounding gap above the final cumulative sum
        row.iter().rposition(|&v| v > 0.0).unwrap_or(self.k - 1)
    }
}

pub(crate) fn column_means(p: &[f64], n: usize, k: usize) -> Vec<f64> {
    let mut avg = vec![0.0; k];
    for row in p.chunks(k) {
        for (a, v) in avg.iter_mut().zip(row) {
            *a += v;
        }
    }
    avg.iter_mut().for_each(|a| *a /= n as f64);
    avg
}

/// Reward-distribution family sampled by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardFamily {
    #[default]
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub means: MeanMatrix,
    pub family: RewardFamily,
}

impl Instance {
    pub fn bernoulli(means: MeanMatrix) -> Self {
        Self { means, family: RewardFamily::Bernoulli }
    }

    pub fn n(&self) -> usize {
        self.means.n()
    }

    pub fn k(&self) -> usize {
        self.means.k()
    }

    /// Draws one reward for user `i` pulling arm `j`.
    pub fn sample<R: Rng + ?Sized>(&self, i: usize, j: usize, rng: &mut R) -> f64 {
        match self.family {
            RewardFamily::Bernoulli => {
                let mu = self.means.get(i, j);
                if rng.gen::<f64>() < mu {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Diversity constraint and penalty parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintParams {
    pub gamma: f64,
    pub eta: f64,
    pub delta_naive: f64,
}

impl ConstraintParams {
    pub fn new(gamma: f64, eta: f64, delta_naive: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParams(format!("gamma = {gamma} is outside [0, 1]")));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParams(format!("eta = {eta} must be a finite value >= 0")));
        }
        if !(delta_naive >= 0.0 && delta_naive.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "delta_naive = {delta_naive} must be a finite value >= 0"
            )));
        }
        Ok(Self { gamma, eta, delta_naive })
    }

    pub fn gamma(gamma: f64) -> Result<Self> {
        Self::new(gamma, 0.0, 0.0)
    }

    pub fn with_eta(self, eta: f64) -> Result<Self> {
        Self::new(self.gamma, eta, self.delta_naive)
    }
}

/// Full action and reward history of one simulated interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    /// `actions[t][i]` is the arm shown to user `i` in round `t` (0-based).
    pub actions: Vec<Vec<usize>>,
    pub rewards: Vec<Vec<f64>>,
    pub played_profiles: Option<Vec<PolicyProfile>>,
    /// Number of leading rounds that followed the fixed exploration schedule.
    pub exploration_rounds: usize,
}

impl RunRecord {
    pub fn new(
        n: usize,
        k: usize,
        seed: u64,
        actions: Vec<Vec<usize>>,
        rewards: Vec<Vec<f64>>,
        played_profiles: Option<Vec<PolicyProfile>>,
    ) -> Result<Self> {
        if actions.len() != rewards.len() {
            return Err(Error::PreconditionViolated(format!(
                "{} action rows but {} reward rows",
                actions.len(),
                rewards.len()
            )));
        }
        for (t, (a, r)) in actions.iter().zip(&rewards).enumerate() {
            if a.len() != n || r.len() != n {
                return Err(Error::Ragged { row: t, expected: n, found: a.len().min(r.len()) });
            }
            if let Some(&bad) = a.iter().find(|&&j| j >= k) {
                return Err(Error::PreconditionViolated(format!("round {t}: arm {bad} out of range")));
            }
            if let Some(&bad) = r.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::PreconditionViolated(format!("round {t}: reward {bad} outside [0, 1]")));
            }
        }
        if let Some(profiles) = &played_profiles {
            if profiles.len() != actions.len() {
                return Err(Error::PreconditionViolated("one profile per round is required".into()));
            }
        }
        Ok(Self { n, k, seed, actions, rewards, played_profiles, exploration_rounds: 0 })
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().flatten().sum()
    }
}

/// Observed play frequencies `p_hat[i][j]` over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalProfile {
    n: usize,
    k: usize,
    horizon: usize,
    p_hat: Vec<f64>,
}

impl EmpiricalProfile {
    /// Builds frequencies from raw counts; every user must have `horizon` plays.
    pub fn from_counts(n: usize, k: usize, horizon: usize, counts: &[u64]) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::EmptyRun);
        }
        debug_assert_eq!(counts.len(), n * k);
        for (row, chunk) in counts.chunks(k).enumerate() {
            let total: u64 = chunk.iter().sum();
            if total != horizon as u64 {
                return Err(Error::NonStochasticRow { row, sum: total as f64 / horizon as f64 });
            }
        }
        let p_hat = counts.iter().map(|&c| c as f64 / horizon as f64).collect();
        Ok(Self { n, k, horizon, p_hat })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p_hat[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.p_hat[i * self.k..(i + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p_hat
    }
}

/// Validates a raw matrix as a policy profile.
pub fn validate_policy_profile(p: Vec<Vec<f64>>) -> Result<PolicyProfile> {
    PolicyProfile::new(p)
}

/// Per-user play frequencies of a run: `p_hat[i][j] = #{t : a_t,i = j} / T`.
pub fn empirical_profile(run: &RunRecord, k: usize) -> Result<EmpiricalProfile> {
    let horizon = run.horizon();
    if horizon == 0 {
        return Err(Error::EmptyRun);
    }
    let n = run.n;
    let mut counts = vec![0u64; n * k];
    for actions in &run.actions {
        for (i, &j) in actions.iter().enumerate() {
            if j >= k {
                return Err(Error::PreconditionViolated(format!("arm {j} out of range for k = {k}")));
            }
            counts[i * k + j] += 1;
        }
    }
    EmpiricalProfile::from_counts(n, k, horizon, &counts)
}

fn flatten(rows: Vec<Vec<f64>>) -> Result<(usize, usize, Vec<f64>)> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(n * k);
    for (row, r) in rows.into_iter().enumerate() {
        if r.len() != k {
            return Err(Error::Ragged { row, expected: k, found: r.len() });
        }
        flat.extend(r);
    }
    Ok((n, k, flat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_uniform_profiles_validate() {
        let p = validate_policy_profile(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(p.row(1), &[0.0, 1.0]);
        let p = validate_policy_profile(vec![vec![0.5, 0.5]]).unwrap();
        assert_eq!(p.column_means(), vec![0.5, 0.5]);
    }

    #[test]
    fn short_row_is_rejected() {
        let err = validate_policy_profile(vec![vec![0.7, 0.2]]).unwrap_err();
        assert!(matches!(err, Error::NonStochasticRow { row: 0, .. }));
    }

    #[test]
    fn negative_entry_is_rejected_but_tiny_negatives_clamp() {
        let err = validate_policy_profile(vec![vec![1.1, -0.1]]).unwrap_err();
        assert!(matches!(err, Error::NegativeEntry { row: 0, col: 1, .. }));
        let p = validate_policy_profile(vec![vec![1.0 + 5e-10, -5e-10]]).unwrap();
        assert_eq!(p.get(0, 1), 0.0);
        assert!((p.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let err = validate_policy_profile(vec![vec![1.0, 0.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::Ragged { row: 1, .. }));
    }

    #[test]
    fn mean_matrix_bounds() {
        assert!(MeanMatrix::new(vec![vec![0.5, 1.2]]).is_err());
        assert!(MeanMatrix::new(vec![vec![0.5]]).is_err());
        assert!(MeanMatrix::new(vec![]).is_err());
        let m = MeanMatrix::new(vec![vec![0.2, 0.8], vec![1.0, 0.0]]).unwrap();
        assert_eq!((m.n(), m.k()), (2, 2));
        assert_eq!(m.get(1, 0), 1.0);
    }

    #[test]
    fn params_validation() {
        assert!(ConstraintParams::new(1.5, 0.0, 0.0).is_err());
        assert!(ConstraintParams::new(0.5, -1.0, 0.0).is_err());
        assert!(ConstraintParams::new(0.5, 1.0, -0.1).is_err());
        assert!(ConstraintParams::new(1.0, 0.0, 0.0).is_ok());
    }

    fn run_from_user0(arms: &[usize], n: usize) -> RunRecord {
        let actions: Vec<Vec<usize>> = arms.iter().map(|&a| vec![a; n]).collect();
        let rewards = vec![vec![0.0; n]; arms.len()];
        RunRecord::new(n, 3, 0, actions, rewards, None).unwrap()
    }

    #[test]
    fn empirical_profile_counts() {
        let run = run_from_user0(&[0, 0, 1, 0], 1);
        let p = empirical_profile(&run, 2).unwrap();
        assert_eq!(p.row(0), &[0.75, 0.25]);

        let run = run_from_user0(&[0, 0, 0], 2);
        let p = empirical_profile(&run, 4).unwrap();
        assert_eq!(p.row(1), &[1.0, 0.0, 0.0, 0.0]);

        let run = run_from_user0(&[0, 1, 2], 1);
        let p = empirical_profile(&run, 3).unwrap();
        for &v in p.row(0) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_run_is_an_error() {
        let run = RunRecord::new(1, 2, 0, vec![], vec![], None).unwrap();
        assert_eq!(empirical_profile(&run, 2).unwrap_err(), Error::EmptyRun);
    }

    #[test]
    fn run_record_rejects_bad_arm() {
        assert!(RunRecord::new(1, 2, 0, vec![vec![2]], vec![vec![0.0]], None).is_err());
    }

    #[test]
    fn sample_arm_follows_cdf() {
        let p = PolicyProfile::new(vec![vec![0.25, 0.0, 0.75]]).unwrap();
        assert_eq!(p.sample_arm(0, 0.0), 0);
        assert_eq!(p.sample_arm(0, 0.2499), 0);
        assert_eq!(p.sample_arm(0, 0.25), 2);
        assert_eq!(p.sample_arm(0, 0.999_999_999), 2);
    }

    #[test]
    fn bernoulli_sample_means_concentrate() {
        let means = MeanMatrix::new(vec![
            vec![0.1, 0.5, 0.9],
            vec![0.0, 1.0, 0.33],
            vec![0.75, 0.25, 0.6],
        ])
        .unwrap();
        let instance = Instance::bernoulli(means.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples = 100_000;
        let tol = 4.0 * (0.25 / samples as f64).sqrt();
        let mut within = 0;
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..samples).map(|_| instance.sample(i, j, &mut rng)).sum();
                let mean = s / samples as f64;
                if (mean - means.get(i, j)).abs() <= tol {
                    within += 1;
                }
            }
        }
        assert!(within as f64 >= 0.99 * 9.0);
    }
}
