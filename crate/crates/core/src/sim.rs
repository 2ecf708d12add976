//! The interaction loop, regret accounting under all three objectives, and
//! seed-replicated batches.
//!
//! Randomness: every user owns two ChaCha streams derived from the run seed,
//! one for arm draws and one for reward draws, so a run is reproducible from
//! `(seed, instance, config)` and adding a user leaves the others' draws intact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::learners::{Algorithm, LearnerState};
use crate::model::{ConstraintParams, Instance, RunRecord};
use crate::optima::{optimal_form1, optimal_form2};
use crate::penalties::{form3_benchmark, reward1, reward2, reward3, step_penalty, RewardAccounting};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub horizon: usize,
    pub seed: u64,
    pub params: ConstraintParams,
    /// Confidence parameter; `None` means `1 / (n T)`.
    pub delta: Option<f64>,
    pub algorithm: Algorithm,
    pub store_profiles: bool,
}

impl SimConfig {
    pub fn new(algorithm: Algorithm, horizon: usize, params: ConstraintParams) -> Self {
        Self { horizon, seed: 0, params, delta: None, algorithm, store_profiles: true }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn delta_for(&self, n: usize) -> f64 {
        self.delta.unwrap_or_else(|| LearnerState::default_delta(n, self.horizon))
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParams("horizon must be at least 1".into()));
        }
        if self.algorithm == Algorithm::RobustUcb && self.params.gamma != 1.0 {
            return Err(Error::InvalidParams(format!(
                "robust-ucb shows every user the same arm and needs gamma = 1, got {}",
                self.params.gamma
            )));
        }
        Ok(())
    }
}

fn user_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `config.horizon` rounds, calling `inspect` with the learner state
/// after every update.
pub fn run_with<F>(instance: &Instance, config: &SimConfig, mut inspect: F) -> Result<RunRecord>
where
    F: FnMut(&LearnerState),
{
    config.validate()?;
    let (n, k) = (instance.n(), instance.k());
    let mut state = LearnerState::new(
        config.algorithm,
        n,
        k,
        config.params,
        config.delta_for(n),
        config.horizon,
    )?;
    let mut arm_rngs: Vec<ChaCha8Rng> = (0..n).map(|i| user_stream(config.seed, 2 * i as u64)).collect();
    let mut reward_rngs: Vec<ChaCha8Rng> = (0..n).map(|i| user_stream(config.seed, 2 * i as u64 + 1)).collect();

    let mut actions = Vec::with_capacity(config.horizon);
    let mut rewards = Vec::with_capacity(config.horizon);
    let mut profiles = config.store_profiles.then(|| Vec::with_capacity(config.horizon));
    for t in 0..config.horizon {
        let at_round = |e: Error| Error::AtRound { round: t + 1, source: Box::new(e) };
        let profile = state.next_profile().map_err(at_round)?;
        let arms: Vec<usize> = (0..n).map(|i| profile.sample_arm(i, arm_rngs[i].gen())).collect();
        let xs: Vec<f64> = arms
            .iter()
            .enumerate()
            .map(|(i, &j)| instance.sample(i, j, &mut reward_rngs[i]))
            .collect();
        state.observe(&arms, &xs).map_err(at_round)?;
        inspect(&state);
        if let Some(p) = profiles.as_mut() {
            p.push(profile);
        }
        actions.push(arms);
        rewards.push(xs);
    }
    let mut record = RunRecord::new(n, k, config.seed, actions, rewards, profiles)?;
    record.exploration_rounds = k.min(config.horizon);
    Ok(record)
}

/// Runs one seeded interaction.
pub fn run(instance: &Instance, config: &SimConfig) -> Result<RunRecord> {
    run_with(instance, config, |_| {})
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baselines {
    /// Per-round value of the capped optimum.
    pub form1: f64,
    /// Per-round value of the taxed optimum.
    pub form2: f64,
    /// Whole-horizon upper bound for the end-of-run tax.
    pub form3_upper: f64,
}

impl Baselines {
    pub fn compute(instance: &Instance, config: &SimConfig) -> Result<Self> {
        Ok(Self {
            form1: optimal_form1(&instance.means, config.params.gamma)?.objective_value,
            form2: optimal_form2(&instance.means, &config.params)?.objective_value,
            form3_upper: form3_benchmark(&instance.means, &config.params, config.horizon)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    /// Cumulative pseudo-regret against the capped optimum.
    pub regret_form1: Vec<f64>,
    /// Same benchmark against realized rewards.
    pub regret_form1_realized: Vec<f64>,
    /// Cumulative regret of reward minus per-round tax.
    pub regret_form2: Vec<f64>,
    /// End-of-horizon regret against an upper bound on the best policy, so
    /// itself an upper bound on the true regret.
    pub regret_form3_upper: f64,
    pub baselines: Baselines,
    pub accounting_form1: RewardAccounting,
    pub accounting_form2: RewardAccounting,
    pub accounting_form3: RewardAccounting,
}

/// Regret trajectories of `run` under all three objectives.
pub fn evaluate(run: &RunRecord, instance: &Instance, config: &SimConfig) -> Result<RegretReport> {
    let baselines = Baselines::compute(instance, config)?;
    evaluate_against(run, instance, config, baselines)
}

fn evaluate_against(
    run: &RunRecord,
    instance: &Instance,
    config: &SimConfig,
    baselines: Baselines,
) -> Result<RegretReport> {
    let profiles = run.played_profiles.as_ref().ok_or(Error::MissingProfiles)?;
    let means = &instance.means;
    let params = &config.params;
    let horizon = run.horizon();

    let mut regret_form1 = Vec::with_capacity(horizon);
    let mut regret_form1_realized = Vec::with_capacity(horizon);
    let mut regret_form2 = Vec::with_capacity(horizon);
    let (mut pseudo, mut realized, mut taxed) = (0.0, 0.0, 0.0);
    for (t, (profile, xs)) in profiles.iter().zip(&run.rewards).enumerate() {
        let reward = means.expected_reward(profile);
        pseudo += reward;
        realized += xs.iter().sum::<f64>();
        taxed += reward - step_penalty(profile, params).total;
        let rounds = (t + 1) as f64;
        regret_form1.push(rounds * baselines.form1 - pseudo);
        regret_form1_realized.push(rounds * baselines.form1 - realized);
        regret_form2.push(rounds * baselines.form2 - taxed);
    }
    let accounting_form3 = reward3(run, means, params)?;
    Ok(RegretReport {
        regret_form1,
        regret_form1_realized,
        regret_form2,
        regret_form3_upper: baselines.form3_upper - accounting_form3.net,
        baselines,
        accounting_form1: reward1(run, means),
        accounting_form2: reward2(run, means, params)?,
        accounting_form3,
    })
}

/// Running mean and sum of squared deviations per position (Welford).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStats {
    pub count: usize,
    pub mean: Vec<f64>,
    m2: Vec<f64>,
}

impl TrajectoryStats {
    pub fn new(len: usize) -> Self {
        Self { count: 0, mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    pub fn push(&mut self, xs: &[f64]) {
        assert_eq!(xs.len(), self.mean.len(), "trajectory length mismatch");
        self.count += 1;
        let c = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(xs) {
            let d = x - *m;
            *m += d / c;
            *s += d * (x - *m);
        }
    }

    /// Pools two disjoint samples.
    pub fn merge(&self, other: &Self) -> Self {
        assert_eq!(self.mean.len(), other.mean.len(), "trajectory length mismatch");
        if self.count == 0 {
            return other.clone();
        }
        if other.count == 0 {
            return self.clone();
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let total = na + nb;
        let mut out = Self::new(self.mean.len());
        out.count = self.count + other.count;
        for idx in 0..self.mean.len() {
            let d = other.mean[idx] - self.mean[idx];
            out.mean[idx] = self.mean[idx] + d * nb / total;
            out.m2[idx] = self.m2[idx] + other.m2[idx] + d * d * na * nb / total;
        }
        out
    }

    /// Sample standard deviation over the mean's square root of count; zero
    /// with fewer than two samples.
    pub fn stderr(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        let c = self.count as f64;
        self.m2.iter().map(|s| (s / (c - 1.0)).sqrt() / c.sqrt()).collect()
    }

    pub fn last_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub seeds: Vec<u64>,
    pub baselines: Baselines,
    pub form1: TrajectoryStats,
    pub form1_realized: TrajectoryStats,
    pub form2: TrajectoryStats,
    pub form3_upper: TrajectoryStats,
}

impl BatchStats {
    fn empty(horizon: usize, baselines: Baselines) -> Self {
        Self {
            seeds: Vec::new(),
            baselines,
            form1: TrajectoryStats::new(horizon),
            form1_realized: TrajectoryStats::new(horizon),
            form2: TrajectoryStats::new(horizon),
            form3_upper: TrajectoryStats::new(1),
        }
    }

    fn push(&mut self, seed: u64, report: &RegretReport) {
        self.seeds.push(seed);
        self.form1.push(&report.regret_form1);
        self.form1_realized.push(&report.regret_form1_realized);
        self.form2.push(&report.regret_form2);
        self.form3_upper.push(&[report.regret_form3_upper]);
    }

    /// Combines batches over disjoint seed sets of the same experiment.
    pub fn merge(&self, other: &Self) -> Self {
        let mut seeds = self.seeds.clone();
        seeds.extend(&other.seeds);
        Self {
            seeds,
            baselines: self.baselines,
            form1: self.form1.merge(&other.form1),
            form1_realized: self.form1_realized.merge(&other.form1_realized),
            form2: self.form2.merge(&other.form2),
            form3_upper: self.form3_upper.merge(&other.form3_upper),
        }
    }
}

/// Runs and evaluates one interaction per seed (in parallel) and aggregates
/// the regret trajectories in seed-list order.
pub fn batch(instance: &Instance, config: &SimConfig, seeds: &[u64]) -> Result<BatchStats> {
    if seeds.is_empty() {
        return Err(Error::InvalidParams("seed list must be non-empty".into()));
    }
    let baselines = Baselines::compute(instance, config)?;
    let reports: Vec<Result<RegretReport>> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = SimConfig { seed, store_profiles: true, ..*config };
            run(instance, &cfg)
                .and_then(|record| evaluate_against(&record, instance, &cfg, baselines))
                .map_err(|e| Error::AtSeed { seed, source: Box::new(e) })
        })
        .collect();
    let mut stats = BatchStats::empty(config.horizon, baselines);
    for (&seed, report) in seeds.iter().zip(reports) {
        stats.push(seed, &report?);
    }
    Ok(stats)
}
