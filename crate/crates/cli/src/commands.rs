use std::collections::BTreeMap;

use polarcap::instances::{
    ingest_ratings, k_arm_gap, lower_bound_instance_2arm, lower_bound_instance_karm, two_arm_gap, IngestResult,
    RatingsDataset,
};
use polarcap::optima::{optimal_form1, optimal_form2, optimal_naive};
use polarcap::penalties::{empirical_penalty, PenaltyBreakdown};
use polarcap::{
    batch, Algorithm, BatchStats, ConstraintParams, EmpiricalProfile, Formulation, Instance, MeanMatrix,
    OptimalPolicyResult, SimConfig,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::inputs::{means_table, LogEntry, MeansFile};
use crate::table::{fmt_num, Table};

fn formulation_name(f: Formulation) -> &'static str {
    match f {
        Formulation::Naive => "naive",
        Formulation::Form1 => "form1",
        Formulation::Form2 => "form2",
    }
}

/// Grids for cap and tax sweeps, with optional per-user group labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub gamma_grid: Vec<f64>,
    pub eta_grid: Vec<f64>,
    pub group_labels: Option<Vec<String>>,
}

impl SweepSpec {
    pub fn new(gamma_grid: Vec<f64>, eta_grid: Vec<f64>, group_labels: Option<Vec<String>>) -> CliResult<Self> {
        check_grid("gamma", &gamma_grid)?;
        check_grid("eta", &eta_grid)?;
        if gamma_grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(CliError::Usage("gamma grid values must lie in [0, 1]".into()));
        }
        if eta_grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(CliError::Usage("eta grid values must be finite and non-negative".into()));
        }
        Ok(Self { gamma_grid, eta_grid, group_labels })
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.gamma_grid.iter().flat_map(|&g| self.eta_grid.iter().map(move |&e| (g, e))).collect()
    }
}

fn check_grid(name: &str, grid: &[f64]) -> CliResult<()> {
    if grid.is_empty() {
        return Err(CliError::Usage(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CliError::Usage(format!("{name} grid must be sorted ascending without repeats")));
    }
    Ok(())
}

/// Labels each user by whichever of `arms` it rates highest (ties go to the
/// earlier name).
pub fn argmax_groups(file: &MeansFile, arms: &[String]) -> CliResult<Vec<String>> {
    let idx = arms
        .iter()
        .map(|a| file.arms.iter().position(|x| x == a).ok_or_else(|| CliError::Usage(format!("unknown arm '{a}'"))))
        .collect::<CliResult<Vec<usize>>>()?;
    if idx.is_empty() {
        return Err(CliError::Usage("grouping needs at least one arm".into()));
    }
    Ok(file
        .means
        .rows()
        .map(|row| {
            let best = idx.iter().enumerate().fold(0, |b, (pos, &j)| if row[j] > row[idx[b]] { pos } else { b });
            arms[best].clone()
        })
        .collect())
}

fn params(gamma: f64, eta: f64, delta_naive: f64) -> CliResult<ConstraintParams> {
    ConstraintParams::new(gamma, eta, delta_naive).map_err(|e| CliError::Usage(e.to_string()))
}

fn solve(means: &MeanMatrix, formulation: Formulation, p: &ConstraintParams) -> CliResult<OptimalPolicyResult> {
    Ok(match formulation {
        Formulation::Naive => optimal_naive(means, p.delta_naive)?,
        Formulation::Form1 => optimal_form1(means, p.gamma)?,
        Formulation::Form2 => optimal_form2(means, p)?,
    })
}

/// The optimal profile as a `user_id,<arms>` table.
pub fn cmd_optimal(
    file: &MeansFile,
    formulation: Formulation,
    gamma: f64,
    eta: f64,
    delta_naive: f64,
) -> CliResult<(OptimalPolicyResult, Table)> {
    let p = params(gamma, eta, delta_naive)?;
    let result = solve(&file.means, formulation, &p)?;
    let rows: Vec<Vec<f64>> = result.profile.rows().map(<[f64]>::to_vec).collect();
    let mut t = means_table(&file.users, &file.arms, &MeanMatrix::new(rows)?);
    t.meta("formulation", formulation_name(formulation));
    match formulation {
        Formulation::Naive => t.meta_num("delta_naive", delta_naive),
        Formulation::Form1 => t.meta_num("gamma", gamma),
        Formulation::Form2 => t.meta_num("gamma", gamma).meta_num("eta", eta),
    };
    t.meta_num("objective", result.objective_value).meta_num("max_row_spread", result.profile.max_row_spread());
    Ok((result, t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub eta: f64,
    pub objective: f64,
    pub max_row_spread: f64,
    /// `group_avgs[g][j]`: mean probability of arm `j` over users of group `g`.
    pub group_avgs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub formulation: Formulation,
    pub groups: Vec<String>,
    pub arms: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Columns: `gamma,eta,objective,max_row_spread`, then `avg_<group>_<arm>`
    /// for each group (sorted) and arm.
    pub fn table(&self) -> Table {
        let mut header: Vec<String> = ["gamma", "eta", "objective", "max_row_spread"].map(String::from).to_vec();
        for g in &self.groups {
            header.extend(self.arms.iter().map(|a| format!("avg_{g}_{a}")));
        }
        let mut t = Table::new(header);
        t.meta("formulation", formulation_name(self.formulation));
        for r in &self.rows {
            let mut cells = vec![fmt_num(r.gamma), fmt_num(r.eta), fmt_num(r.objective), fmt_num(r.max_row_spread)];
            cells.extend(r.group_avgs.iter().flatten().map(|&v| fmt_num(v)));
            t.push(cells);
        }
        t
    }

    pub fn column(&self, group: &str, arm: &str) -> Option<Vec<f64>> {
        let g = self.groups.iter().position(|x| x == group)?;
        let j = self.arms.iter().position(|x| x == arm)?;
        Some(self.rows.iter().map(|r| r.group_avgs[g][j]).collect())
    }
}

/// Solves one optimum per grid point (form1 ignores the eta grid) and
/// reports per-group average probabilities.
pub fn cmd_optimal_sweep(file: &MeansFile, formulation: Formulation, spec: &SweepSpec) -> CliResult<SweepReport> {
    let points: Vec<(f64, f64)> = match formulation {
        Formulation::Naive => return Err(CliError::Usage("sweeps apply to form1 and form2 only".into())),
        Formulation::Form1 => spec.gamma_grid.iter().map(|&g| (g, 0.0)).collect(),
        Formulation::Form2 => spec.points(),
    };
    let labels = spec.group_labels.clone().unwrap_or_else(|| vec!["all".into(); file.users.len()]);
    if labels.len() != file.users.len() {
        return Err(CliError::Data(format!("{} group labels for {} users", labels.len(), file.users.len())));
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        members.entry(l.as_str()).or_default().push(i);
    }
    let rows = points
        .par_iter()
        .map(|&(gamma, eta)| {
            let result = solve(&file.means, formulation, &params(gamma, eta, 0.0)?)?;
            let k = file.means.k();
            let group_avgs = members
                .values()
                .map(|users| {
                    (0..k)
                        .map(|j| users.iter().map(|&i| result.profile.get(i, j)).sum::<f64>() / users.len() as f64)
                        .collect()
                })
                .collect();
            Ok(SweepRow {
                gamma,
                eta,
                objective: result.objective_value,
                max_row_spread: result.profile.max_row_spread(),
                group_avgs,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(SweepReport {
        formulation,
        groups: members.keys().map(|s| s.to_string()).collect(),
        arms: file.arms.clone(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityRow {
    pub gamma: f64,
    pub eta: f64,
    /// Total utility of the taxed optimum over that of the untaxed optimum.
    pub ratio: f64,
    /// Per-user utility lost to the tax.
    pub additive_loss: f64,
}

/// Utility of the taxed optimum relative to the untaxed one at each grid point.
pub fn cmd_utility(file: &MeansFile, spec: &SweepSpec) -> CliResult<Vec<UtilityRow>> {
    let means = &file.means;
    let best = means.expected_reward(&optimal_form2(means, &params(0.0, 0.0, 0.0)?)?.profile);
    if best <= 0.0 {
        return Err(CliError::Data("untaxed optimum has zero utility, ratio undefined".into()));
    }
    let n = means.n() as f64;
    spec.points()
        .par_iter()
        .map(|&(gamma, eta)| {
            // with no tax the program is the same for every gamma
            let value = if eta == 0.0 {
                best
            } else {
                means.expected_reward(&optimal_form2(means, &params(gamma, eta, 0.0)?)?.profile)
            };
            Ok(UtilityRow { gamma, eta, ratio: value / best, additive_loss: (best - value) / n })
        })
        .collect()
}

pub fn utility_table(rows: &[UtilityRow]) -> Table {
    let mut t = Table::new(["gamma", "eta", "ratio", "additive_loss"]);
    for r in rows {
        t.push(vec![fmt_num(r.gamma), fmt_num(r.eta), fmt_num(r.ratio), fmt_num(r.additive_loss)]);
    }
    t
}

/// Where a simulated instance comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    Means(MeansFile),
    /// Two-arm lower-bound instance, one bit per user.
    TwoArm(Vec<bool>),
    /// k-arm lower-bound instance with an optional raised arm.
    KArm { n: usize, k: usize, special: Option<usize> },
}

impl InstanceSource {
    /// Means at `horizon`, with the gap epsilon of lower-bound instances.
    pub fn resolve(&self, horizon: usize) -> CliResult<(MeansFile, Option<f64>)> {
        let named = |means: MeanMatrix| MeansFile {
            users: (0..means.n()).map(|i| i.to_string()).collect(),
            arms: (0..means.k()).map(|j| format!("arm{j}")).collect(),
            means,
        };
        Ok(match self {
            InstanceSource::Means(f) => (f.clone(), None),
            InstanceSource::TwoArm(bits) => {
                (named(lower_bound_instance_2arm(bits, horizon)?), Some(two_arm_gap(horizon)))
            }
            InstanceSource::KArm { n, k, special } => (
                named(lower_bound_instance_karm(*n, *k, horizon, *special)?),
                Some(k_arm_gap(*n, *k, horizon)),
            ),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateRequest {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub gamma: f64,
    pub eta: f64,
    pub delta: Option<f64>,
}

/// Per-round mean and standard error of the regret trajectories over seeds.
pub fn cmd_simulate(source: &InstanceSource, req: &SimulateRequest, seeds: &[u64]) -> CliResult<(BatchStats, Table)> {
    if req.algorithm == Algorithm::RobustUcb && req.gamma != 1.0 {
        return Err(CliError::Usage(format!("robust-ucb requires --gamma 1, got {}", req.gamma)));
    }
    if req.horizon == 0 {
        return Err(CliError::Usage("horizon must be at least 1".into()));
    }
    if let Some(d) = req.delta {
        if !(d > 0.0 && d < 1.0) {
            return Err(CliError::Usage(format!("delta = {d} must lie in (0, 1)")));
        }
    }
    let (file, epsilon) = source.resolve(req.horizon)?;
    let instance = Instance::bernoulli(file.means.clone());
    let mut config = SimConfig::new(req.algorithm, req.horizon, params(req.gamma, req.eta, 0.0)?);
    config.delta = req.delta;
    let stats = batch(&instance, &config, seeds)?;

    let mut t = Table::new([
        "t",
        "regret1_mean",
        "regret1_stderr",
        "regret1_realized_mean",
        "regret1_realized_stderr",
        "regret2_mean",
        "regret2_stderr",
    ]);
    t.meta("algorithm", req.algorithm.name())
        .meta("n", instance.n())
        .meta("k", instance.k())
        .meta("horizon", req.horizon)
        .meta("seeds", seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";"))
        .meta_num("gamma", req.gamma)
        .meta_num("eta", req.eta)
        .meta_num("delta", config.delta_for(instance.n()));
    if let Some(eps) = epsilon {
        t.meta_num("epsilon", eps);
    }
    t.meta_num("baseline_form1", stats.baselines.form1)
        .meta_num("baseline_form2", stats.baselines.form2)
        .meta_num("baseline_form3_upper", stats.baselines.form3_upper)
        .meta_num("regret3_upper_mean", stats.form3_upper.mean[0])
        .meta_num("regret3_upper_stderr", stats.form3_upper.stderr()[0])
        .meta("regret1_basis", "pseudo")
        .meta("regret1_realized_basis", "realized")
        .meta("regret2_basis", "pseudo");
    let (e1, e1r, e2) = (stats.form1.stderr(), stats.form1_realized.stderr(), stats.form2.stderr());
    for r in 0..req.horizon {
        t.push(vec![
            (r + 1).to_string(),
            fmt_num(stats.form1.mean[r]),
            fmt_num(e1[r]),
            fmt_num(stats.form1_realized.mean[r]),
            fmt_num(e1r[r]),
            fmt_num(stats.form2.mean[r]),
            fmt_num(e2[r]),
        ]);
    }
    Ok((stats, t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub p_hat: EmpiricalProfile,
    pub penalty: PenaltyBreakdown,
    pub params: ConstraintParams,
}

impl AuditReport {
    /// Columns `user,p_arm0..,penalty`; the total goes in the metadata.
    pub fn table(&self) -> Table {
        let k = self.p_hat.k();
        let header = std::iter::once("user".to_string())
            .chain((0..k).map(|j| format!("p_arm{j}")))
            .chain(std::iter::once("penalty".to_string()));
        let mut t = Table::new(header);
        t.meta("horizon", self.p_hat.horizon())
            .meta_num("gamma", self.params.gamma)
            .meta_num("eta", self.params.eta)
            .meta_num("total_penalty", self.penalty.total);
        for i in 0..self.p_hat.n() {
            let mut row = vec![i.to_string()];
            row.extend(self.p_hat.row(i).iter().map(|&v| fmt_num(v)));
            row.push(fmt_num(self.penalty.per_user[i]));
            t.push(row);
        }
        t
    }
}

/// Rebuilds the empirical profile from an exposure log and charges the
/// end-of-horizon tax on it.
pub fn cmd_audit(log: &[LogEntry], n: usize, k: usize, horizon: usize, gamma: f64, eta: f64) -> CliResult<AuditReport> {
    if n == 0 || k < 2 || horizon == 0 {
        return Err(CliError::Usage("audit needs n >= 1, k >= 2 and T >= 1".into()));
    }
    let params = params(gamma, eta, 0.0)?;
    let mut seen = vec![false; horizon * n];
    let mut counts = vec![0u64; n * k];
    for e in log {
        if e.t >= horizon || e.user >= n || e.arm >= k {
            return Err(CliError::Data(format!(
                "log entry t={}, user={}, arm={} outside T={horizon}, n={n}, k={k}",
                e.t, e.user, e.arm
            )));
        }
        let cell = &mut seen[e.t * n + e.user];
        if *cell {
            return Err(CliError::DuplicateCell { t: e.t, user: e.user });
        }
        *cell = true;
        counts[e.user * k + e.arm] += 1;
    }
    if let Some(pos) = seen.iter().position(|&s| !s) {
        return Err(CliError::MissingCell { t: pos / n, user: pos % n });
    }
    let p_hat = EmpiricalProfile::from_counts(n, k, horizon, &counts)?;
    let penalty = empirical_penalty(&p_hat, &params);
    Ok(AuditReport { p_hat, penalty, params })
}

/// Which users to keep when ingesting ratings.
#[derive(Debug, Clone, PartialEq)]
pub enum UserSelection {
    All,
    Ids(Vec<u64>),
    Sample { count: usize, seed: u64 },
}

/// Per-user genre preferences as a means table with alphabetical genre columns.
pub fn cmd_ingest(dataset: &RatingsDataset, selection: &UserSelection) -> CliResult<(IngestResult, Table)> {
    let all = dataset.users();
    let chosen: Vec<u64> = match selection {
        UserSelection::All => all,
        UserSelection::Ids(ids) => {
            if let Some(u) = ids.iter().find(|u| all.binary_search(u).is_err()) {
                return Err(CliError::Data(format!("user {u} has no ratings")));
            }
            ids.clone()
        }
        UserSelection::Sample { count, seed } => {
            if *count > all.len() {
                return Err(CliError::Data(format!("cannot sample {count} users from {}", all.len())));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            all.choose_multiple(&mut rng, *count).copied().collect()
        }
    };
    let result = ingest_ratings(&dataset.restrict_users(&chosen))?;
    let users: Vec<String> = result.users.iter().map(u64::to_string).collect();
    let mut t = means_table(&users, &result.genres, &result.means);
    let unrated: Vec<String> =
        result.unrated.iter().map(|&(i, j)| format!("{}:{}", result.users[i], result.genres[j])).collect();
    t.meta("users", result.users.len()).meta("unrated_cells", unrated.join(";"));
    Ok((result, t))
}

/// The means of a lower-bound instance, with its gap in the metadata.
pub fn cmd_lowerbound(source: &InstanceSource, horizon: usize) -> CliResult<Table> {
    let (file, epsilon) = source.resolve(horizon)?;
    let mut t = file.table();
    t.meta("horizon", horizon);
    if let Some(eps) = epsilon {
        t.meta_num("epsilon", eps);
    }
    Ok(t)
}
