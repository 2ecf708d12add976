//! Exact optimal policy profiles for the diversity-constrained and
//! diversity-taxed objectives, plus the closed forms known for the two-arm
//! polarized population.
//!
//! Decision variables are laid out row-major: `p[i][j]` is column `i * k + j`.
//! The tax program appends one shortfall variable `s[i][j]` per cell, with
//! `s[i][j] >= gamma * mean_j - p[i][j]` and `s >= 0`, which makes the
//! `max{., 0}` penalty linear.

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, Relation};
use crate::model::{ConstraintParams, MeanMatrix, PolicyProfile};
use crate::penalties::step_penalty;

/// Tolerance accepted on LP row sums before renormalizing.
const SOLVER_ROW_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// l-infinity distance from the population average, radius `delta`.
    Naive,
    /// Hard cap: `p[i][j] >= gamma * mean_j`.
    Form1,
    /// Per-round tax on cap violations.
    Form2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPolicyResult {
    pub profile: PolicyProfile,
    /// Per-round expected reward, net of the tax for [`Formulation::Form2`].
    pub objective_value: f64,
    pub formulation: Formulation,
}

fn base_program(objective: Vec<f64>, n: usize, k: usize) -> LinearProgram {
    let mut program = LinearProgram::maximize(objective);
    for i in 0..n {
        let terms: Vec<(usize, f64)> = (0..k).map(|j| (i * k + j, 1.0)).collect();
        program.add_sparse(&terms, Relation::Eq, 1.0);
    }
    program
}

/// Terms of `(gamma / n) * sum_i' p[i'][j] - p[i][j]`.
fn cap_terms(n: usize, k: usize, gamma: f64, i: usize, j: usize) -> Vec<(usize, f64)> {
    let share = gamma / n as f64;
    let mut terms: Vec<(usize, f64)> = (0..n).map(|u| (u * k + j, share)).collect();
    terms.push((i * k + j, -1.0));
    terms
}

pub(crate) fn form1_program(mu: &[f64], n: usize, k: usize, gamma: f64) -> LinearProgram {
    let mut program = base_program(mu.to_vec(), n, k);
    for i in 0..n {
        for j in 0..k {
            program.add_sparse(&cap_terms(n, k, gamma, i, j), Relation::Le, 0.0);
        }
    }
    program
}

pub(crate) fn form2_program(mu: &[f64], n: usize, k: usize, gamma: f64, eta: f64) -> LinearProgram {
    let cells = n * k;
    let mut objective = mu.to_vec();
    objective.resize(2 * cells, -eta);
    let mut program = base_program(objective, n, k);
    for i in 0..n {
        for j in 0..k {
            let mut terms = cap_terms(n, k, gamma, i, j);
            terms.push((cells + i * k + j, -1.0));
            program.add_sparse(&terms, Relation::Le, 0.0);
        }
    }
    program
}

fn naive_program(mu: &[f64], n: usize, k: usize, delta: f64) -> LinearProgram {
    let mut program = base_program(mu.to_vec(), n, k);
    for i in 0..n {
        for j in 0..k {
            // p[i][j] - mean_j, written with the opposite sign of the cap terms
            let terms: Vec<(usize, f64)> =
                cap_terms(n, k, 1.0, i, j).into_iter().map(|(v, c)| (v, -c)).collect();
            program.add_sparse(&terms, Relation::Le, delta);
            program.add_sparse(&terms, Relation::Ge, -delta);
        }
    }
    program
}

fn solve_profile(program: &LinearProgram, n: usize, k: usize) -> Result<PolicyProfile> {
    let solution = lp::solve(program)?.into_optimal()?;
    PolicyProfile::from_flat(n, k, solution.x[..n * k].to_vec(), SOLVER_ROW_TOL)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Best capped profile for an arbitrary (possibly optimistic) score matrix.
pub(crate) fn solve_form1_scores(
    scores: &[f64],
    n: usize,
    k: usize,
    gamma: f64,
) -> Result<(PolicyProfile, f64)> {
    let profile = solve_profile(&form1_program(scores, n, k, gamma), n, k)?;
    let value = dot(scores, profile.as_slice());
    Ok((profile, value))
}

/// Best taxed profile for an arbitrary score matrix; value is score minus tax.
pub(crate) fn solve_form2_scores(
    scores: &[f64],
    n: usize,
    k: usize,
    params: &ConstraintParams,
) -> Result<(PolicyProfile, f64)> {
    let profile = solve_profile(&form2_program(scores, n, k, params.gamma, params.eta), n, k)?;
    let value = dot(scores, profile.as_slice()) - step_penalty(&profile, params).total;
    Ok((profile, value))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("gamma = {gamma} is outside [0, 1]")))
    }
}

/// Maximizes total expected reward with every row within `delta` (l-infinity)
/// of the population average.
pub fn optimal_naive(means: &MeanMatrix, delta: f64) -> Result<OptimalPolicyResult> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParams(format!("delta = {delta} must be finite and >= 0")));
    }
    let (n, k) = (means.n(), means.k());
    let profile = solve_profile(&naive_program(means.as_slice(), n, k, delta), n, k)?;
    Ok(OptimalPolicyResult {
        objective_value: means.expected_reward(&profile),
        profile,
        formulation: Formulation::Naive,
    })
}

/// Maximizes total expected reward subject to `p[i][j] >= gamma * mean_j`.
pub fn optimal_form1(means: &MeanMatrix, gamma: f64) -> Result<OptimalPolicyResult> {
    check_gamma(gamma)?;
    let (profile, objective_value) = solve_form1_scores(means.as_slice(), means.n(), means.k(), gamma)?;
    Ok(OptimalPolicyResult { profile, objective_value, formulation: Formulation::Form1 })
}

/// Maximizes total expected reward minus the per-round tax.
pub fn optimal_form2(means: &MeanMatrix, params: &ConstraintParams) -> Result<OptimalPolicyResult> {
    check_gamma(params.gamma)?;
    if !(params.eta >= 0.0) {
        return Err(Error::InvalidParams(format!("eta = {} must be >= 0", params.eta)));
    }
    let (profile, objective_value) = solve_form2_scores(means.as_slice(), means.n(), means.k(), params)?;
    Ok(OptimalPolicyResult { profile, objective_value, formulation: Formulation::Form2 })
}

fn two_group_profile(n: usize, majority: usize, major_row: [f64; 2], minor_row: [f64; 2]) -> Result<PolicyProfile> {
    let rows = (0..n)
        .map(|i| if i < majority { major_row.to_vec() } else { minor_row.to_vec() })
        .collect();
    PolicyProfile::new(rows)
}

/// Optimum of the l-infinity program on the polarized two-arm population:
/// the first `majority` users keep `(1, 0)` and the rest get
/// `(1 - n delta / |N|, n delta / |N|)`.
pub fn closed_form_naive(n: usize, majority: usize, delta: f64) -> Result<PolicyProfile> {
    if n == 0 || majority > n || 2 * majority < n {
        return Err(Error::PreconditionViolated(format!(
            "need n/2 <= |N| <= n, got |N| = {majority}, n = {n}"
        )));
    }
    let limit = majority as f64 / n as f64;
    if !(delta >= 0.0 && delta < limit) {
        return Err(Error::PreconditionViolated(format!("need 0 <= delta < |N|/n = {limit}, got {delta}")));
    }
    let shift = n as f64 * delta / majority as f64;
    two_group_profile(n, majority, [1.0, 0.0], [1.0 - shift, shift])
}

/// Optimum of the capped program on the polarized two-arm population for
/// `gamma <= 1/2`.
pub fn closed_form_form1(n: usize, majority: usize, gamma: f64) -> Result<PolicyProfile> {
    if n == 0 || majority > n {
        return Err(Error::PreconditionViolated(format!("need |N| <= n, got |N| = {majority}, n = {n}")));
    }
    if !(0.0..=0.5).contains(&gamma) {
        return Err(Error::PreconditionViolated(format!("need 0 <= gamma <= 1/2, got {gamma}")));
    }
    let nf = n as f64;
    let minority_share = gamma * (n - majority) as f64 / nf;
    let majority_share = gamma * majority as f64 / nf;
    two_group_profile(
        n,
        majority,
        [1.0 - minority_share, minority_share],
        [majority_share, 1.0 - majority_share],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::polarized_instance;

    const TOL: f64 = 1e-6;

    fn polarized() -> MeanMatrix {
        polarized_instance(4, 3).unwrap()
    }

    fn assert_rows(p: &PolicyProfile, expected: &[[f64; 2]]) {
        for (i, e) in expected.iter().enumerate() {
            for j in 0..2 {
                assert!((p.get(i, j) - e[j]).abs() < 1e-9, "row {i}: {:?} vs {e:?}", p.row(i));
            }
        }
    }

    #[test]
    fn naive_minority_carries_the_burden() {
        let res = optimal_naive(&polarized(), 0.25).unwrap();
        assert!((res.objective_value - (3.0 + 1.0 / 3.0)).abs() < TOL);
        let closed = closed_form_naive(4, 3, 0.25).unwrap();
        assert_rows(&closed, &[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [2.0 / 3.0, 1.0 / 3.0]]);
        assert!((polarized().expected_reward(&closed) - res.objective_value).abs() < TOL);
        assert_eq!(res.formulation, Formulation::Naive);
    }

    #[test]
    fn naive_wide_radius_allows_full_personalization() {
        let res = optimal_naive(&polarized(), 0.8).unwrap();
        assert!((res.objective_value - 4.0).abs() < TOL);
    }

    #[test]
    fn naive_zero_radius_forces_shared_row() {
        let means = MeanMatrix::new(vec![vec![0.2, 0.9, 0.4], vec![0.8, 0.1, 0.5], vec![0.3, 0.3, 0.6]]).unwrap();
        let res = optimal_naive(&means, 0.0).unwrap();
        for i in 1..3 {
            for j in 0..3 {
                assert!((res.profile.get(i, j) - res.profile.get(0, j)).abs() < 1e-8);
            }
        }
        // best shared pure arm: column sums (1.3, 1.3, 1.5)
        assert!((res.objective_value - 1.5).abs() < TOL);
    }

    #[test]
    fn form1_zero_gamma_is_full_personalization() {
        let means = MeanMatrix::new(vec![vec![0.2, 0.9, 0.4], vec![0.8, 0.1, 0.5]]).unwrap();
        let res = optimal_form1(&means, 0.0).unwrap();
        assert!((res.objective_value - 1.7).abs() < TOL);
    }

    #[test]
    fn form1_matches_closed_form_on_polarized_population() {
        let res = optimal_form1(&polarized(), 0.5).unwrap();
        let closed = closed_form_form1(4, 3, 0.5).unwrap();
        assert_rows(&closed, &[[0.875, 0.125], [0.875, 0.125], [0.875, 0.125], [0.375, 0.625]]);
        assert!((res.objective_value - polarized().expected_reward(&closed)).abs() < TOL);
        assert!(res.profile.gamma_violation(0.5) <= 1e-8);
    }

    #[test]
    fn form1_full_gamma_shares_best_arm() {
        let res = optimal_form1(&polarized(), 1.0).unwrap();
        assert!((res.objective_value - 3.0).abs() < TOL);
        assert!(res.profile.max_row_spread() < 1e-8);
    }

    #[test]
    fn form2_zero_eta_matches_unconstrained() {
        let means = polarized();
        let p = ConstraintParams::new(0.7, 0.0, 0.0).unwrap();
        let taxed = optimal_form2(&means, &p).unwrap();
        let free = optimal_form1(&means, 0.0).unwrap();
        assert!((taxed.objective_value - free.objective_value).abs() < TOL);
    }

    #[test]
    fn form2_large_eta_matches_cap() {
        let means = polarized();
        let p = ConstraintParams::new(0.5, 1e6, 0.0).unwrap();
        let taxed = optimal_form2(&means, &p).unwrap();
        let capped = optimal_form1(&means, 0.5).unwrap();
        assert!((taxed.objective_value - capped.objective_value).abs() < TOL);
    }

    #[test]
    fn form2_two_users_against_grid() {
        let means = MeanMatrix::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let p = ConstraintParams::new(1.0, 0.1, 0.0).unwrap();
        let res = optimal_form2(&means, &p).unwrap();
        let mut best = f64::NEG_INFINITY;
        for a in 0..=100 {
            for b in 0..=100 {
                let (x, y) = (a as f64 / 100.0, b as f64 / 100.0);
                let prof = PolicyProfile::new(vec![vec![x, 1.0 - x], vec![y, 1.0 - y]]).unwrap();
                best = best.max(means.expected_reward(&prof) - step_penalty(&prof, &p).total);
            }
        }
        assert!(res.objective_value >= best - 0.02);
        assert!(res.objective_value <= best + 1e-9);
        // full personalization pays 0.1 * (0.5 + 0.5) on 2 reward
        assert!((res.objective_value - 1.9).abs() < TOL);
    }

    #[test]
    fn closed_form_naive_examples_and_preconditions() {
        let p = closed_form_naive(2, 1, 0.25).unwrap();
        assert_rows(&p, &[[1.0, 0.0], [0.5, 0.5]]);
        let p = closed_form_naive(4, 3, 0.0).unwrap();
        assert_rows(&p, &[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]);
        assert!(closed_form_naive(4, 3, 0.75).is_err());
        assert!(closed_form_naive(4, 1, 0.1).is_err());
    }

    #[test]
    fn closed_form_form1_examples_and_preconditions() {
        assert_rows(&closed_form_form1(4, 3, 0.0).unwrap(), &[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_rows(&closed_form_form1(2, 1, 0.5).unwrap(), &[[0.75, 0.25], [0.25, 0.75]]);
        assert!(closed_form_form1(2, 1, 0.6).is_err());
        assert!(closed_form_form1(2, 3, 0.1).is_err());
    }

    #[test]
    fn invalid_gamma_is_rejected() {
        assert!(optimal_form1(&polarized(), 1.5).is_err());
        assert!(optimal_naive(&polarized(), -0.1).is_err());
    }
}
