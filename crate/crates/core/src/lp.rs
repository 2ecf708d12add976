//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Every optimal-policy program in this crate is small enough (a few thousand
//! columns at most) that a dense tableau is adequate. The pivot rule is fixed,
//! so a given program always yields the same vertex.

use thiserror::Error;

/// Primal feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Smallest magnitude accepted as a pivot element.
pub const PIVOT_TOL: f64 = 1e-10;
const OPTIMALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("program is infeasible")]
    Infeasible,
    #[error("program is unbounded")]
    Unbounded,
    #[error("numerical failure after {iterations} pivots: {reason}")]
    NumericalFailure { iterations: usize, reason: String },
    #[error("malformed program: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize objective . x` subject to linear constraints and per-variable
/// bounds (default `[0, inf)`).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn maximize(objective: Vec<f64>) -> Self {
        let bounds = vec![(0.0, f64::INFINITY); objective.len()];
        Self { objective, constraints: Vec::new(), bounds }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    /// Adds a constraint given as `(variable, coefficient)` pairs; repeated
    /// variables accumulate.
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) -> &mut Self {
        let mut coeffs = vec![0.0; self.num_vars()];
        for &(v, c) in terms {
            coeffs[v] += c;
        }
        self.add_constraint(coeffs, relation, rhs)
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) -> &mut Self {
        self.bounds[var] = (lo, hi);
        self
    }

    fn validate(&self) -> Result<(), LpError> {
        let nv = self.num_vars();
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("objective has non-finite coefficients".into()));
        }
        for (idx, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != nv {
                return Err(LpError::Malformed(format!(
                    "constraint {idx} has width {}, objective has {nv}",
                    c.coeffs.len()
                )));
            }
            if c.coeffs.iter().any(|a| !a.is_finite()) || !c.rhs.is_finite() {
                return Err(LpError::Malformed(format!("constraint {idx} has non-finite data")));
            }
        }
        for (v, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || hi.is_nan() || lo > hi {
                return Err(LpError::Malformed(format!("variable {v} has bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs = dot(&c.coeffs, x);
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (&xi, &(lo, hi)) in x.iter().zip(&self.bounds) {
            worst = worst.max(lo - xi).max(xi - hi);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub status: LpStatus,
    pub iterations: usize,
}

impl LpSolution {
    /// Converts a non-optimal status into the matching error.
    pub fn into_optimal(self) -> Result<Self, LpError> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::Infeasible => Err(LpError::Infeasible),
            LpStatus::Unbounded => Err(LpError::Unbounded),
        }
    }

    fn non_optimal(status: LpStatus, iterations: usize) -> Self {
        Self { x: Vec::new(), objective_value: f64::NAN, status, iterations }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense simplex tableau. Column `width - 1` holds the right-hand side.
struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    max_iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    /// Reduced-cost row for objective `c` (maximize) over the current basis.
    fn price(&mut self, c: &[f64]) {
        let w = self.width;
        let mut cost = vec![0.0; w];
        for (j, cj) in c.iter().enumerate() {
            cost[j] = -cj;
        }
        for r in 0..self.rows {
            let cb = c.get(self.basis[r]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                let row = &self.data[r * w..(r + 1) * w];
                for (dst, a) in cost.iter_mut().zip(row) {
                    *dst += cb * a;
                }
            }
        }
        self.cost = cost;
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = 1.0 / self.data[pr * w + pc];
        for v in &mut self.data[pr * w..(pr + 1) * w] {
            *v *= inv;
        }
        self.data[pr * w + pc] = 1.0;
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[r * w..(r + 1) * w];
            for (dst, p) in row.iter_mut().zip(&pivot_row) {
                *dst -= f * p;
            }
            row[pc] = 0.0;
            if row[w - 1] < 0.0 && row[w - 1] > -FEASIBILITY_TOL * 1e-3 {
                row[w - 1] = 0.0;
            }
        }
        let f = self.cost[pc];
        if f != 0.0 {
            for (dst, p) in self.cost.iter_mut().zip(&pivot_row) {
                *dst -= f * p;
            }
            self.cost[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Runs primal simplex with Bland's rule over columns `< allowed`.
    fn optimize(&mut self, allowed: usize) -> Result<Outcome, LpError> {
        loop {
            let Some(entering) = (0..allowed).find(|&j| self.cost[j] < -OPTIMALITY_TOL) else {
                return Ok(Outcome::Optimal);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, entering);
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                leaving = match leaving {
                    None => Some((r, ratio)),
                    Some((br, best)) => {
                        if ratio < best - 1e-12 * best.abs().max(1.0)
                            || (ratio <= best + 1e-12 * best.abs().max(1.0)
                                && self.basis[r] < self.basis[br])
                        {
                            Some((r, ratio))
                        } else {
                            Some((br, best))
                        }
                    }
                };
            }
            let Some((pr, _)) = leaving else {
                return Ok(Outcome::Unbounded);
            };
            self.pivot(pr, entering);
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(LpError::NumericalFailure {
                    iterations: self.iterations,
                    reason: "iteration cap reached".into(),
                });
            }
        }
    }
}

/// Solves `lp`, returning a vertex-optimal point or an infeasible/unbounded status.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let nv = lp.num_vars();
    let lo: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();

    // Shift to y = x - lo >= 0 and move finite upper bounds into rows.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = lp
        .constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.relation, c.rhs - dot(&c.coeffs, &lo)))
        .collect();
    for (v, &(l, h)) in lp.bounds.iter().enumerate() {
        if h.is_finite() {
            let mut coeffs = vec![0.0; nv];
            coeffs[v] = 1.0;
            rows.push((coeffs, Relation::Le, h - l));
        }
    }
    // Non-negative right-hand sides; `>= 0` rows flip to `<= 0` so they get a slack.
    for (coeffs, rel, rhs) in rows.iter_mut() {
        if *rhs < 0.0 || (*rhs == 0.0 && *rel == Relation::Ge) {
            coeffs.iter_mut().for_each(|a| *a = -*a);
            *rhs = -*rhs;
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let first_art = nv + n_slack;
    let ncols = first_art + n_art;
    let width = ncols + 1;

    let mut data = vec![0.0; m * width];
    let mut basis = vec![0; m];
    let (mut slack, mut art) = (nv, first_art);
    for (r, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        let row = &mut data[r * width..(r + 1) * width];
        row[..nv].copy_from_slice(coeffs);
        row[ncols] = *rhs;
        match rel {
            Relation::Le => {
                row[slack] = 1.0;
                basis[r] = slack;
                slack += 1;
            }
            Relation::Ge => {
                row[slack] = -1.0;
                slack += 1;
                row[art] = 1.0;
                basis[r] = art;
                art += 1;
            }
            Relation::Eq => {
                row[art] = 1.0;
                basis[r] = art;
                art += 1;
            }
        }
    }

    let dim = m + ncols;
    let mut tab = Tableau {
        rows: m,
        width,
        data,
        cost: Vec::new(),
        basis,
        iterations: 0,
        max_iterations: 10 * dim * dim,
    };

    if n_art > 0 {
        let mut phase1 = vec![0.0; ncols];
        phase1[first_art..].iter_mut().for_each(|c| *c = -1.0);
        tab.price(&phase1);
        match tab.optimize(ncols)? {
            Outcome::Optimal => {}
            Outcome::Unbounded => {
                return Err(LpError::NumericalFailure {
                    iterations: tab.iterations,
                    reason: "phase one reported an unbounded ray".into(),
                })
            }
        }
        let infeasibility: f64 =
            (0..m).filter(|&r| tab.basis[r] >= first_art).map(|r| tab.rhs(r)).sum();
        let scale = rows.iter().map(|r| r.2.abs()).fold(1.0, f64::max);
        if infeasibility > FEASIBILITY_TOL * scale {
            return Ok(LpSolution::non_optimal(LpStatus::Infeasible, tab.iterations));
        }
        // Drive zero-level artificials out of the basis where possible; rows
        // with no usable pivot are redundant and keep their artificial at zero.
        for r in 0..m {
            if tab.basis[r] < first_art {
                continue;
            }
            if let Some(c) = (0..first_art).find(|&c| tab.at(r, c).abs() > PIVOT_TOL * 1e3) {
                tab.pivot(r, c);
                tab.iterations += 1;
            }
        }
    }

    let mut phase2 = vec![0.0; ncols];
    phase2[..nv].copy_from_slice(&lp.objective);
    tab.price(&phase2);
    if let Outcome::Unbounded = tab.optimize(first_art)? {
        return Ok(LpSolution::non_optimal(LpStatus::Unbounded, tab.iterations));
    }

    let mut x = lo;
    for r in 0..m {
        let b = tab.basis[r];
        if b < nv {
            x[b] += tab.rhs(r);
        }
    }
    for (xi, &(l, h)) in x.iter_mut().zip(&lp.bounds) {
        *xi = xi.clamp(l, h);
    }
    let residual = lp.max_violation(&x);
    let scale = lp
        .constraints
        .iter()
        .map(|c| c.rhs.abs())
        .fold(1.0, f64::max);
    if residual > FEASIBILITY_TOL * scale {
        return Err(LpError::NumericalFailure {
            iterations: tab.iterations,
            reason: format!("solution violates constraints by {residual:e}"),
        });
    }
    Ok(LpSolution {
        objective_value: dot(&lp.objective, &x),
        x,
        status: LpStatus::Optimal,
        iterations: tab.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_upper_bound() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        let sol = solve(&lp).unwrap().into_optimal().unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn facet_optimum_has_unique_value() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Le, 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Ge, 2.0);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        assert_eq!(sol.into_optimal().unwrap_err(), LpError::Infeasible);
    }

    #[test]
    fn open_direction_is_unbounded() {
        let mut lp = LinearProgram::maximize(vec![1.0, -1.0]);
        lp.add_constraint(vec![1.0, -1.0], Relation::Ge, 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_shifted_bounds() {
        // max 2x + y, x + y = 3, x in [0.5, 2], y in [1, 5]
        let mut lp = LinearProgram::maximize(vec![2.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 3.0);
        lp.set_bounds(0, 0.5, 2.0).set_bounds(1, 1.0, 5.0);
        let sol = solve(&lp).unwrap().into_optimal().unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-12);
        assert!((sol.x[1] - 1.0).abs() < 1e-12);
        assert!((sol.objective_value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let mut lp = LinearProgram::maximize(vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.add_constraint(vec![2.0, 2.0], Relation::Eq, 2.0);
        let sol = solve(&lp).unwrap().into_optimal().unwrap();
        assert!((sol.objective_value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn width_mismatch_is_malformed() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(solve(&lp), Err(LpError::Malformed(_))));
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.set_bounds(0, 2.0, 1.0);
        assert!(matches!(solve(&lp), Err(LpError::Malformed(_))));
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example, which cycles under the textbook largest-coefficient rule.
        let mut lp = LinearProgram::maximize(vec![0.75, -150.0, 0.02, -6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let sol = solve(&lp).unwrap().into_optimal().unwrap();
        assert!((sol.objective_value - 0.05).abs() < 1e-9);
    }
}
