//! Dense two-phase tableau simplex.
//!
//! Variables carry explicit `[lower, upper]` bounds. Finite upper bounds are
//! handled inside the ratio test (bounded-variable simplex) rather than as
//! extra rows, so a program with a thousand `0 <= f <= 1` columns and a
//! handful of equality rows keeps a tableau with a handful of rows.
//!
//! Bland's rule picks both the entering and the leaving variable, which makes
//! the method cycle-free and fully deterministic. Every "optimal" answer is
//! re-checked against the original constraints before it is returned.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-9;
const RATIO_TIE_EPS: f64 = 1e-12;
const FEAS_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("variable {index} has empty bound interval [{lower}, {upper}]")]
    InvalidBounds {
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("simplex produced an infeasible point: {0}")]
    Internal(String),
}

impl LpError {
    pub fn is_internal(&self) -> bool {
        matches!(self, LpError::Internal(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const NON_NEGATIVE: Bounds = Bounds {
        lower: 0.0,
        upper: f64::INFINITY,
    };
    pub const UNIT: Bounds = Bounds {
        lower: 0.0,
        upper: 1.0,
    };
    pub const FREE: Bounds = Bounds {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };
}

/// A linear program over dense rows. New variables default to `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraint_matrix: Vec<Vec<f64>>,
    pub row_kinds: Vec<Relation>,
    pub rhs: Vec<f64>,
    pub variable_bounds: Vec<Bounds>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            sense,
            objective,
            constraint_matrix: Vec::new(),
            row_kinds: Vec::new(),
            rhs: Vec::new(),
            variable_bounds: vec![Bounds::NON_NEGATIVE; n],
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<Bounds>) -> Self {
        self.variable_bounds = bounds;
        self
    }

    pub fn add_constraint(&mut self, coefficients: Vec<f64>, kind: Relation, rhs: f64) {
        self.constraint_matrix.push(coefficients);
        self.row_kinds.push(kind);
        self.rhs.push(rhs);
    }

    pub fn num_variables(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraint_matrix.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        let m = self.constraint_matrix.len();
        if self.row_kinds.len() != m || self.rhs.len() != m {
            return Err(LpError::DimensionMismatch(format!(
                "{m} constraint rows but {} relations and {} right-hand sides",
                self.row_kinds.len(),
                self.rhs.len()
            )));
        }
        if self.variable_bounds.len() != n {
            return Err(LpError::DimensionMismatch(format!(
                "{n} variables but {} bounds",
                self.variable_bounds.len()
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective".into()));
        }
        for (i, row) in self.constraint_matrix.iter().enumerate() {
            if row.len() != n {
                return Err(LpError::DimensionMismatch(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|a| !a.is_finite()) || !self.rhs[i].is_finite() {
                return Err(LpError::NonFinite(format!("constraint row {i}")));
            }
        }
        for (index, b) in self.variable_bounds.iter().enumerate() {
            if b.lower.is_nan()
                || b.upper.is_nan()
                || b.lower > b.upper
                || b.lower == f64::INFINITY
                || b.upper == f64::NEG_INFINITY
            {
                return Err(LpError::InvalidBounds {
                    index,
                    lower: b.lower,
                    upper: b.upper,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration cap reached before a verdict.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty unless `status` is `Optimal`.
    pub primal_values: Vec<f64>,
    /// NaN unless `status` is `Optimal`.
    pub objective_value: f64,
    pub iterations: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        LpSolution {
            status,
            primal_values: Vec::new(),
            objective_value: f64::NAN,
            iterations,
        }
    }
}

/// How an original variable maps onto non-negative internal columns:
/// `x = offset + sign * y[col]`, or `x = y[col] - y[col + 1]` when free.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    Shifted { col: usize, offset: f64, sign: f64 },
    Split { col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Basic,
    AtLower,
    AtUpper,
}

enum Outcome {
    Optimal,
    Unbounded,
    Stalled,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major `rows x cols`, always equal to B^-1 A.
    t: Vec<f64>,
    /// Current values of the basic variables.
    beta: Vec<f64>,
    /// Right-hand side after normalization (all non-negative).
    b: Vec<f64>,
    upper: Vec<f64>,
    basis: Vec<usize>,
    slot: Vec<Slot>,
    /// Column that held the identity for each row in the starting basis;
    /// those columns of `t` form B^-1.
    unit_col: Vec<usize>,
    iterations: usize,
    max_iterations: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j]
    }

    fn value(&self, j: usize) -> f64 {
        match self.slot[j] {
            Slot::AtLower => 0.0,
            Slot::AtUpper => self.upper[j],
            Slot::Basic => {
                let r = self
                    .basis
                    .iter()
                    .position(|&k| k == j)
                    .expect("basic column");
                self.beta[r]
            }
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb != 0.0 {
                let row = &self.t[i * self.cols..(i + 1) * self.cols];
                for (dj, &a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    /// Rebuilds basic values from B^-1 and the nonbasic variables at their
    /// upper bound, discarding accumulated update error.
    fn refresh_beta(&mut self) {
        let at_upper: Vec<usize> = (0..self.cols)
            .filter(|&j| self.slot[j] == Slot::AtUpper)
            .collect();
        for i in 0..self.rows {
            let mut v: f64 = (0..self.rows)
                .map(|k| self.at(i, self.unit_col[k]) * self.b[k])
                .sum();
            for &j in &at_upper {
                v -= self.at(i, j) * self.upper[j];
            }
            self.beta[i] = v;
        }
    }

    fn pivot(&mut self, r: usize, j: usize, d: &mut [f64]) {
        let cols = self.cols;
        let p = self.at(r, j);
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for a in row.iter_mut() {
                *a /= p;
            }
            row[j] = 1.0;
        }
        let pivot_row: Vec<f64> = self.t[r * cols..(r + 1) * cols].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.at(i, j);
            if f != 0.0 {
                let row = &mut self.t[i * cols..(i + 1) * cols];
                for (a, &pr) in row.iter_mut().zip(&pivot_row) {
                    *a -= f * pr;
                }
                row[j] = 0.0;
            }
        }
        let f = d[j];
        if f != 0.0 {
            for (dj, &pr) in d.iter_mut().zip(&pivot_row) {
                *dj -= f * pr;
            }
            d[j] = 0.0;
        }
    }

    /// Maximizes `cost . y` from the current basis.
    fn run(&mut self, cost: &[f64]) -> Outcome {
        let mut d = self.reduced_costs(cost);
        loop {
            if self.iterations >= self.max_iterations {
                return Outcome::Stalled;
            }
            // Bland: lowest-index improving column.
            let entering = (0..self.cols).find(|&j| match self.slot[j] {
                Slot::Basic => false,
                _ if self.upper[j] <= 0.0 => false,
                Slot::AtLower => d[j] > COST_EPS,
                Slot::AtUpper => d[j] < -COST_EPS,
            });
            let Some(j) = entering else {
                return Outcome::Optimal;
            };
            self.iterations += 1;
            let dir = if self.slot[j] == Slot::AtLower {
                1.0
            } else {
                -1.0
            };

            // Ratio test. `None` row means the entering variable flips bounds.
            let mut step = self.upper[j];
            let mut leave: Option<(usize, Slot)> = None;
            for i in 0..self.rows {
                let rate = -self.at(i, j) * dir;
                let bi = self.basis[i];
                let (limit, hits) = if rate < -PIVOT_EPS {
                    ((self.beta[i] / -rate).max(0.0), Slot::AtLower)
                } else if rate > PIVOT_EPS && self.upper[bi].is_finite() {
                    (
                        ((self.upper[bi] - self.beta[i]) / rate).max(0.0),
                        Slot::AtUpper,
                    )
                } else {
                    continue;
                };
                let better = if limit < step - RATIO_TIE_EPS {
                    true
                } else if limit <= step + RATIO_TIE_EPS {
                    match leave {
                        Some((r, _)) => bi < self.basis[r],
                        None => false,
                    }
                } else {
                    false
                };
                if better {
                    step = limit;
                    leave = Some((i, hits));
                }
            }
            if step == f64::INFINITY {
                return Outcome::Unbounded;
            }

            for i in 0..self.rows {
                self.beta[i] -= self.at(i, j) * dir * step;
            }
            match leave {
                None => {
                    self.slot[j] = if dir > 0.0 {
                        Slot::AtUpper
                    } else {
                        Slot::AtLower
                    };
                }
                Some((r, hits)) => {
                    let entering_value = if dir > 0.0 {
                        step
                    } else {
                        self.upper[j] - step
                    };
                    let k = self.basis[r];
                    self.slot[k] = hits;
                    self.pivot(r, j, &mut d);
                    self.basis[r] = j;
                    self.slot[j] = Slot::Basic;
                    self.beta[r] = entering_value;
                }
            }
        }
    }
}

/// Solves `lp`. Infeasible, unbounded and stalled programs are reported
/// through [`LpSolution::status`]; malformed input and failed post-hoc
/// verification are errors.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with_iteration_cap(lp, None)
}

/// As [`solve`], with an explicit pivot budget in place of the default
/// `50 * (rows + columns)` of the internal tableau.
pub fn solve_with_iteration_cap(
    lp: &LinearProgram,
    cap: Option<usize>,
) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_variables();
    let m = lp.num_constraints();

    // Map original variables onto columns y >= 0 with optional upper bound.
    let mut maps = Vec::with_capacity(n);
    let mut col_upper: Vec<f64> = Vec::new();
    for b in &lp.variable_bounds {
        let col = col_upper.len();
        if b.lower.is_finite() {
            maps.push(VarMap::Shifted {
                col,
                offset: b.lower,
                sign: 1.0,
            });
            col_upper.push(b.upper - b.lower);
        } else if b.upper.is_finite() {
            maps.push(VarMap::Shifted {
                col,
                offset: b.upper,
                sign: -1.0,
            });
            col_upper.push(f64::INFINITY);
        } else {
            maps.push(VarMap::Split { col });
            col_upper.push(f64::INFINITY);
            col_upper.push(f64::INFINITY);
        }
    }
    let structural = col_upper.len();

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut kinds = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = vec![0.0; structural];
        let mut b = lp.rhs[i];
        for (jv, &a) in lp.constraint_matrix[i].iter().enumerate() {
            match maps[jv] {
                VarMap::Shifted { col, offset, sign } => {
                    row[col] += a * sign;
                    b -= a * offset;
                }
                VarMap::Split { col } => {
                    row[col] += a;
                    row[col + 1] -= a;
                }
            }
        }
        let mut kind = lp.row_kinds[i];
        if b < 0.0 {
            row.iter_mut().for_each(|a| *a = -*a);
            b = -b;
            kind = match kind {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        rows.push(row);
        rhs.push(b);
        kinds.push(kind);
    }

    // Column layout: structural | slack/surplus per inequality row | artificials.
    let n_slack = kinds.iter().filter(|k| **k != Relation::Eq).count();
    let n_art = kinds.iter().filter(|k| **k != Relation::Le).count();
    let cols = structural + n_slack + n_art;
    let mut t = vec![0.0; m * cols];
    let mut upper = col_upper;
    upper.resize(cols, f64::INFINITY);
    let mut basis = vec![0; m];
    let mut unit_col = vec![0; m];
    let mut art_cols = Vec::with_capacity(n_art);
    let (mut next_slack, mut next_art) = (structural, structural + n_slack);
    for i in 0..m {
        t[i * cols..i * cols + structural].copy_from_slice(&rows[i]);
        match kinds[i] {
            Relation::Le => {
                t[i * cols + next_slack] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                t[i * cols + next_slack] = -1.0;
                next_slack += 1;
                t[i * cols + next_art] = 1.0;
                basis[i] = next_art;
                art_cols.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                t[i * cols + next_art] = 1.0;
                basis[i] = next_art;
                art_cols.push(next_art);
                next_art += 1;
            }
        }
        unit_col[i] = basis[i];
    }
    let mut slot = vec![Slot::AtLower; cols];
    for &bj in &basis {
        slot[bj] = Slot::Basic;
    }

    let mut tab = Tableau {
        rows: m,
        cols,
        t,
        beta: rhs.clone(),
        b: rhs,
        upper,
        basis,
        slot,
        unit_col,
        iterations: 0,
        max_iterations: cap.unwrap_or(50 * (m + cols)),
    };

    // Phase 1: drive the artificials to zero.
    if !art_cols.is_empty() {
        let mut cost1 = vec![0.0; cols];
        for &a in &art_cols {
            cost1[a] = -1.0;
        }
        match tab.run(&cost1) {
            Outcome::Stalled => {
                return Ok(LpSolution::without_point(LpStatus::Stalled, tab.iterations))
            }
            Outcome::Unbounded => {
                return Err(LpError::Internal("phase one reported unbounded".into()))
            }
            Outcome::Optimal => {}
        }
        tab.refresh_beta();
        let infeasibility: f64 = art_cols.iter().map(|&a| tab.value(a)).sum();
        let scale = 1.0 + tab.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if infeasibility > FEAS_EPS * scale {
            return Ok(LpSolution::without_point(
                LpStatus::Infeasible,
                tab.iterations,
            ));
        }
        // Artificials are pinned to zero from here on; any still basic sit
        // at zero and leave on the first step that would move them.
        for &a in &art_cols {
            tab.upper[a] = 0.0;
        }
    }

    // Phase 2, always as a maximization.
    let flip = if lp.sense == Sense::Maximize {
        1.0
    } else {
        -1.0
    };
    let mut cost2 = vec![0.0; cols];
    for (jv, &c) in lp.objective.iter().enumerate() {
        match maps[jv] {
            VarMap::Shifted { col, sign, .. } => cost2[col] += flip * c * sign,
            VarMap::Split { col } => {
                cost2[col] += flip * c;
                cost2[col + 1] -= flip * c;
            }
        }
    }
    match tab.run(&cost2) {
        Outcome::Stalled => {
            return Ok(LpSolution::without_point(LpStatus::Stalled, tab.iterations))
        }
        Outcome::Unbounded => {
            return Ok(LpSolution::without_point(
                LpStatus::Unbounded,
                tab.iterations,
            ))
        }
        Outcome::Optimal => {}
    }
    tab.refresh_beta();

    let y: Vec<f64> = (0..structural).map(|j| tab.value(j)).collect();
    let x: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            VarMap::Shifted { col, offset, sign } => offset + sign * y[col],
            VarMap::Split { col } => y[col] - y[col + 1],
        })
        .collect();
    verify_point(lp, &x)?;
    let objective_value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        primal_values: x,
        objective_value,
        iterations: tab.iterations,
    })
}

fn verify_point(lp: &LinearProgram, x: &[f64]) -> Result<(), LpError> {
    for (j, (b, &v)) in lp.variable_bounds.iter().zip(x).enumerate() {
        let tol = FEAS_EPS * (1.0 + v.abs());
        if v < b.lower - tol || v > b.upper + tol {
            return Err(LpError::Internal(format!(
                "variable {j} = {v} outside [{}, {}]",
                b.lower, b.upper
            )));
        }
    }
    for (i, row) in lp.constraint_matrix.iter().enumerate() {
        let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
        let scale = row
            .iter()
            .zip(x)
            .fold(1.0f64 + lp.rhs[i].abs(), |acc, (a, v)| {
                acc.max((a * v).abs())
            });
        let tol = FEAS_EPS * scale;
        let ok = match lp.row_kinds[i] {
            Relation::Le => lhs <= lp.rhs[i] + tol,
            Relation::Ge => lhs >= lp.rhs[i] - tol,
            Relation::Eq => (lhs - lp.rhs[i]).abs() <= tol,
        };
        if !ok {
            return Err(LpError::Internal(format!(
                "row {i}: lhs {lhs} violates {:?} {}",
                lp.row_kinds[i], lp.rhs[i]
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_variable() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 3.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.primal_values[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective_value, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn forced_by_equality() {
        let mut lp =
            LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]).with_bounds(vec![Bounds::UNIT; 2]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn textbook_minimization() {
        // min 2x + 3y  s.t. x + y >= 4, x + 3y >= 6  -> x = 3, y = 1, obj 9
        let mut lp = LinearProgram::new(Sense::Minimize, vec![2.0, 3.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Ge, 4.0);
        lp.add_constraint(vec![1.0, 3.0], Relation::Ge, 6.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value, 9.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.primal_values[0], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn upper_bounds_without_rows() {
        // max x + 2y, x,y in [0,1], x + y <= 1.5 -> y = 1, x = 0.5
        let mut lp =
            LinearProgram::new(Sense::Maximize, vec![1.0, 2.0]).with_bounds(vec![Bounds::UNIT; 2]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Le, 1.5);
        let s = solve(&lp).unwrap();
        assert_abs_diff_eq!(s.objective_value, 2.5, epsilon = 1e-9);
    }

    #[test]
    fn free_and_negative_bounds() {
        // min x s.t. x >= -7 as a row, x free -> -7
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0]).with_bounds(vec![Bounds::FREE]);
        lp.add_constraint(vec![1.0], Relation::Ge, -7.0);
        let s = solve(&lp).unwrap();
        assert_abs_diff_eq!(s.objective_value, -7.0, epsilon = 1e-9);

        // max x with x in (-inf, -2] -> -2
        let lp = LinearProgram::new(Sense::Maximize, vec![1.0]).with_bounds(vec![Bounds {
            lower: f64::NEG_INFINITY,
            upper: -2.0,
        }]);
        let s = solve(&lp).unwrap();
        assert_abs_diff_eq!(s.objective_value, -2.0, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Ge, 2.0);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 2.0);
        lp.add_constraint(vec![2.0, 2.0], Relation::Eq, 4.0);
        lp.add_constraint(vec![1.0, 0.0], Relation::Le, 0.5);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_program_terminates() {
        // Classic Beale cycling example; Bland's rule must terminate.
        let mut lp = LinearProgram::new(Sense::Maximize, vec![0.75, -150.0, 0.02, -6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value, 0.05, epsilon = 1e-9);
    }

    #[test]
    fn dimension_errors() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(solve(&lp), Err(LpError::DimensionMismatch(_))));

        let lp = LinearProgram::new(Sense::Maximize, vec![f64::NAN]);
        assert!(matches!(solve(&lp), Err(LpError::NonFinite(_))));

        let lp = LinearProgram::new(Sense::Maximize, vec![1.0]).with_bounds(vec![Bounds {
            lower: 2.0,
            upper: 1.0,
        }]);
        assert!(matches!(solve(&lp), Err(LpError::InvalidBounds { .. })));
    }

    #[test]
    fn stalled_is_reported() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 2.0], Relation::Le, 4.0);
        lp.add_constraint(vec![3.0, 1.0], Relation::Le, 6.0);
        let full = solve(&lp).unwrap();
        assert_eq!(full.status, LpStatus::Optimal);
        assert!(full.iterations >= 2);
        let capped = solve_with_iteration_cap(&lp, Some(1)).unwrap();
        assert_eq!(capped.status, LpStatus::Stalled);
        assert!(capped.primal_values.is_empty());
    }
}
