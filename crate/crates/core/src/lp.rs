//! Bounded-variable linear programs: `minimize c·x` subject to `A x <= b` and
//! `l <= x <= u` with finite bounds.
//!
//! The solver is a dense dual simplex on a compact (nonbasic-column) tableau.
//! With finite bounds on every structural variable the all-slack basis is
//! dual feasible once each variable sits at the bound favoured by its cost,
//! so no artificial phase is needed. Leaving rows are chosen by largest
//! infeasibility with a Harris-style ratio test; after a run of degenerate
//! pivots the solver falls back to Bland's smallest-index rule until
//! progress resumes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PIVOT_TOL: f64 = 1e-10;
pub const FEASIBILITY_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-12;
const DROP_TOL: f64 = 1e-14;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// Sparse row `coeffs · x <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(VarId, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    vars: Vec<Variable>,
    objective: Vec<(VarId, f64)>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId> {
        let name = name.into();
        if !lower.is_finite() || !upper.is_finite() || lower > upper {
            return Err(Error::invalid(format!(
                "variable {name} needs finite bounds with lower <= upper, got [{lower}, {upper}]"
            )));
        }
        self.vars.push(Variable { name, lower, upper });
        Ok(VarId(self.vars.len() - 1))
    }

    /// Adds `coef` to the objective coefficient of `var`.
    pub fn add_objective(&mut self, var: VarId, coef: f64) {
        self.objective.push((var, coef));
    }

    /// `coeffs · x <= rhs`
    pub fn add_le(&mut self, coeffs: Vec<(VarId, f64)>, rhs: f64) {
        self.constraints.push(Constraint { coeffs, rhs });
    }

    /// `coeffs · x >= rhs`, stored negated.
    pub fn add_ge(&mut self, coeffs: Vec<(VarId, f64)>, rhs: f64) {
        let coeffs = coeffs.into_iter().map(|(v, a)| (v, -a)).collect();
        self.constraints.push(Constraint { coeffs, rhs: -rhs });
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Dense objective vector.
    pub fn cost_vector(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.vars.len()];
        for &(v, a) in &self.objective {
            c[v.0] += a;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vars.len();
        let in_range = |v: &VarId| v.0 < n;
        if !self.objective.iter().all(|(v, a)| in_range(v) && a.is_finite()) {
            return Err(Error::invalid("objective refers to an unknown variable"));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() || !row.coeffs.iter().all(|(v, a)| in_range(v) && a.is_finite()) {
                return Err(Error::invalid(format!("constraint {i} is malformed")));
            }
        }
        Ok(())
    }

    /// Objective value of an assignment.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Largest violation `a·x - b` over all rows (zero when all hold).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|row| row.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum::<f64>() - row.rhs)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    // row-major rows x cols; dx_basic[i] = sum_c t[i][c] * dx_nonbasic[c]
    t: Vec<f64>,
    // reduced costs of the nonbasic columns
    d: Vec<f64>,
    // values of basic variables
    xb: Vec<f64>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    // upper bound of every variable after shifting lower bounds to zero
    ub: Vec<f64>,
    at_upper: Vec<bool>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.vars.len();
        let r = lp.constraints.len();
        let cost = lp.cost_vector();
        let mut ub: Vec<f64> = lp.vars.iter().map(|v| v.upper - v.lower).collect();
        ub.extend(std::iter::repeat_n(f64::INFINITY, r));
        let mut at_upper = vec![false; n + r];
        let mut start = vec![0.0; n];
        for j in 0..n {
            if cost[j] < 0.0 {
                at_upper[j] = true;
                start[j] = ub[j];
            }
        }
        let mut t = vec![0.0; r * n];
        let mut xb = vec![0.0; r];
        for (i, row) in lp.constraints.iter().enumerate() {
            let mut value = row.rhs;
            for &(v, a) in &row.coeffs {
                t[i * n + v.0] -= a;
                value -= a * (lp.vars[v.0].lower + start[v.0]);
            }
            xb[i] = value;
        }
        Tableau {
            rows: r,
            cols: n,
            t,
            d: cost,
            xb,
            basic: (n..n + r).collect(),
            nonbasic: (0..n).collect(),
            ub,
            at_upper,
        }
    }

    fn infeasibility(&self, i: usize) -> f64 {
        let x = self.xb[i];
        let up = self.ub[self.basic[i]];
        if x < 0.0 {
            -x
        } else if x > up {
            x - up
        } else {
            0.0
        }
    }

    fn pick_leaving(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let viol = self.infeasibility(i);
            if viol <= FEASIBILITY_TOL {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, bv)) => {
                    if bland {
                        self.basic[i] < self.basic[b]
                    } else {
                        viol > bv
                    }
                }
            };
            if better {
                best = Some((i, viol));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Harris two-pass dual ratio test. Returns the entering column.
    fn pick_entering(&self, r: usize, increase: bool, bland: bool) -> Option<usize> {
        let row = &self.t[r * self.cols..(r + 1) * self.cols];
        let push = if increase { 1.0 } else { -1.0 };
        let eligible = |c: usize| -> Option<(f64, f64)> {
            let var = self.nonbasic[c];
            if self.ub[var] <= 0.0 {
                return None;
            }
            let dir = if self.at_upper[var] { -1.0 } else { 1.0 };
            let alpha = row[c] * dir * push;
            if alpha <= PIVOT_TOL {
                return None;
            }
            let dj = (self.d[c] * dir).max(0.0);
            Some((dj, row[c].abs()))
        };
        let mut bound = f64::INFINITY;
        for c in 0..self.cols {
            if let Some((dj, a)) = eligible(c) {
                bound = bound.min((dj + DUAL_TOL) / a);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for c in 0..self.cols {
            if let Some((dj, a)) = eligible(c) {
                if dj / a > bound {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((b, ba)) => {
                        if bland {
                            self.nonbasic[c] < self.nonbasic[b]
                        } else {
                            a > ba
                        }
                    }
                };
                if better {
                    best = Some((c, a));
                }
            }
        }
        best.map(|(c, _)| c)
    }

    /// Exchanges basic row `r` with nonbasic column `s`; returns the dual
    /// step length `|d_s / t_rs|`.
    fn pivot(&mut self, r: usize, s: usize, target: f64, leaving_to_upper: bool) -> f64 {
        let cols = self.cols;
        let p = self.t[r * cols + s];
        let theta = (target - self.xb[r]) / p;
        let entering = self.nonbasic[s];
        let leaving = self.basic[r];
        let entering_value = if self.at_upper[entering] { self.ub[entering] } else { 0.0 };

        for i in 0..self.rows {
            if i != r {
                let tis = self.t[i * cols + s];
                if tis != 0.0 {
                    self.xb[i] += tis * theta;
                }
            }
        }
        self.xb[r] = entering_value + theta;
        let dual_step = (self.d[s] / p).abs();

        // new pivot row
        let mut nz: Vec<usize> = Vec::new();
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for c in 0..cols {
                if c == s {
                    row[c] = 1.0 / p;
                    nz.push(c);
                } else if row[c] != 0.0 {
                    row[c] = -row[c] / p;
                    nz.push(c);
                }
            }
        }
        let pivot_row: Vec<(usize, f64)> = nz.iter().map(|&c| (c, self.t[r * cols + c])).collect();

        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let base = i * cols;
            let tis = self.t[base + s];
            if tis == 0.0 {
                continue;
            }
            for &(c, prc) in &pivot_row {
                if c == s {
                    self.t[base + c] = tis * prc;
                } else {
                    let v = self.t[base + c] + tis * prc;
                    self.t[base + c] = if v.abs() < DROP_TOL { 0.0 } else { v };
                }
            }
        }
        let ds = self.d[s];
        if ds != 0.0 {
            for &(c, prc) in &pivot_row {
                if c == s {
                    self.d[c] = ds * prc;
                } else {
                    self.d[c] += ds * prc;
                }
            }
        }

        self.basic[r] = entering;
        self.nonbasic[s] = leaving;
        self.at_upper[leaving] = leaving_to_upper;
        self.at_upper[entering] = false;
        dual_step
    }

    fn primal_values(&self, lp: &LinearProgram) -> Vec<f64> {
        let n = lp.vars.len();
        let mut y: Vec<f64> = (0..n)
            .map(|j| if self.at_upper[j] { self.ub[j] } else { 0.0 })
            .collect();
        for (i, &var) in self.basic.iter().enumerate() {
            if var < n {
                y[var] = self.xb[i];
            }
        }
        lp.vars
            .iter()
            .zip(y)
            .map(|(v, yj)| (v.lower + yj).clamp(v.lower, v.upper))
            .collect()
    }
}

/// Solves the program. Infeasibility is reported as a status; only malformed
/// input or the iteration safeguard produce an error.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let mut tab = Tableau::build(lp);
    let limit = 50 * (tab.rows + tab.cols) + 1000;
    let mut iterations = 0;
    let mut degenerate = 0;
    loop {
        let bland = degenerate >= DEGENERATE_RUN;
        let Some(r) = tab.pick_leaving(bland) else {
            let values = tab.primal_values(lp);
            return Ok(LpSolution {
                status: LpStatus::Optimal,
                objective: lp.objective_value(&values),
                values,
                iterations,
            });
        };
        if iterations >= limit {
            return Err(Error::IterationLimit(limit));
        }
        let increase = tab.xb[r] < 0.0;
        let Some(s) = tab.pick_entering(r, increase, bland) else {
            let values = tab.primal_values(lp);
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective: f64::INFINITY,
                values,
                iterations,
            });
        };
        let target = if increase { 0.0 } else { tab.ub[tab.basic[r]] };
        let step = tab.pivot(r, s, target, !increase);
        iterations += 1;
        if step <= DUAL_TOL {
            degenerate += 1;
        } else {
            degenerate = 0;
        }
    }
}

fn lp_name(raw: &str) -> String {
    let mut out: String = raw
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        out.insert(0, 'v');
    }
    out
}

fn write_terms(out: &mut String, terms: &[(VarId, f64)], names: &[String]) {
    let mut merged: Vec<(usize, f64)> = Vec::new();
    for &(v, a) in terms {
        match merged.iter_mut().find(|(j, _)| *j == v.0) {
            Some(slot) => slot.1 += a,
            None => merged.push((v.0, a)),
        }
    }
    if merged.is_empty() {
        // keeps the expression non-empty without changing its value
        merged.push((0, 0.0));
    }
    for (n, (j, a)) in merged.iter().enumerate() {
        if n > 0 && n % 8 == 0 {
            out.push_str("\n   ");
        }
        let sign = if *a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", a.abs(), names[*j]);
    }
}

/// Renders the program in CPLEX LP text format.
pub fn export_lp_text(lp: &LinearProgram) -> String {
    let names: Vec<String> = lp.vars.iter().map(|v| lp_name(&v.name)).collect();
    let mut out = String::new();
    out.push_str("\\ bounded linear program\n");
    out.push_str("Minimize\n obj:");
    if lp.vars.is_empty() {
        out.push_str(" 0\n");
    } else {
        write_terms(&mut out, &lp.objective, &names);
        out.push('\n');
    }
    if !lp.constraints.is_empty() {
        out.push_str("Subject To\n");
        for (i, row) in lp.constraints.iter().enumerate() {
            let _ = write!(out, " r{}:", i + 1);
            write_terms(&mut out, &row.coeffs, &names);
            let _ = writeln!(out, " <= {}", row.rhs);
        }
    }
    out.push_str("Bounds\n");
    for (v, name) in lp.vars.iter().zip(&names) {
        if v.lower == v.upper {
            let _ = writeln!(out, " {name} = {}", v.lower);
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", v.lower, v.upper);
        }
    }
    out.push_str("End\n");
    out
}
