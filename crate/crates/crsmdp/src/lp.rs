//! Self-contained dense linear-program solver.
//!
//! Minimizes `c . y` over `y >= 0` subject to equality rows `A y = b` and
//! inequality rows `A y <= b`, via a two-phase dense-tableau simplex with
//! Bland's anti-cycling rule. Deterministic: identical inputs produce
//! identical pivot sequences and outputs. Dense storage is deliberate;
//! the problems this crate builds are desk scale and correctness and
//! reproducibility outrank speed.

use serde::Serialize;

use crate::error::Error;
use crate::Result;

/// Entries smaller than this never serve as pivots.
pub const PIVOT_TOL: f64 = 1e-11;
/// Feasibility tolerance on residuals and the phase-one objective.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Reduced-cost threshold for entering-column selection.
const REDUCED_COST_TOL: f64 = 1e-9;
/// Backstop on total pivots.
const MAX_PIVOTS: u64 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A dense LP in the form `min c.y, A_eq y = b_eq, A_ub y <= b_ub, y >= 0`.
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub ineq_rows: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
    /// Optional diagnostics names (variables, equality rows, inequality rows).
    pub var_names: Option<Vec<String>>,
    pub eq_names: Option<Vec<String>>,
    pub ineq_names: Option<Vec<String>>,
}

impl LpProblem {
    pub fn new(num_vars: usize, objective: Vec<f64>) -> Self {
        LpProblem {
            num_vars,
            objective,
            ..Default::default()
        }
    }

    pub fn push_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn push_ineq(&mut self, row: Vec<f64>, rhs: f64) {
        self.ineq_rows.push(row);
        self.ineq_rhs.push(rhs);
    }

    fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(Error::DimensionMismatch(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                self.num_vars
            )));
        }
        if self.eq_rows.len() != self.eq_rhs.len() || self.ineq_rows.len() != self.ineq_rhs.len() {
            return Err(Error::DimensionMismatch("row/rhs count mismatch".into()));
        }
        for row in self.eq_rows.iter().chain(self.ineq_rows.iter()) {
            if row.len() != self.num_vars {
                return Err(Error::DimensionMismatch(format!(
                    "row has {} entries for {} variables",
                    row.len(),
                    self.num_vars
                )));
            }
        }
        let finite = self
            .objective
            .iter()
            .chain(self.eq_rhs.iter())
            .chain(self.ineq_rhs.iter())
            .chain(self.eq_rows.iter().flatten())
            .chain(self.ineq_rows.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::DimensionMismatch(
                "all LP entries must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Plain-text dump (`min`/`st` blocks) for offline inspection.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let name = |j: usize| -> String {
            self.var_names
                .as_ref()
                .and_then(|names| names.get(j).cloned())
                .unwrap_or_else(|| format!("y{j}"))
        };
        let mut out = String::from("min\n  ");
        let mut first = true;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                if !first {
                    out.push_str(" + ");
                }
                let _ = write!(out, "{c} {}", name(j));
                first = false;
            }
        }
        if first {
            out.push('0');
        }
        out.push_str("\nst\n");
        let mut write_row = |label: String, row: &[f64], op: &str, rhs: f64| {
            let _ = write!(out, "  {label}: ");
            let mut first = true;
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    if !first {
                        out.push_str(" + ");
                    }
                    let _ = write!(out, "{a} {}", name(j));
                    first = false;
                }
            }
            if first {
                out.push('0');
            }
            let _ = writeln!(out, " {op} {rhs}");
        };
        for (i, row) in self.eq_rows.iter().enumerate() {
            let label = self
                .eq_names
                .as_ref()
                .and_then(|n| n.get(i).cloned())
                .unwrap_or_else(|| format!("eq{i}"));
            write_row(label, row, "=", self.eq_rhs[i]);
        }
        for (i, row) in self.ineq_rows.iter().enumerate() {
            let label = self
                .ineq_names
                .as_ref()
                .and_then(|n| n.get(i).cloned())
                .unwrap_or_else(|| format!("le{i}"));
            write_row(label, row, "<=", self.ineq_rhs[i]);
        }
        out
    }
}

/// Solver output. `y` and `objective_value` are present exactly when the
/// status is `Optimal`.
#[derive(Debug, Clone, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub y: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
    pub max_residual: f64,
    pub pivots: u64,
}

struct Tableau {
    ncols: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    obj: Vec<f64>,
    neg_z: f64,
    basis: Vec<usize>,
    pivots: u64,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        self.rhs[r] /= piv;
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let factor = self.rows[i][c];
            if factor != 0.0 {
                let (head, tail) = self.rows.split_at_mut(r.max(i));
                let (source, target) = if i < r {
                    (&tail[0], &mut head[i])
                } else {
                    (&head[r], &mut tail[0])
                };
                for (t, s) in target.iter_mut().zip(source.iter()) {
                    *t -= factor * s;
                }
                self.rows[i][c] = 0.0;
                self.rhs[i] -= factor * self.rhs[r];
                // keep the ratio test sane under roundoff
                if self.rhs[i] < 0.0 && self.rhs[i] > -PIVOT_TOL {
                    self.rhs[i] = 0.0;
                }
            }
        }
        let factor = self.obj[c];
        if factor != 0.0 {
            for (o, s) in self.obj.iter_mut().zip(self.rows[r].iter()) {
                *o -= factor * s;
            }
            self.obj[c] = 0.0;
            self.neg_z -= factor * self.rhs[r];
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs Bland's rule over columns `0..allowed`. Returns `Ok(true)` at
    /// an optimum and `Ok(false)` when some entering column has no
    /// blocking row (unbounded direction).
    fn run(&mut self, allowed: usize) -> Result<bool> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::NumericallyDegenerate(format!(
                    "pivot limit {MAX_PIVOTS} reached"
                )));
            }
            let entering = (0..allowed).find(|&j| self.obj[j] < -REDUCED_COST_TOL);
            let Some(entering) = entering else {
                return Ok(true);
            };
            let mut leaving: Option<usize> = None;
            let mut best = f64::INFINITY;
            for i in 0..self.rows.len() {
                let a = self.rows[i][entering];
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i] / a;
                    match leaving {
                        None => {
                            best = ratio;
                            leaving = Some(i);
                        }
                        Some(l) => {
                            let tie = (ratio - best).abs() <= 1e-12 * best.abs().max(1.0);
                            if tie {
                                if self.basis[i] < self.basis[l] {
                                    leaving = Some(i);
                                }
                            } else if ratio < best {
                                best = ratio;
                                leaving = Some(i);
                            }
                        }
                    }
                }
            }
            match leaving {
                Some(r) => self.pivot(r, entering),
                None => return Ok(false),
            }
        }
    }
}

/// Two-phase dense simplex with Bland's rule.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let nv = problem.num_vars;
    let neq = problem.eq_rows.len();
    let nineq = problem.ineq_rows.len();
    let nrows = neq + nineq;
    let slack_start = nv;
    let art_start = nv + nineq;

    // Assemble rows with slack columns; flip signs so every rhs is >= 0.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(nrows);
    let mut rhs: Vec<f64> = Vec::with_capacity(nrows);
    let mut slack_is_basic: Vec<Option<usize>> = vec![None; nrows];
    for i in 0..neq {
        let mut row = vec![0.0; art_start];
        row[..nv].copy_from_slice(&problem.eq_rows[i]);
        let mut b = problem.eq_rhs[i];
        if b < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            b = -b;
        }
        rows.push(row);
        rhs.push(b);
    }
    for i in 0..nineq {
        let mut row = vec![0.0; art_start];
        row[..nv].copy_from_slice(&problem.ineq_rows[i]);
        row[slack_start + i] = 1.0;
        let mut b = problem.ineq_rhs[i];
        if b < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            b = -b;
        } else {
            slack_is_basic[neq + i] = Some(slack_start + i);
        }
        rows.push(row);
        rhs.push(b);
    }

    // Artificial columns for every row lacking a basic slack.
    let mut basis = vec![usize::MAX; nrows];
    let mut n_art = 0;
    for i in 0..nrows {
        match slack_is_basic[i] {
            Some(col) => basis[i] = col,
            None => {
                n_art += 1;
            }
        }
    }
    let ncols = art_start + n_art;
    for row in rows.iter_mut() {
        row.resize(ncols, 0.0);
    }
    let mut art_col = art_start;
    for i in 0..nrows {
        if basis[i] == usize::MAX {
            rows[i][art_col] = 1.0;
            basis[i] = art_col;
            art_col += 1;
        }
    }

    // Phase one: minimize the sum of artificials.
    let mut obj = vec![0.0; ncols];
    let mut neg_z = 0.0;
    for o in obj.iter_mut().skip(art_start) {
        *o = 1.0;
    }
    for i in 0..nrows {
        if basis[i] >= art_start {
            for j in 0..ncols {
                obj[j] -= rows[i][j];
            }
            neg_z -= rhs[i];
        }
    }
    let mut tab = Tableau {
        ncols,
        rows,
        rhs,
        obj,
        neg_z,
        basis,
        pivots: 0,
    };
    if n_art > 0 {
        let optimal = tab.run(ncols)?;
        if !optimal {
            return Err(Error::NumericallyDegenerate(
                "phase one produced an unbounded direction".into(),
            ));
        }
        let phase_one = -tab.neg_z;
        if phase_one > FEASIBILITY_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                y: None,
                objective_value: None,
                max_residual: phase_one,
                pivots: tab.pivots,
            });
        }
        // Drive basic artificials out; drop rows that are redundant.
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= art_start {
                match (0..art_start).find(|&j| tab.rows[r][j].abs() > PIVOT_TOL) {
                    Some(j) => tab.pivot(r, j),
                    None => {
                        tab.rows.remove(r);
                        tab.rhs.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    // Phase two on the original objective.
    tab.obj = vec![0.0; tab.ncols];
    tab.obj[..nv].copy_from_slice(&problem.objective);
    tab.neg_z = 0.0;
    for i in 0..tab.rows.len() {
        let cb = if tab.basis[i] < nv {
            problem.objective[tab.basis[i]]
        } else {
            0.0
        };
        if cb != 0.0 {
            for j in 0..tab.ncols {
                tab.obj[j] -= cb * tab.rows[i][j];
            }
            tab.neg_z -= cb * tab.rhs[i];
        }
    }
    let optimal = tab.run(art_start)?;
    if !optimal {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            y: None,
            objective_value: None,
            max_residual: 0.0,
            pivots: tab.pivots,
        });
    }

    let mut y = vec![0.0; nv];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < nv {
            y[b] = tab.rhs[i];
        }
    }
    let objective_value: f64 = problem
        .objective
        .iter()
        .zip(y.iter())
        .map(|(c, v)| c * v)
        .sum();
    let mut max_residual = 0.0_f64;
    for (row, &b) in problem.eq_rows.iter().zip(problem.eq_rhs.iter()) {
        let lhs: f64 = row.iter().zip(y.iter()).map(|(a, v)| a * v).sum();
        max_residual = max_residual.max((lhs - b).abs());
    }
    for (row, &b) in problem.ineq_rows.iter().zip(problem.ineq_rhs.iter()) {
        let lhs: f64 = row.iter().zip(y.iter()).map(|(a, v)| a * v).sum();
        max_residual = max_residual.max((lhs - b).max(0.0));
    }
    for &v in &y {
        max_residual = max_residual.max(-v);
    }
    if max_residual > 1e-6 {
        return Err(Error::Internal(format!(
            "simplex claims optimality with residual {max_residual:e}"
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        y: Some(y),
        objective_value: Some(objective_value),
        max_residual,
        pivots: tab.pivots,
    })
}
