//! Dense linear programs and a two-phase simplex solver.
//!
//! Problems are always stated as maximizations. The solver works on a dense
//! tableau and uses Bland's rule for both the entering and the leaving
//! variable, so it cannot cycle on degenerate vertices and identical input
//! always produces bit-identical output. The instances built by this crate
//! have a few dozen columns at most.

#![allow(clippy::needless_range_loop)]

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FEAS_TOL: f64 = 1e-9;
pub const DEFAULT_OPT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

// Smallest magnitude accepted as a pivot element.
const PIVOT_TOL: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn flipped(self) -> Self {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
            Relation::Eq => Relation::Eq,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
    pub name: String,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// Amount by which `x` violates this constraint (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `maximize c·x` subject to linear constraints and per-variable bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    bounds: Vec<(f64, f64)>,
    names: Vec<String>,
}

impl LinearProgram {
    /// New program over `objective.len()` variables, all bounded to `[0, +inf)`.
    pub fn maximize(objective: Vec<f64>) -> Result<Self> {
        let names = (0..objective.len()).map(|j| format!("x{j}")).collect();
        Self::with_names(objective, names)
    }

    pub fn with_names(objective: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if names.len() != objective.len() {
            return Err(Error::Dimension {
                expected: objective.len(),
                got: names.len(),
            });
        }
        if objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("objective".into()));
        }
        let bounds = vec![(0.0, f64::INFINITY); objective.len()];
        Ok(LinearProgram {
            objective,
            constraints: Vec::new(),
            bounds,
            names,
        })
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

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn add_constraint(
        &mut self,
        coeffs: Vec<f64>,
        relation: Relation,
        rhs: f64,
    ) -> Result<&mut Self> {
        let name = format!("c{}", self.constraints.len());
        self.add_named_constraint(name, coeffs, relation, rhs)
    }

    pub fn add_named_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<f64>,
        relation: Relation,
        rhs: f64,
    ) -> Result<&mut Self> {
        if coeffs.len() != self.num_vars() {
            return Err(Error::Dimension {
                expected: self.num_vars(),
                got: coeffs.len(),
            });
        }
        let name = name.into();
        if !rhs.is_finite() || coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite(format!("constraint {name}")));
        }
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
            name,
        });
        Ok(self)
    }

    /// Adds a constraint given as `(variable, coefficient)` pairs.
    pub fn add_sparse(
        &mut self,
        name: impl Into<String>,
        terms: &[(usize, f64)],
        relation: Relation,
        rhs: f64,
    ) -> Result<&mut Self> {
        let mut coeffs = vec![0.0; self.num_vars()];
        for &(j, a) in terms {
            if j >= coeffs.len() {
                return Err(Error::Dimension {
                    expected: self.num_vars(),
                    got: j + 1,
                });
            }
            coeffs[j] += a;
        }
        self.add_named_constraint(name, coeffs, relation, rhs)
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> Result<&mut Self> {
        if var >= self.num_vars() {
            return Err(Error::Dimension {
                expected: self.num_vars(),
                got: var + 1,
            });
        }
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY {
            return Err(Error::param(format!(
                "bounds [{lower}, {upper}] for {}",
                self.names[var]
            )));
        }
        self.bounds[var] = (lower, upper);
        Ok(self)
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// One constraint per line, suitable for debugging dumps.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "max: {}", self.linear_expr(&self.objective));
        for c in &self.constraints {
            let _ = writeln!(
                out,
                "{}: {} {} {}",
                c.name,
                self.linear_expr(&c.coeffs),
                c.relation.symbol(),
                c.rhs
            );
        }
        for (name, (lo, hi)) in self.names.iter().zip(&self.bounds) {
            let _ = writeln!(out, "bound: {lo} <= {name} <= {hi}");
        }
        out
    }

    fn linear_expr(&self, coeffs: &[f64]) -> String {
        let terms: Vec<String> = coeffs
            .iter()
            .zip(&self.names)
            .filter(|(a, _)| **a != 0.0)
            .map(|(a, n)| format!("{a} {n}"))
            .collect();
        if terms.is_empty() {
            "0".to_string()
        } else {
            terms.join(" + ")
        }
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    /// One multiplier per constraint of the original program (empty unless optimal).
    pub duals: Vec<f64>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn without_point(status: LpStatus, n: usize, iterations: usize) -> Self {
        let objective_value = match status {
            LpStatus::Unbounded => f64::INFINITY,
            _ => f64::NAN,
        };
        LpSolution {
            status,
            x: vec![f64::NAN; n],
            objective_value,
            iterations,
            duals: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: DEFAULT_FEAS_TOL,
            opt_tol: DEFAULT_OPT_TOL,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// How an original variable is expressed through nonnegative tableau columns.
#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// x = offset + y
    Shifted { col: usize, offset: f64 },
    /// x = offset - y
    Mirrored { col: usize, offset: f64 },
    /// x = y+ - y-
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    n_cols: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    relations: Vec<Relation>,
    // +1 or -1 per row, recording whether the row was negated to make rhs >= 0
    row_sign: Vec<f64>,
    cost: Vec<f64>,
    cost_offset: f64,
    maps: Vec<VarMap>,
    n_original_rows: usize,
}

fn standard_form(lp: &LinearProgram) -> StandardForm {
    let mut maps = Vec::with_capacity(lp.num_vars());
    let mut n_cols = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &lp.bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shifted {
                col: n_cols,
                offset: lo,
            });
            if hi.is_finite() {
                bound_rows.push((n_cols, hi - lo));
            }
            n_cols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Mirrored {
                col: n_cols,
                offset: hi,
            });
            n_cols += 1;
        } else {
            maps.push(VarMap::Split {
                pos: n_cols,
                neg: n_cols + 1,
            });
            n_cols += 2;
        }
    }

    let substitute = |coeffs: &[f64]| -> (Vec<f64>, f64) {
        let mut row = vec![0.0; n_cols];
        let mut constant = 0.0;
        for (a, map) in coeffs.iter().zip(&maps) {
            match *map {
                VarMap::Shifted { col, offset } => {
                    row[col] += a;
                    constant += a * offset;
                }
                VarMap::Mirrored { col, offset } => {
                    row[col] -= a;
                    constant += a * offset;
                }
                VarMap::Split { pos, neg } => {
                    row[pos] += a;
                    row[neg] -= a;
                }
            }
        }
        (row, constant)
    };

    let (cost, cost_offset) = substitute(&lp.objective);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut relations = Vec::new();
    for c in &lp.constraints {
        let (row, constant) = substitute(&c.coeffs);
        rows.push(row);
        rhs.push(c.rhs - constant);
        relations.push(c.relation);
    }
    for (col, width) in bound_rows {
        let mut row = vec![0.0; n_cols];
        row[col] = 1.0;
        rows.push(row);
        rhs.push(width);
        relations.push(Relation::Le);
    }

    let mut row_sign = vec![1.0; rows.len()];
    for i in 0..rows.len() {
        if rhs[i] < 0.0 {
            row_sign[i] = -1.0;
            rhs[i] = -rhs[i];
            for a in rows[i].iter_mut() {
                *a = -*a;
            }
            relations[i] = relations[i].flipped();
        }
    }

    StandardForm {
        n_cols,
        rows,
        rhs,
        relations,
        row_sign,
        cost,
        cost_offset,
        maps,
        n_original_rows: lp.constraints.len(),
    }
}

struct Tableau {
    // m rows of width n_total + 1; the last entry is the right-hand side
    rows: Vec<Vec<f64>>,
    // reduced costs with -z in the last slot
    reduced: Vec<f64>,
    basis: Vec<usize>,
    n_total: usize,
    artificial_start: usize,
    iterations: usize,
    max_iterations: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.n_total]
    }

    fn objective(&self) -> f64 {
        -self.reduced[self.n_total]
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let width = self.n_total + 1;
        let piv = self.rows[p][q];
        for v in self.rows[p].iter_mut() {
            *v /= piv;
        }
        self.rows[p][q] = 1.0;
        let pivot_row = self.rows[p].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == p {
                continue;
            }
            let factor = row[q];
            if factor != 0.0 {
                for k in 0..width {
                    row[k] -= factor * pivot_row[k];
                }
                row[q] = 0.0;
            }
        }
        let factor = self.reduced[q];
        if factor != 0.0 {
            for k in 0..width {
                self.reduced[k] -= factor * pivot_row[k];
            }
            self.reduced[q] = 0.0;
        }
        self.basis[p] = q;
    }

    /// Runs simplex iterations with Bland's rule over columns `< allowed`.
    fn run(&mut self, allowed: usize, opt_tol: f64) -> Result<PhaseOutcome> {
        loop {
            let entering = (0..allowed).find(|&j| self.reduced[j] > opt_tol);
            let Some(q) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][q];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((best, best_ratio)) => {
                        let tie = (ratio - best_ratio).abs() <= 1e-12 * (1.0 + best_ratio.abs());
                        if (tie && self.basis[i] < self.basis[best]) || (!tie && ratio < best_ratio)
                        {
                            Some((i, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            let Some((p, _)) = leaving else {
                return Ok(PhaseOutcome::Unbounded);
            };
            if self.iterations >= self.max_iterations {
                return Err(Error::IterationLimit(self.max_iterations));
            }
            self.iterations += 1;
            self.pivot(p, q);
        }
    }
}

/// Solves `lp` with the dense two-phase simplex method.
///
/// Infeasible and unbounded programs are reported through
/// [`LpSolution::status`]; only exceeding the iteration cap is an error.
pub fn solve_lp(lp: &LinearProgram, options: &SolverOptions) -> Result<LpSolution> {
    let sf = standard_form(lp);
    let m = sf.rows.len();

    // column layout: structural | slack/surplus | artificial
    let n_slack = sf.relations.iter().filter(|r| **r != Relation::Eq).count();
    let n_art = sf.relations.iter().filter(|r| **r != Relation::Le).count();
    let artificial_start = sf.n_cols + n_slack;
    let n_total = artificial_start + n_art;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    // column carrying +e_i for row i, used to read off the dual value
    let mut unit_col = Vec::with_capacity(m);
    let mut next_slack = sf.n_cols;
    let mut next_art = artificial_start;
    for i in 0..m {
        let mut row = vec![0.0; n_total + 1];
        row[..sf.n_cols].copy_from_slice(&sf.rows[i]);
        row[n_total] = sf.rhs[i];
        match sf.relations[i] {
            Relation::Le => {
                row[next_slack] = 1.0;
                basis.push(next_slack);
                unit_col.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                row[next_slack] = -1.0;
                next_slack += 1;
                row[next_art] = 1.0;
                basis.push(next_art);
                unit_col.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                row[next_art] = 1.0;
                basis.push(next_art);
                unit_col.push(next_art);
                next_art += 1;
            }
        }
        rows.push(row);
    }

    let mut tab = Tableau {
        rows,
        reduced: vec![0.0; n_total + 1],
        basis,
        n_total,
        artificial_start,
        iterations: 0,
        max_iterations: options.max_iterations,
    };

    // Phase 1: maximize -sum(artificials).
    if n_art > 0 {
        let mut reduced = vec![0.0; n_total + 1];
        for j in artificial_start..n_total {
            reduced[j] = -1.0;
        }
        for i in 0..m {
            if tab.basis[i] >= artificial_start {
                for k in 0..=n_total {
                    reduced[k] += tab.rows[i][k];
                }
            }
        }
        tab.reduced = reduced;
        tab.run(n_total, options.opt_tol)?;
        let scale = sf.rhs.iter().fold(1.0_f64, |acc, b| acc.max(b.abs()));
        if tab.objective() < -options.feas_tol * scale {
            return Ok(LpSolution::without_point(
                LpStatus::Infeasible,
                lp.num_vars(),
                tab.iterations,
            ));
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..m {
            if tab.basis[i] < artificial_start {
                continue;
            }
            if let Some(q) = (0..artificial_start).find(|&j| tab.rows[i][j].abs() > PIVOT_TOL) {
                tab.pivot(i, q);
            }
        }
    }

    // Phase 2: the true objective; artificials may no longer enter.
    let mut reduced = vec![0.0; n_total + 1];
    reduced[..sf.n_cols].copy_from_slice(&sf.cost);
    for i in 0..m {
        let cb = if tab.basis[i] < sf.n_cols {
            sf.cost[tab.basis[i]]
        } else {
            0.0
        };
        if cb != 0.0 {
            for k in 0..=n_total {
                reduced[k] -= cb * tab.rows[i][k];
            }
        }
    }
    tab.reduced = reduced;
    if let PhaseOutcome::Unbounded = tab.run(tab.artificial_start, options.opt_tol)? {
        return Ok(LpSolution::without_point(
            LpStatus::Unbounded,
            lp.num_vars(),
            tab.iterations,
        ));
    }

    let mut y = vec![0.0; sf.n_cols];
    for i in 0..m {
        if tab.basis[i] < sf.n_cols {
            y[tab.basis[i]] = tab.rhs(i);
        }
    }
    let x: Vec<f64> = sf
        .maps
        .iter()
        .map(|map| match *map {
            VarMap::Shifted { col, offset } => offset + y[col],
            VarMap::Mirrored { col, offset } => offset - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let duals = (0..sf.n_original_rows)
        .map(|i| -sf.row_sign[i] * tab.reduced[unit_col[i]])
        .map(|v| if v == 0.0 { 0.0 } else { v })
        .collect();
    let objective_value = lp.evaluate(&x);
    debug_assert!(
        (objective_value - (tab.objective() + sf.cost_offset)).abs()
            <= 1e-6 * (1.0 + objective_value.abs())
    );
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective_value,
        iterations: tab.iterations,
        duals,
    })
}

/// Feasibility and optimality residuals of a solution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub max_constraint_violation: f64,
    pub max_bound_violation: f64,
    /// Largest |multiplier × slack| or |reduced cost × distance to bound|.
    pub complementary_slackness: Option<f64>,
    /// |c·x − b·y|, only when every variable is bounded to `[0, +inf)`.
    pub duality_gap: Option<f64>,
}

impl Diagnostics {
    pub fn max_primal_violation(&self) -> f64 {
        self.max_constraint_violation.max(self.max_bound_violation)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_primal_violation() <= tol
    }
}

/// Checks `sol.x` against `lp`; when `duals` is given, also the
/// complementary-slackness residual and the duality gap.
pub fn verify_solution(lp: &LinearProgram, sol: &LpSolution, duals: Option<&[f64]>) -> Diagnostics {
    let x = &sol.x;
    let max_constraint_violation = lp
        .constraints
        .iter()
        .map(|c| c.violation(x))
        .fold(0.0, f64::max);
    let max_bound_violation = lp
        .bounds
        .iter()
        .zip(x)
        .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0))
        .fold(0.0, f64::max);

    let mut complementary_slackness = None;
    let mut duality_gap = None;
    if let Some(y) = duals {
        let mut worst: f64 = 0.0;
        for (c, &yi) in lp.constraints.iter().zip(y) {
            worst = worst.max((yi * (c.rhs - c.activity(x))).abs());
        }
        for j in 0..lp.num_vars() {
            let column: f64 = lp
                .constraints
                .iter()
                .zip(y)
                .map(|(c, yi)| yi * c.coeffs[j])
                .sum();
            let reduced = lp.objective[j] - column;
            let (lo, hi) = lp.bounds[j];
            let room = (x[j] - lo).abs().min((hi - x[j]).abs());
            let room = if room.is_finite() { room } else { 1.0 };
            worst = worst.max((reduced * room).abs());
        }
        complementary_slackness = Some(worst);
        if lp.bounds.iter().all(|&(lo, hi)| lo == 0.0 && hi == f64::INFINITY) {
            let dual_obj: f64 = lp.constraints.iter().zip(y).map(|(c, yi)| c.rhs * yi).sum();
            duality_gap = Some((lp.evaluate(x) - dual_obj).abs());
        }
    }

    Diagnostics {
        max_constraint_violation,
        max_bound_violation,
        complementary_slackness,
        duality_gap,
    }
}
