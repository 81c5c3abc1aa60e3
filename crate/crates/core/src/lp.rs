//! Dense bounded-variable primal simplex.
//!
//! Every row `a_i·x` gets a slack `s_i = a_i·x` whose bounds encode the row
//! type, so the working system is the homogeneous `A x − s = 0`. Basic values
//! are always recoverable from the nonbasic ones through the tableau, which
//! keeps drift under control on long runs. Phase 1 adds one artificial per row
//! that is infeasible at the starting point and minimises their sum.
//!
//! Pricing is Dantzig's largest reduced cost; after `3·(rows + cols)`
//! iterations without objective progress the solver switches to Bland's rule
//! until progress resumes.

use std::fmt::{self, Write as _};

use thiserror::Error;

pub const PIVOT_TOL: f64 = 1e-9;
pub const FEASIBILITY_TOL: f64 = 1e-7;
pub const OPTIMALITY_TOL: f64 = 1e-7;

/// Entries this small are flushed to zero after each pivot to keep the
/// tableau sparse.
const DROP_TOL: f64 = 1e-13;
const REFRESH_EVERY: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("simplex failed to converge after {iterations} iterations; last pivots: {trace}")]
    NumericalFailure { iterations: usize, trace: String },
    #[error("no certificate to check: solution status is {0}")]
    NoCertificate(LpStatus),
    #[error("malformed LP text at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

impl RowKind {
    fn symbol(self) -> &'static str {
        match self {
            RowKind::Le => "<=",
            RowKind::Ge => ">=",
            RowKind::Eq => "=",
        }
    }
}

/// `maximize c·x` subject to typed rows and variable bounds.
///
/// Lower bounds must be finite; upper bounds may be `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    n_vars: usize,
    objective: Vec<f64>,
    coeffs: Vec<f64>,
    kinds: Vec<RowKind>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearProgram {
    /// Starts a program with `objective.len()` variables bounded to `[0, ∞)`.
    pub fn new(objective: Vec<f64>) -> Result<Self, LpError> {
        if let Some(j) = objective.iter().position(|c| !c.is_finite()) {
            return Err(LpError::InvalidData(format!(
                "objective coefficient {j} is not finite"
            )));
        }
        let n = objective.len();
        Ok(Self {
            n_vars: n,
            objective,
            coeffs: Vec::new(),
            kinds: Vec::new(),
            rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        })
    }

    pub fn from_dense(
        objective: Vec<f64>,
        rows: Vec<Vec<f64>>,
        kinds: Vec<RowKind>,
        rhs: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self, LpError> {
        let mut lp = Self::new(objective)?;
        if rows.len() != kinds.len() || rows.len() != rhs.len() {
            return Err(LpError::Dimension(format!(
                "{} rows, {} row kinds, {} right-hand sides",
                rows.len(),
                kinds.len(),
                rhs.len()
            )));
        }
        if lower.len() != lp.n_vars || upper.len() != lp.n_vars {
            return Err(LpError::Dimension(format!(
                "{} variables but {} lower / {} upper bounds",
                lp.n_vars,
                lower.len(),
                upper.len()
            )));
        }
        for (j, (lo, hi)) in lower.into_iter().zip(upper).enumerate() {
            lp.set_bounds(j, lo, hi)?;
        }
        for ((row, kind), b) in rows.into_iter().zip(kinds).zip(rhs) {
            lp.add_row(&row, kind, b)?;
        }
        Ok(lp)
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> Result<(), LpError> {
        if var >= self.n_vars {
            return Err(LpError::Dimension(format!(
                "variable {var} out of range (n = {})",
                self.n_vars
            )));
        }
        if !lower.is_finite() || upper.is_nan() || upper == f64::NEG_INFINITY {
            return Err(LpError::InvalidData(format!(
                "variable {var}: bounds [{lower}, {upper}]"
            )));
        }
        if lower > upper {
            return Err(LpError::InvalidData(format!(
                "variable {var}: lower bound {lower} exceeds upper bound {upper}"
            )));
        }
        self.lower[var] = lower;
        self.upper[var] = upper;
        Ok(())
    }

    pub fn add_row(&mut self, coeffs: &[f64], kind: RowKind, rhs: f64) -> Result<usize, LpError> {
        if coeffs.len() != self.n_vars {
            return Err(LpError::Dimension(format!(
                "row has {} coefficients, expected {}",
                coeffs.len(),
                self.n_vars
            )));
        }
        let terms: Vec<(usize, f64)> = coeffs.iter().copied().enumerate().collect();
        self.add_row_sparse(&terms, kind, rhs)
    }

    /// Adds a row given as `(variable, coefficient)` pairs; repeated
    /// variables accumulate.
    pub fn add_row_sparse(
        &mut self,
        terms: &[(usize, f64)],
        kind: RowKind,
        rhs: f64,
    ) -> Result<usize, LpError> {
        let row = self.kinds.len();
        if !rhs.is_finite() {
            return Err(LpError::InvalidData(format!(
                "row {row}: right-hand side {rhs} is not finite"
            )));
        }
        let mut dense = vec![0.0; self.n_vars];
        for &(j, a) in terms {
            if j >= self.n_vars {
                return Err(LpError::Dimension(format!(
                    "row {row}: variable {j} out of range"
                )));
            }
            if !a.is_finite() {
                return Err(LpError::InvalidData(format!(
                    "row {row}: coefficient of {j} is not finite"
                )));
            }
            dense[j] += a;
        }
        self.coeffs.extend_from_slice(&dense);
        self.kinds.push(kind);
        self.rhs.push(rhs);
        Ok(row)
    }

    pub fn num_vars(&self) -> usize {
        self.n_vars
    }

    pub fn num_rows(&self) -> usize {
        self.kinds.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coeffs[i * self.n_vars..(i + 1) * self.n_vars]
    }

    pub fn row_kind(&self, i: usize) -> RowKind {
        self.kinds[i]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Interval `[L, U]` the activity of row `i` must lie in.
    pub fn row_bounds(&self, i: usize) -> (f64, f64) {
        let b = self.rhs[i];
        match self.kinds[i] {
            RowKind::Le => (f64::NEG_INFINITY, b),
            RowKind::Ge => (b, f64::INFINITY),
            RowKind::Eq => (b, b),
        }
    }

    pub fn row_activity(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).iter().zip(x).map(|(a, v)| a * v).sum()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Serialises the program in the line-oriented debug format described in
    /// the README. Floats use shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lp v1");
        let _ = writeln!(out, "vars {} rows {}", self.n_vars, self.num_rows());
        let _ = write!(out, "max");
        for c in &self.objective {
            let _ = write!(out, " {c:?}");
        }
        out.push('\n');
        for j in 0..self.n_vars {
            let _ = writeln!(
                out,
                "bound {j} {:?} {}",
                self.lower[j],
                fmt_bound(self.upper[j])
            );
        }
        for i in 0..self.num_rows() {
            let _ = write!(out, "row {} {:?} :", self.kinds[i].symbol(), self.rhs[i]);
            for (j, a) in self.row(i).iter().enumerate() {
                if *a != 0.0 {
                    let _ = write!(out, " {j}:{a:?}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, LpError> {
        let perr = |line: usize, msg: &str| LpError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, header) = lines.next().ok_or_else(|| perr(1, "empty input"))?;
        if header != "lp v1" {
            return Err(perr(ln, "expected header `lp v1`"));
        }
        let (ln, dims) = lines
            .next()
            .ok_or_else(|| perr(ln + 1, "missing dimensions"))?;
        let dims: Vec<&str> = dims.split_whitespace().collect();
        if dims.len() != 4 || dims[0] != "vars" || dims[2] != "rows" {
            return Err(perr(ln, "expected `vars <n> rows <m>`"));
        }
        let n: usize = dims[1]
            .parse()
            .map_err(|_| perr(ln, "bad variable count"))?;
        let m: usize = dims[3].parse().map_err(|_| perr(ln, "bad row count"))?;
        let (ln, obj) = lines
            .next()
            .ok_or_else(|| perr(ln + 1, "missing objective"))?;
        let mut tokens = obj.split_whitespace();
        if tokens.next() != Some("max") {
            return Err(perr(ln, "objective line must start with `max`"));
        }
        let objective = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| perr(ln, "bad objective coefficient"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if objective.len() != n {
            return Err(perr(ln, "objective length does not match variable count"));
        }
        let mut lp = Self::new(objective)?;
        for (ln, line) in lines {
            let mut tok = line.split_whitespace();
            match tok.next() {
                Some("bound") => {
                    let parts: Vec<&str> = tok.collect();
                    if parts.len() != 3 {
                        return Err(perr(ln, "expected `bound <j> <lo> <hi>`"));
                    }
                    let j: usize = parts[0]
                        .parse()
                        .map_err(|_| perr(ln, "bad variable index"))?;
                    let lo: f64 = parts[1].parse().map_err(|_| perr(ln, "bad lower bound"))?;
                    let hi = parse_bound(parts[2]).ok_or_else(|| perr(ln, "bad upper bound"))?;
                    lp.set_bounds(j, lo, hi)
                        .map_err(|e| perr(ln, &e.to_string()))?;
                }
                Some("row") => {
                    let kind = match tok.next() {
                        Some("<=") => RowKind::Le,
                        Some(">=") => RowKind::Ge,
                        Some("=") => RowKind::Eq,
                        _ => return Err(perr(ln, "bad row kind")),
                    };
                    let rhs: f64 = tok
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| perr(ln, "bad right-hand side"))?;
                    if tok.next() != Some(":") {
                        return Err(perr(ln, "expected `:` after right-hand side"));
                    }
                    let mut terms = Vec::new();
                    for t in tok {
                        let (j, a) = t
                            .split_once(':')
                            .ok_or_else(|| perr(ln, "expected `j:coef`"))?;
                        let j: usize = j.parse().map_err(|_| perr(ln, "bad column index"))?;
                        let a: f64 = a.parse().map_err(|_| perr(ln, "bad coefficient"))?;
                        terms.push((j, a));
                    }
                    lp.add_row_sparse(&terms, kind, rhs)
                        .map_err(|e| perr(ln, &e.to_string()))?;
                }
                _ => return Err(perr(ln, "expected `bound` or `row`")),
            }
        }
        if lp.num_rows() != m {
            return Err(perr(0, "row count does not match header"));
        }
        Ok(lp)
    }
}

fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v:?}")
    }
}

fn parse_bound(t: &str) -> Option<f64> {
    if t == "inf" {
        Some(f64::INFINITY)
    } else {
        t.parse().ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row prices `y`; for a maximisation, `y_i > 0` means relaxing the
    /// upper side of row `i` improves the objective.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub max_primal_residual: f64,
    pub worst_row: Option<usize>,
    /// Rows whose residual exceeds `1e-7·(1 + |b_i|)`.
    pub violated_rows: Vec<usize>,
    pub max_bound_violation: f64,
    pub worst_var: Option<usize>,
    pub duality_gap: f64,
    /// Largest reduced cost (or row price) pointing at an infinite bound.
    pub dual_infeasibility: f64,
}

impl ResidualReport {
    pub fn is_clean(&self) -> bool {
        self.violated_rows.is_empty()
            && self.max_bound_violation <= 1e-9
            && self.dual_infeasibility <= OPTIMALITY_TOL
    }
}

/// Recomputes primal residuals, bound violations and the duality gap of an
/// optimal solution from scratch.
pub fn check_solution(lp: &LinearProgram, sol: &LpSolution) -> Result<ResidualReport, LpError> {
    if sol.status != LpStatus::Optimal {
        return Err(LpError::NoCertificate(sol.status));
    }
    if sol.x.len() != lp.num_vars() || sol.duals.len() != lp.num_rows() {
        return Err(LpError::Dimension("solution does not match program".into()));
    }
    let x = &sol.x;
    let mut report = ResidualReport {
        max_primal_residual: 0.0,
        worst_row: None,
        violated_rows: Vec::new(),
        max_bound_violation: 0.0,
        worst_var: None,
        duality_gap: 0.0,
        dual_infeasibility: 0.0,
    };
    for i in 0..lp.num_rows() {
        let act = lp.row_activity(i, x);
        let (lo, hi) = lp.row_bounds(i);
        let r = (lo - act).max(act - hi).max(0.0);
        if r > report.max_primal_residual {
            report.max_primal_residual = r;
            report.worst_row = Some(i);
        }
        if r > FEASIBILITY_TOL * (1.0 + lp.rhs[i].abs()) {
            report.violated_rows.push(i);
        }
    }
    for j in 0..lp.num_vars() {
        let v = (lp.lower[j] - x[j]).max(x[j] - lp.upper[j]).max(0.0);
        if v > report.max_bound_violation {
            report.max_bound_violation = v;
            report.worst_var = Some(j);
        }
    }

    let mut dual_obj = 0.0;
    let mut term = |price: f64, lo: f64, hi: f64, report: &mut ResidualReport| {
        if price.abs() <= 1e-12 {
            return;
        }
        let bound = if price > 0.0 { hi } else { lo };
        if bound.is_finite() {
            dual_obj += price * bound;
        } else {
            report.dual_infeasibility = report.dual_infeasibility.max(price.abs());
        }
    };
    for i in 0..lp.num_rows() {
        let (lo, hi) = lp.row_bounds(i);
        term(sol.duals[i], lo, hi, &mut report);
    }
    for j in 0..lp.num_vars() {
        let col_dot: f64 = (0..lp.num_rows())
            .map(|i| lp.row(i)[j] * sol.duals[i])
            .sum();
        let d = lp.objective[j] - col_dot;
        term(d, lp.lower[j], lp.upper[j], &mut report);
    }
    report.duality_gap = (dual_obj - lp.objective_value(x)).abs();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    m: usize,
    cols: usize,
    n_struct: usize,
    first_art: usize,
    t: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    iterations: usize,
    trace: Vec<(usize, usize)>,
}

enum Step {
    Optimal,
    Unbounded,
    Progress,
}

/// Solves `lp` to optimality, or reports infeasibility / unboundedness.
/// Deterministic: identical programs yield bit-identical solutions.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let mut tab = Tableau::build(lp);
    let limit = 50 * (tab.m + tab.cols) + 1000;

    if tab.cols > tab.first_art {
        tab.set_phase_costs(true);
        tab.run(limit)?;
        let infeas: f64 = (tab.first_art..tab.cols).map(|j| tab.x[j]).sum();
        let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeas > FEASIBILITY_TOL * scale {
            return Ok(tab.solution(lp, LpStatus::Infeasible));
        }
        tab.retire_artificials();
    }
    tab.set_objective(&lp.objective);
    let status = match tab.run(limit)? {
        true => LpStatus::Optimal,
        false => LpStatus::Unbounded,
    };
    Ok(tab.solution(lp, status))
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.num_rows();
        let n = lp.num_vars();
        let mut x: Vec<f64> = lp.lower.clone();
        let mut lb = lp.lower.clone();
        let mut ub = lp.upper.clone();
        let mut state = vec![VarState::AtLower; n];
        for i in 0..m {
            let (lo, hi) = lp.row_bounds(i);
            lb.push(lo);
            ub.push(hi);
            state.push(VarState::Basic);
            x.push(lp.row_activity(i, &lp.lower));
        }

        // Rows whose starting slack is out of bounds get an artificial.
        let mut art_rows = Vec::new();
        for i in 0..m {
            let s = n + i;
            let v = x[s];
            let tol = FEASIBILITY_TOL * (1.0 + lp.rhs[i].abs());
            if v > ub[s] + tol {
                art_rows.push((i, -1.0, ub[s]));
            } else if v < lb[s] - tol {
                art_rows.push((i, 1.0, lb[s]));
            }
        }
        let first_art = n + m;
        let cols = first_art + art_rows.len();
        let mut t = vec![0.0; m * cols];
        let mut basis: Vec<usize> = (0..m).map(|i| n + i).collect();
        for i in 0..m {
            let row = &mut t[i * cols..(i + 1) * cols];
            for (j, a) in lp.row(i).iter().enumerate() {
                row[j] = -a;
            }
            row[n + i] = 1.0;
        }
        for (k, &(i, sigma, bound)) in art_rows.iter().enumerate() {
            let a = first_art + k;
            let s = n + i;
            // Row reads a_i·x − s_i + σ·art = 0 with art basic.
            let row = &mut t[i * cols..(i + 1) * cols];
            for (j, v) in lp.row(i).iter().enumerate() {
                row[j] = v / sigma;
            }
            row[s] = -1.0 / sigma;
            row[a] = 1.0;
            basis[i] = a;
            state[s] = if bound == ub[s] {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
            x[s] = bound;
            x.push(0.0);
            lb.push(0.0);
            ub.push(f64::INFINITY);
            state.push(VarState::Basic);
        }
        let mut tab = Self {
            m,
            cols,
            n_struct: n,
            first_art,
            t,
            d: vec![0.0; cols],
            cost: vec![0.0; cols],
            lb,
            ub,
            x,
            state,
            basis,
            iterations: 0,
            trace: Vec::new(),
        };
        tab.refresh_basics();
        tab
    }

    fn set_phase_costs(&mut self, phase_one: bool) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        if phase_one {
            for j in self.first_art..self.cols {
                self.cost[j] = -1.0;
            }
        }
        self.recompute_reduced_costs();
    }

    fn set_objective(&mut self, c: &[f64]) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        self.cost[..c.len()].copy_from_slice(c);
        self.recompute_reduced_costs();
    }

    fn recompute_reduced_costs(&mut self) {
        let cols = self.cols;
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * cols..(i + 1) * cols];
            for (dj, tij) in self.d.iter_mut().zip(row) {
                *dj -= cb * tij;
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = 0.0;
        }
    }

    fn refresh_basics(&mut self) {
        let cols = self.cols;
        for i in 0..self.m {
            let row = &self.t[i * cols..(i + 1) * cols];
            let mut v = 0.0;
            for (j, tij) in row.iter().enumerate() {
                if *tij != 0.0 && self.state[j] != VarState::Basic {
                    v -= tij * self.x[j];
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    fn phase_objective(&self) -> f64 {
        self.cost.iter().zip(&self.x).map(|(c, v)| c * v).sum()
    }

    /// Runs simplex iterations on the current costs. Returns `true` at
    /// optimality and `false` when unbounded.
    fn run(&mut self, limit: usize) -> Result<bool, LpError> {
        let stall_limit = 3 * (self.m + self.cols);
        let mut best = self.phase_objective();
        let mut stalled = 0usize;
        let mut bland = false;
        let start = self.iterations;
        loop {
            if self.iterations - start > limit {
                let trace = self
                    .trace
                    .iter()
                    .rev()
                    .take(20)
                    .map(|(e, l)| format!("{e}->{l}"))
                    .collect::<Vec<_>>()
                    .join(",");
                return Err(LpError::NumericalFailure {
                    iterations: self.iterations,
                    trace,
                });
            }
            match self.iterate(bland) {
                Step::Optimal => return Ok(true),
                Step::Unbounded => return Ok(false),
                Step::Progress => {}
            }
            if self.iterations.is_multiple_of(REFRESH_EVERY) {
                self.refresh_basics();
            }
            let obj = self.phase_objective();
            if obj > best + 1e-12 * (1.0 + best.abs()) {
                best = obj;
                stalled = 0;
                bland = false;
            } else {
                stalled += 1;
                if stalled > stall_limit {
                    bland = true;
                }
            }
        }
    }

    fn entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.cols {
            let dir = match self.state[j] {
                VarState::Basic => continue,
                _ if self.ub[j] - self.lb[j] <= 0.0 => continue,
                VarState::AtLower if self.d[j] > OPTIMALITY_TOL => 1.0,
                VarState::AtUpper if self.d[j] < -OPTIMALITY_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = self.d[j].abs();
            // Ties (up to rounding) resolve to the lowest index.
            if score > best_score * (1.0 + 1e-11) {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    fn iterate(&mut self, bland: bool) -> Step {
        let Some((enter, dir)) = self.entering(bland) else {
            return Step::Optimal;
        };
        let cols = self.cols;

        // Ratio test over basics, then the entering variable's own range.
        let mut theta = f64::INFINITY;
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let tij = self.t[i * cols + enter];
            if tij.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let rate = -tij * dir;
            let room = if rate < 0.0 {
                if self.lb[b] == f64::NEG_INFINITY {
                    continue;
                }
                ((self.x[b] - self.lb[b]) / -rate).max(0.0)
            } else {
                if self.ub[b] == f64::INFINITY {
                    continue;
                }
                ((self.ub[b] - self.x[b]) / rate).max(0.0)
            };
            match leave {
                None => {
                    theta = room;
                    leave = Some((i, rate));
                }
                Some((li, _)) => {
                    let tie_tol = 1e-12 * (1.0 + theta);
                    if room < theta - tie_tol {
                        theta = room;
                        leave = Some((i, rate));
                    } else if room <= theta + tie_tol {
                        // Ties: larger pivot magnitude, then lower column index.
                        let incumbent = self.basis[li];
                        let better = if bland {
                            b < incumbent
                        } else {
                            let cur = self.t[li * cols + enter].abs();
                            tij.abs() > cur * (1.0 + 1e-9)
                                || (tij.abs() >= cur * (1.0 - 1e-9) && b < incumbent)
                        };
                        if better {
                            theta = theta.min(room);
                            leave = Some((i, rate));
                        }
                    }
                }
            }
        }
        let range = self.ub[enter] - self.lb[enter];
        if range <= theta {
            if range == f64::INFINITY {
                return Step::Unbounded;
            }
            // Bound flip: no basis change.
            self.shift(enter, dir * range);
            self.state[enter] = if dir > 0.0 {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
            self.x[enter] = if dir > 0.0 {
                self.ub[enter]
            } else {
                self.lb[enter]
            };
            self.iterations += 1;
            self.trace.push((enter, enter));
            return Step::Progress;
        }
        let (row, rate) = leave.expect("finite ratio implies a leaving row");
        self.shift(enter, dir * theta);
        let out = self.basis[row];
        if rate < 0.0 {
            self.state[out] = VarState::AtLower;
            self.x[out] = self.lb[out];
        } else {
            self.state[out] = VarState::AtUpper;
            self.x[out] = self.ub[out];
        }
        self.pivot(row, enter);
        self.iterations += 1;
        self.trace.push((enter, out));
        Step::Progress
    }

    /// Moves nonbasic `j` by `delta` and updates every basic value.
    fn shift(&mut self, j: usize, delta: f64) {
        let cols = self.cols;
        self.x[j] += delta;
        for i in 0..self.m {
            let tij = self.t[i * cols + j];
            if tij != 0.0 {
                let b = self.basis[i];
                self.x[b] -= tij * delta;
            }
        }
    }

    fn pivot(&mut self, row: usize, enter: usize) {
        let cols = self.cols;
        let p = self.t[row * cols + enter];
        {
            let r = &mut self.t[row * cols..(row + 1) * cols];
            for v in r.iter_mut() {
                if *v != 0.0 {
                    *v /= p;
                }
            }
            r[enter] = 1.0;
        }
        let nz: Vec<(usize, f64)> = self.t[row * cols..(row + 1) * cols]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let f = self.t[i * cols + enter];
            if f == 0.0 {
                continue;
            }
            let r = &mut self.t[i * cols..(i + 1) * cols];
            for &(j, v) in &nz {
                let nv = r[j] - f * v;
                r[j] = if nv.abs() < DROP_TOL { 0.0 } else { nv };
            }
            r[enter] = 0.0;
        }
        let f = self.d[enter];
        if f != 0.0 {
            for &(j, v) in &nz {
                let nv = self.d[j] - f * v;
                self.d[j] = if nv.abs() < DROP_TOL { 0.0 } else { nv };
            }
            self.d[enter] = 0.0;
        }
        self.basis[row] = enter;
        self.state[enter] = VarState::Basic;
    }

    /// After phase 1: pins artificials to zero and pivots basic ones out
    /// where a usable column exists.
    fn retire_artificials(&mut self) {
        let cols = self.cols;
        for j in self.first_art..self.cols {
            self.ub[j] = 0.0;
            if self.state[j] != VarState::Basic {
                self.state[j] = VarState::AtLower;
                self.x[j] = 0.0;
            }
        }
        for i in 0..self.m {
            if self.basis[i] < self.first_art {
                continue;
            }
            let mut pick: Option<(usize, f64)> = None;
            for j in 0..self.first_art {
                if self.state[j] == VarState::Basic {
                    continue;
                }
                let v = self.t[i * cols + j].abs();
                if v > 1e-7 && pick.is_none_or(|(_, best)| v > best) {
                    pick = Some((j, v));
                }
            }
            if let Some((j, _)) = pick {
                let art = self.basis[i];
                self.pivot(i, j);
                self.state[art] = VarState::AtLower;
                self.x[art] = 0.0;
            }
        }
        self.refresh_basics();
    }

    fn solution(&mut self, lp: &LinearProgram, status: LpStatus) -> LpSolution {
        if status == LpStatus::Optimal {
            self.set_objective(&lp.objective);
            // Snap nonbasics exactly onto their bounds before the last refresh.
            for j in 0..self.cols {
                match self.state[j] {
                    VarState::AtLower => self.x[j] = self.lb[j],
                    VarState::AtUpper => self.x[j] = self.ub[j],
                    VarState::Basic => {}
                }
            }
            self.refresh_basics();
        }
        let mut x = self.x[..self.n_struct].to_vec();
        for (j, v) in x.iter_mut().enumerate() {
            // Basic structurals can sit a hair outside their box after
            // elimination; clip within the feasibility tolerance.
            let tol = FEASIBILITY_TOL * (1.0 + v.abs());
            if *v < self.lb[j] && *v > self.lb[j] - tol {
                *v = self.lb[j];
            } else if *v > self.ub[j] && *v < self.ub[j] + tol {
                *v = self.ub[j];
            }
        }
        let duals = (0..self.m).map(|i| self.d[self.n_struct + i]).collect();
        LpSolution {
            status,
            objective: lp.objective_value(&x),
            x,
            duals,
            iterations: self.iterations,
        }
    }
}
