//! A small modeling layer over the conic solver: named matrix variables,
//! affine matrix expressions, PSD / equality / second-order-cone constraints,
//! and trace objectives. Everything LMI-shaped in this crate goes through
//! this seam, so the backend can be swapped without touching callers.

use std::fmt::Write as _;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus,
    SupportedConeT::{PSDTriangleConeT, SecondOrderConeT, ZeroConeT},
};
use nalgebra::DMatrix;

use crate::error::{DdcError, Result};

/// Default interior-point tolerance; override with the `DDC_SOLVER_TOL`
/// environment variable.
pub const DEFAULT_TOL: f64 = 1e-8;

pub fn solver_tolerance() -> f64 {
    std::env::var("DDC_SOLVER_TOL")
        .ok()
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|t| t.is_finite() && *t > 0.0)
        .unwrap_or(DEFAULT_TOL)
}

/// Handle to a declared matrix variable: a contiguous column-major slice of
/// the flat decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    offset: usize,
    rows: usize,
    cols: usize,
}

impl Var {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn flat(&self, i: usize, j: usize) -> usize {
        self.offset + j * self.rows + i
    }
}

/// A scalar affine function of the decision vector.
#[derive(Debug, Clone, Default)]
pub struct AffineScalar {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl AffineScalar {
    /// Merge duplicate variable indices and drop zeros.
    fn compact(&mut self) {
        self.terms.sort_unstable_by_key(|(v, _)| *v);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match out.last_mut() {
                Some((lv, lc)) if *lv == v => *lc += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|(_, c)| *c != 0.0);
        self.terms = out;
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * z[v]).sum::<f64>()
    }
}

/// A matrix whose entries are affine functions of the decision vector.
/// Entries are stored column-major.
#[derive(Debug, Clone)]
pub struct AffineMat {
    rows: usize,
    cols: usize,
    constant: DMatrix<f64>,
    terms: Vec<Vec<(usize, f64)>>,
}

impl AffineMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            constant: DMatrix::zeros(rows, cols),
            terms: vec![Vec::new(); rows * cols],
        }
    }

    pub fn constant(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            constant: m.clone(),
            terms: vec![Vec::new(); m.nrows() * m.ncols()],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(&DMatrix::identity(n, n))
    }

    /// The variable itself as an expression.
    pub fn from_var(v: Var) -> Self {
        Self::from_var_cols(v, 0, v.cols)
    }

    /// A contiguous column slice `v[:, c0..c1]` of a variable.
    pub fn from_var_cols(v: Var, c0: usize, c1: usize) -> Self {
        assert!(c0 < c1 && c1 <= v.cols, "column slice out of range");
        let cols = c1 - c0;
        let mut e = Self::zeros(v.rows, cols);
        for j in 0..cols {
            for i in 0..v.rows {
                e.terms[j * v.rows + i].push((v.flat(i, c0 + j), 1.0));
            }
        }
        e
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> AffineScalar {
        let idx = j * self.rows + i;
        let mut s = AffineScalar {
            constant: self.constant[(i, j)],
            terms: self.terms[idx].clone(),
        };
        s.compact();
        s
    }

    /// L * self for a constant L.
    pub fn left_mul(&self, l: &DMatrix<f64>) -> Self {
        assert_eq!(l.ncols(), self.rows, "left multiply shape mismatch");
        let mut out = Self::zeros(l.nrows(), self.cols);
        out.constant = l * &self.constant;
        for j in 0..self.cols {
            for i in 0..l.nrows() {
                let dst = &mut out.terms[j * l.nrows() + i];
                for k in 0..self.rows {
                    let c = l[(i, k)];
                    if c == 0.0 {
                        continue;
                    }
                    for &(v, w) in &self.terms[j * self.rows + k] {
                        dst.push((v, c * w));
                    }
                }
            }
        }
        out.compacted()
    }

    /// self * R for a constant R.
    pub fn right_mul(&self, r: &DMatrix<f64>) -> Self {
        assert_eq!(self.cols, r.nrows(), "right multiply shape mismatch");
        let mut out = Self::zeros(self.rows, r.ncols());
        out.constant = &self.constant * r;
        for j in 0..r.ncols() {
            for i in 0..self.rows {
                let dst = &mut out.terms[j * self.rows + i];
                for k in 0..self.cols {
                    let c = r[(k, j)];
                    if c == 0.0 {
                        continue;
                    }
                    for &(v, w) in &self.terms[k * self.rows + i] {
                        dst.push((v, c * w));
                    }
                }
            }
        }
        out.compacted()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        out.constant = self.constant.transpose();
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.terms[i * self.cols + j] = self.terms[j * self.rows + i].clone();
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        out.constant += &other.constant;
        for (dst, src) in out.terms.iter_mut().zip(&other.terms) {
            dst.extend_from_slice(src);
        }
        out.compacted()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.constant *= factor;
        for terms in &mut out.terms {
            for (_, c) in terms.iter_mut() {
                *c *= factor;
            }
        }
        out
    }

    pub fn add_constant(&self, m: &DMatrix<f64>) -> Self {
        let mut out = self.clone();
        out.constant += m;
        out
    }

    /// Stack a 2x2 grid of expressions into one matrix.
    pub fn block2x2(tl: &Self, tr: &Self, bl: &Self, br: &Self) -> Self {
        assert_eq!(tl.rows, tr.rows);
        assert_eq!(bl.rows, br.rows);
        assert_eq!(tl.cols, bl.cols);
        assert_eq!(tr.cols, br.cols);
        let rows = tl.rows + bl.rows;
        let cols = tl.cols + tr.cols;
        let mut out = Self::zeros(rows, cols);
        let mut place = |block: &Self, r0: usize, c0: usize| {
            for j in 0..block.cols {
                for i in 0..block.rows {
                    out.constant[(r0 + i, c0 + j)] = block.constant[(i, j)];
                    out.terms[(c0 + j) * rows + (r0 + i)] =
                        block.terms[j * block.rows + i].clone();
                }
            }
        };
        place(tl, 0, 0);
        place(tr, 0, tl.cols);
        place(bl, tl.rows, 0);
        place(br, tl.rows, tl.cols);
        out
    }

    /// Trace as a scalar affine function (square expressions only).
    pub fn trace(&self) -> AffineScalar {
        assert_eq!(self.rows, self.cols, "trace needs a square expression");
        let mut s = AffineScalar::default();
        for i in 0..self.rows {
            let e = self.entry(i, i);
            s.constant += e.constant;
            s.terms.extend(e.terms);
        }
        s.compact();
        s
    }

    /// Evaluate at a concrete decision vector.
    pub fn eval(&self, z: &[f64]) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for j in 0..self.cols {
            for i in 0..self.rows {
                for &(v, c) in &self.terms[j * self.rows + i] {
                    m[(i, j)] += c * z[v];
                }
            }
        }
        m
    }

    fn compacted(mut self) -> Self {
        for terms in &mut self.terms {
            let mut s = AffineScalar {
                constant: 0.0,
                terms: std::mem::take(terms),
            };
            s.compact();
            *terms = s.terms;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
    Feasibility,
}

#[derive(Debug, Clone)]
enum Constraint {
    /// sym(expr) - margin * I is positive semidefinite.
    Psd { expr: AffineMat, margin: f64 },
    /// Every entry of expr equals zero.
    EqualZero { expr: AffineMat },
    /// Frobenius norm of expr is at most `bound` (a constant).
    FrobeniusLe { expr: AffineMat, bound: f64 },
}

/// A linear-objective conic program over named matrix variables.
#[derive(Debug, Clone)]
pub struct LinearMatrixProblem {
    var_names: Vec<(String, Var)>,
    nvars: usize,
    sense: Sense,
    objective: AffineScalar,
    constraints: Vec<Constraint>,
}

impl Default for LinearMatrixProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl LinearMatrixProblem {
    pub fn new() -> Self {
        Self {
            var_names: Vec::new(),
            nvars: 0,
            sense: Sense::Feasibility,
            objective: AffineScalar::default(),
            constraints: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: &str, rows: usize, cols: usize) -> Var {
        assert!(rows > 0 && cols > 0, "variable must have positive shape");
        let v = Var {
            offset: self.nvars,
            rows,
            cols,
        };
        self.nvars += rows * cols;
        self.var_names.push((name.to_string(), v));
        v
    }

    pub fn set_objective(&mut self, sense: Sense, obj: AffineScalar) {
        self.sense = sense;
        self.objective = obj;
    }

    /// sym(expr) ⪰ margin * I. A zero margin is the closed cone; strict
    /// inequalities are approximated by a positive margin.
    pub fn psd(&mut self, expr: AffineMat, margin: f64) {
        assert_eq!(expr.nrows(), expr.ncols(), "PSD block must be square");
        self.constraints.push(Constraint::Psd { expr, margin });
    }

    /// expr = 0 entrywise.
    pub fn equal_zero(&mut self, expr: AffineMat) {
        self.constraints.push(Constraint::EqualZero { expr });
    }

    /// expr = expr' as linear equalities on the strictly-upper entries.
    pub fn require_symmetric(&mut self, expr: &AffineMat) {
        assert_eq!(expr.nrows(), expr.ncols());
        self.equal_zero(expr.sub(&expr.transpose()));
    }

    /// ||expr||_F <= bound for a constant bound.
    pub fn frobenius_le(&mut self, expr: AffineMat, bound: f64) {
        assert!(bound.is_finite() && bound >= 0.0, "bound must be finite");
        self.constraints.push(Constraint::FrobeniusLe { expr, bound });
    }

    pub fn num_scalars(&self) -> usize {
        self.nvars
    }

    /// Text dump (dimensions plus coefficient triplets) for offline
    /// debugging of a misbehaving program.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vars: {} scalars", self.nvars);
        for (name, v) in &self.var_names {
            let _ = writeln!(s, "  {name}: {}x{} @ {}", v.rows, v.cols, v.offset);
        }
        let _ = writeln!(s, "sense: {:?}", self.sense);
        let _ = writeln!(
            s,
            "objective: const={} terms={:?}",
            self.objective.constant, self.objective.terms
        );
        for (i, c) in self.constraints.iter().enumerate() {
            match c {
                Constraint::Psd { expr, margin } => {
                    let _ = writeln!(
                        s,
                        "c{i}: PSD {}x{} margin={margin}",
                        expr.nrows(),
                        expr.ncols()
                    );
                }
                Constraint::EqualZero { expr } => {
                    let _ = writeln!(s, "c{i}: EQ0 {}x{}", expr.nrows(), expr.ncols());
                }
                Constraint::FrobeniusLe { expr, bound } => {
                    let _ = writeln!(
                        s,
                        "c{i}: FRO {}x{} <= {bound}",
                        expr.nrows(),
                        expr.ncols()
                    );
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Inaccurate,
    Infeasible,
    Failed,
}

/// Outcome of one conic solve: mapped status, flat solution, objective in the
/// caller's sense, and the solver's primal/dual residuals.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub values: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub residuals: (f64, f64),
    pub iterations: u32,
    pub detail: String,
}

impl SolveReport {
    pub fn is_usable(&self) -> bool {
        matches!(
            self.status,
            SolveStatus::Optimal | SolveStatus::Feasible | SolveStatus::Inaccurate
        )
    }

    /// Extract a variable's value from the flat solution.
    pub fn value_of(&self, v: Var) -> Option<DMatrix<f64>> {
        let z = self.values.as_ref()?;
        let mut m = DMatrix::zeros(v.rows, v.cols);
        for j in 0..v.cols {
            for i in 0..v.rows {
                m[(i, j)] = z[v.flat(i, j)];
            }
        }
        Some(m)
    }
}

struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    nrows: usize,
}

impl Triplets {
    fn new() -> Self {
        Self {
            rows: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
            nrows: 0,
        }
    }

    fn push_row(&mut self, terms: &[(usize, f64)]) -> usize {
        let r = self.nrows;
        for &(c, v) in terms {
            if v != 0.0 {
                self.rows.push(r);
                self.cols.push(c);
                self.vals.push(v);
            }
        }
        self.nrows += 1;
        r
    }

    fn into_csc(self, ncols: usize) -> CscMatrix<f64> {
        let nnz = self.vals.len();
        let mut order: Vec<usize> = (0..nnz).collect();
        order.sort_unstable_by_key(|&k| (self.cols[k], self.rows[k]));
        let mut colptr = vec![0usize; ncols + 1];
        let mut rowval = Vec::with_capacity(nnz);
        let mut nzval = Vec::with_capacity(nnz);
        for &k in &order {
            colptr[self.cols[k] + 1] += 1;
            rowval.push(self.rows[k]);
            nzval.push(self.vals[k]);
        }
        for c in 0..ncols {
            colptr[c + 1] += colptr[c];
        }
        CscMatrix::new(self.nrows, ncols, colptr, rowval, nzval)
    }
}

/// Solve the program with the conic backend at the given tolerance.
pub fn solve(p: &LinearMatrixProblem, tol: f64) -> Result<SolveReport> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(DdcError::InvalidArgument(format!(
            "solver tolerance must be positive, got {tol}"
        )));
    }
    if p.nvars == 0 {
        return Err(DdcError::InvalidArgument(
            "program declares no variables".into(),
        ));
    }

    // Objective: Clarabel minimizes q'x; flip for maximization.
    let obj_sign = match p.sense {
        Sense::Maximize => -1.0,
        _ => 1.0,
    };
    let mut q = vec![0.0; p.nvars];
    if p.sense != Sense::Feasibility {
        for &(v, c) in &p.objective.terms {
            q[v] += obj_sign * c;
        }
    }

    // Order: all equality rows (one zero cone), then each SOC, then each PSD
    // triangle, matching the cone list handed to the solver.
    let mut trip = Triplets::new();
    let mut b: Vec<f64> = Vec::new();
    let mut cones = Vec::new();

    let mut eq_rows = 0usize;
    for c in &p.constraints {
        if let Constraint::EqualZero { expr } = c {
            for j in 0..expr.ncols() {
                for i in 0..expr.nrows() {
                    let e = expr.entry(i, j);
                    if e.terms.is_empty() && e.constant == 0.0 {
                        continue;
                    }
                    // sum(coeff * z) = -const
                    trip.push_row(&e.terms);
                    b.push(-e.constant);
                    eq_rows += 1;
                }
            }
        }
    }
    if eq_rows > 0 {
        cones.push(ZeroConeT(eq_rows));
    }

    for c in &p.constraints {
        if let Constraint::FrobeniusLe { expr, bound } = c {
            // s = b - Ax in SOC: s_0 = bound, s_k = entry values.
            trip.push_row(&[]);
            b.push(*bound);
            let mut dim = 1;
            for j in 0..expr.ncols() {
                for i in 0..expr.nrows() {
                    let e = expr.entry(i, j);
                    let negated: Vec<(usize, f64)> =
                        e.terms.iter().map(|&(v, c)| (v, -c)).collect();
                    trip.push_row(&negated);
                    b.push(e.constant);
                    dim += 1;
                }
            }
            cones.push(SecondOrderConeT(dim));
        }
    }

    for c in &p.constraints {
        if let Constraint::Psd { expr, margin } = c {
            let k = expr.nrows();
            // Upper triangle, column-major, off-diagonal scaled by sqrt(2);
            // the expression is symmetrized entrywise first.
            for j in 0..k {
                for i in 0..=j {
                    let mut e = expr.entry(i, j);
                    if i != j {
                        let e_ji = expr.entry(j, i);
                        e.constant = 0.5 * (e.constant + e_ji.constant);
                        let halved: Vec<(usize, f64)> = e
                            .terms
                            .iter()
                            .map(|&(v, c)| (v, 0.5 * c))
                            .chain(e_ji.terms.iter().map(|&(v, c)| (v, 0.5 * c)))
                            .collect();
                        e.terms = halved;
                        e.compact();
                    }
                    let factor = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                    let shift = if i == j { *margin } else { 0.0 };
                    let negated: Vec<(usize, f64)> = e
                        .terms
                        .iter()
                        .map(|&(v, c)| (v, -factor * c))
                        .collect();
                    trip.push_row(&negated);
                    b.push(factor * (e.constant - shift));
                }
            }
            cones.push(PSDTriangleConeT(k));
        }
    }

    let a_mat = trip.into_csc(p.nvars);
    let p_mat = CscMatrix::<f64>::zeros((p.nvars, p.nvars));
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: tol,
        tol_gap_rel: tol,
        tol_feas: tol,
        ..DefaultSettings::default()
    };

    let mut solver = DefaultSolver::new(&p_mat, &q, &a_mat, &b, &cones, settings)
        .map_err(|e| DdcError::SolverFailure(format!("problem rejected by solver: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;

    let status = match sol.status {
        SolverStatus::Solved => {
            if p.sense == Sense::Feasibility {
                SolveStatus::Feasible
            } else {
                SolveStatus::Optimal
            }
        }
        SolverStatus::AlmostSolved => SolveStatus::Inaccurate,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        _ => SolveStatus::Failed,
    };

    let usable = matches!(
        status,
        SolveStatus::Optimal | SolveStatus::Feasible | SolveStatus::Inaccurate
    );
    let objective = if usable && p.sense != Sense::Feasibility {
        Some(obj_sign * sol.obj_val + p.objective.constant)
    } else {
        None
    };
    let detail = format!("{:?} in {} iterations", sol.status, sol.iterations);

    Ok(SolveReport {
        status,
        values: usable.then(|| sol.x.clone()),
        objective,
        residuals: (sol.r_prim, sol.r_dual),
        iterations: sol.iterations,
        detail,
    })
}
