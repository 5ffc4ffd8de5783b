//! The operator's side of the story: data-driven stabilizing gains, the
//! data-driven H2-optimal gain, feasibility certification of a candidate
//! gain against a dataset, and the rank condition that makes any of it
//! solvable.
//!
//! Gain convention: every gain K in the public API closes the loop as
//! u[k] = -K x[k], so stability always means spectral_radius(A - B K) < 1.
//! The underlying data-driven parameterization produces G = U0 Q (X0 Q)^-1
//! for the loop x+ = (A + B G) x; we return K = -G and enforce
//! U0 Q + K (X0 Q) = 0 throughout.

use nalgebra::{DMatrix, DVector};

use crate::data::{is_pe, HankelPair};
use crate::error::{DdcError, Result};
use crate::lti::{svd_rank, PerformanceWeights, RANK_REL_TOL};
use crate::sdp::{solve, solver_tolerance, AffineMat, LinearMatrixProblem, Sense, SolveStatus};

/// Relative strict-inequality margin: open cones are realized as
/// `>= margin * I` with margin = STRICT_MARGIN_REL * data scale.
pub const STRICT_MARGIN_REL: f64 = 1e-6;

/// Condition-number guard on X0 Q; beyond this the outcome is downgraded
/// to inaccurate.
pub const CONDITION_LIMIT: f64 = 1e10;

/// Result of a synthesis solve: the gain, its certificate, and diagnostics.
#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    /// Feedback gain for u = -K x.
    pub k: DMatrix<f64>,
    /// Certificate matrix Q (T x n).
    pub q: DMatrix<f64>,
    /// Auxiliary matrix X from the H2 program; absent for pure
    /// stabilization.
    pub x: Option<DMatrix<f64>>,
    /// Objective value of the H2 program; absent for pure stabilization.
    pub objective: Option<f64>,
    pub status: SolveStatus,
    /// Condition number of X0 Q.
    pub x0q_condition: f64,
    /// Frobenius norm of U0 Q + K (X0 Q).
    pub residual: f64,
}

/// Largest absolute entry across the data matrices, floored at one; used to
/// make margins and residual thresholds relative to the data.
pub(crate) fn data_scale(h: &HankelPair) -> f64 {
    h.u0
        .iter()
        .chain(h.x0.iter())
        .chain(h.x1.iter())
        .fold(1.0_f64, |acc, v| acc.max(v.abs()))
}

fn input_columns(h: &HankelPair) -> Vec<DVector<f64>> {
    (0..h.horizon())
        .map(|j| h.u0.column(j).into_owned())
        .collect()
}

/// Shared preconditions for synthesis: minimum horizon and input PE of
/// order n + 1.
fn check_preconditions(h: &HankelPair) -> Result<()> {
    let n = h.state_dim();
    let m = h.input_dim();
    let t = h.horizon();
    let bound = (m + 1) * n + m;
    if t < bound {
        return Err(DdcError::Precondition(format!(
            "horizon T={t} is below the minimum (m+1)n+m = {bound} for n={n}, m={m}"
        )));
    }
    let pe = is_pe(&input_columns(h), n + 1)?;
    if !pe {
        return Err(DdcError::Precondition(format!(
            "input is not persistently exciting of order n+1 = {}",
            n + 1
        )));
    }
    Ok(())
}

/// The Stein-type LMI block of the stabilizing parameterization:
/// [[X0 Q, X1 Q], [(X1 Q)', X0 Q]].
fn scale_columns(m: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for k in 0..out.ncols() {
        out.column_mut(k).unscale_mut(d[k]);
    }
    out
}

/// Diagonal preconditioning of a data record. Trajectories can span many
/// orders of magnitude both along the horizon and across components, which
/// stalls the interior point method. Two exact transformations fix that
/// without changing any LMI's answer:
///   - right-scaling all data columns is absorbed by Q;
///   - left-scaling the state rows (same scale for X0 and X1) and the
///     input rows is a congruence of the Stein block once gains are
///     conjugated to match and Q is substituted accordingly.
struct Equilibration {
    r_u: DVector<f64>,
    r_x: DVector<f64>,
    d: DVector<f64>,
    u0: DMatrix<f64>,
    x0: DMatrix<f64>,
    x1: DMatrix<f64>,
}

impl Equilibration {
    fn new(h: &HankelPair) -> Self {
        let n = h.state_dim();
        let m = h.input_dim();
        let t = h.horizon();
        let mut r_u = DVector::from_element(m, 1.0);
        for i in 0..m {
            let norm = h.u0.row(i).norm();
            if norm > 0.0 {
                r_u[i] = norm;
            }
        }
        let mut r_x = DVector::from_element(n, 1.0);
        for i in 0..n {
            let norm = (h.x0.row(i).norm_squared() + h.x1.row(i).norm_squared()).sqrt();
            if norm > 0.0 {
                r_x[i] = norm;
            }
        }
        let scale_rows = |mat: &DMatrix<f64>, r: &DVector<f64>| {
            let mut out = mat.clone();
            for i in 0..out.nrows() {
                out.row_mut(i).unscale_mut(r[i]);
            }
            out
        };
        let u0r = scale_rows(&h.u0, &r_u);
        let x0r = scale_rows(&h.x0, &r_x);
        let x1r = scale_rows(&h.x1, &r_x);
        let mut d = DVector::from_element(t, 1.0);
        for k in 0..t {
            let norm = (u0r.column(k).norm_squared()
                + x0r.column(k).norm_squared()
                + x1r.column(k).norm_squared())
            .sqrt();
            if norm > 0.0 {
                d[k] = norm;
            }
        }
        Equilibration {
            u0: scale_columns(&u0r, &d),
            x0: scale_columns(&x0r, &d),
            x1: scale_columns(&x1r, &d),
            r_u,
            r_x,
            d,
        }
    }

    /// The gain that acts on scaled data: K' = Du^-1 K Dx.
    fn scale_gain(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = k.clone();
        for j in 0..out.nrows() {
            for i in 0..out.ncols() {
                out[(j, i)] *= self.r_x[i] / self.r_u[j];
            }
        }
        out
    }

    /// Map a certificate of the scaled problem back to raw coordinates:
    /// Q = Dd^-1 Q' Dx.
    fn unscale_q(&self, q_prime: &DMatrix<f64>) -> DMatrix<f64> {
        let mut q = q_prime.clone();
        for k in 0..q.nrows() {
            q.row_mut(k).unscale_mut(self.d[k]);
        }
        for i in 0..q.ncols() {
            q.column_mut(i).scale_mut(self.r_x[i]);
        }
        q
    }
}

/// Recover the public gain K = -U0 Q (X0 Q)^-1 and its diagnostics.
fn recover_gain(
    h: &HankelPair,
    q: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64, f64)> {
    let p = &h.x0 * q;
    let u0q = &h.u0 * q;
    let svd = p.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= RANK_REL_TOL * smax || smax == 0.0 {
        return Err(DdcError::NumericalFailure(format!(
            "X0 Q is numerically singular (sigma_min = {smin:.3e})"
        )));
    }
    let cond = smax / smin;
    let p_inv = p.clone().try_inverse().ok_or_else(|| {
        DdcError::NumericalFailure("X0 Q could not be inverted".into())
    })?;
    let k = -(&u0q * p_inv);
    let residual = (&u0q + &k * &p).norm();
    Ok((k, cond, residual))
}

/// Data-driven stabilizing gain. Solves the LMI parameterization with a
/// trace(X0 Q) objective to pin one deterministic representative out of the
/// open solution set, then returns K = -U0 Q (X0 Q)^-1.
pub fn stabilizing_gain(h: &HankelPair) -> Result<SynthesisOutcome> {
    check_preconditions(h)?;
    let n = h.state_dim();
    let t = h.horizon();
    let eq = Equilibration::new(h);
    // The constraint set is homogeneous in Q, so the margin only sets the
    // certificate's scale; unit size is where the solver is most reliable.
    let margin = 1.0;

    let mut prob = LinearMatrixProblem::new();
    let q_var = prob.add_var("Q", t, n);
    let q_expr = AffineMat::from_var(q_var);
    let p_expr = q_expr.left_mul(&eq.x0);
    let s_expr = q_expr.left_mul(&eq.x1);
    prob.require_symmetric(&p_expr);
    prob.psd(p_expr.clone(), margin);
    prob.psd(
        AffineMat::block2x2(&p_expr, &s_expr, &s_expr.transpose(), &p_expr),
        margin,
    );
    prob.set_objective(Sense::Minimize, p_expr.trace());

    let report = solve(&prob, solver_tolerance())?;
    match report.status {
        SolveStatus::Infeasible => {
            return Err(DdcError::Infeasible(
                "stabilizing LMI is infeasible for this data".into(),
            ))
        }
        SolveStatus::Failed => {
            return Err(DdcError::SolverFailure(format!(
                "stabilizing LMI solve failed: {}",
                report.detail
            )))
        }
        _ => {}
    }
    let q = report
        .value_of(q_var)
        .map(|q_prime| eq.unscale_q(&q_prime))
        .ok_or_else(|| DdcError::SolverFailure("solver returned no values".into()))?;
    let (k, cond, residual) = recover_gain(h, &q)?;
    let status = if cond > CONDITION_LIMIT {
        SolveStatus::Inaccurate
    } else {
        report.status
    };
    Ok(SynthesisOutcome {
        k,
        q,
        x: None,
        objective: None,
        status,
        x0q_condition: cond,
        residual,
    })
}

/// Is the gain `k_tilde` reachable by the operator's data-driven synthesis
/// on this data? True iff some Q satisfies the LMI together with
/// U0 Q + K~ (X0 Q) = 0; the certificate Q is returned when it exists.
pub fn feasibility_check(
    k_tilde: &DMatrix<f64>,
    h: &HankelPair,
) -> Result<(bool, Option<DMatrix<f64>>)> {
    let n = h.state_dim();
    let m = h.input_dim();
    let t = h.horizon();
    if k_tilde.nrows() != m || k_tilde.ncols() != n {
        return Err(DdcError::InvalidArgument(format!(
            "gain must be {}x{}, got {}x{}",
            m,
            n,
            k_tilde.nrows(),
            k_tilde.ncols()
        )));
    }
    let eq = Equilibration::new(h);
    let k_scaled = eq.scale_gain(k_tilde);
    // The constraint set is homogeneous in Q, so any positive margin gives
    // an equivalent yes/no answer; a unit margin keeps the certificate and
    // the infeasibility separation at unit size, where the solver is most
    // reliable.
    let margin = 1.0;
    let k_scale = k_scaled.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));

    let mut prob = LinearMatrixProblem::new();
    let q_var = prob.add_var("Q", t, n);
    let q_expr = AffineMat::from_var(q_var);
    let p_expr = q_expr.left_mul(&eq.x0);
    let s_expr = q_expr.left_mul(&eq.x1);
    prob.require_symmetric(&p_expr);
    let stein = AffineMat::block2x2(&p_expr, &s_expr, &s_expr.transpose(), &p_expr);
    prob.psd(stein.clone(), margin);
    // U0 Q + K~ (X0 Q) = 0, linear in Q for fixed K~.
    let gain_rows = q_expr.left_mul(&eq.u0).add(&p_expr.left_mul(&k_scaled));
    prob.equal_zero(gain_rows.clone());
    // A bounded objective instead of a pure feasibility pass: the interior
    // point method then terminates with a certificate on infeasible
    // instances instead of stalling.
    prob.set_objective(Sense::Minimize, p_expr.trace());

    let tol = solver_tolerance();
    let report = solve(&prob, tol)?;
    match report.status {
        SolveStatus::Infeasible => Ok((false, None)),
        SolveStatus::Feasible | SolveStatus::Optimal => {
            let q = report
                .value_of(q_var)
                .ok_or_else(|| DdcError::SolverFailure("solver returned no values".into()))?;
            Ok((true, Some(eq.unscale_q(&q))))
        }
        SolveStatus::Inaccurate | SolveStatus::Failed => {
            // Trust, but verify: accept a reduced-accuracy iterate only if
            // it actually satisfies the constraints. Thresholds are relative
            // to the iterate's own magnitude since the problem is
            // homogeneous in Q.
            let Some(q) = report.value_of(q_var) else {
                return Err(DdcError::SolverFailure(format!(
                    "feasibility solve failed: {}",
                    report.detail
                )));
            };
            let z: Vec<f64> = q.as_slice().to_vec();
            let block = stein.eval(&z);
            let sym = (&block + block.transpose()) * 0.5;
            let min_eig = sym.symmetric_eigenvalues().min();
            let eq_resid = gain_rows.eval(&z).norm();
            let q_scale = q
                .iter()
                .fold(margin, |acc, v| acc.max(v.abs()))
                * k_scale;
            if min_eig >= -10.0 * tol * q_scale && eq_resid <= 1e-6 * q_scale {
                Ok((true, Some(eq.unscale_q(&q))))
            } else {
                Err(DdcError::SolverFailure(format!(
                    "feasibility indeterminate: {} (min eig {min_eig:.3e}, residual {eq_resid:.3e})",
                    report.detail
                )))
            }
        }
    }
}

/// The H2 synthesis program shared by `h2_gain` (margin zero, the closed
/// cones exactly as written) and the attack loop's operator step (small
/// strict margin so the adversary's follow-up step has interior points).
pub(crate) fn h2_program(
    h: &HankelPair,
    weights: &PerformanceWeights,
    margin: f64,
) -> Result<SynthesisOutcome> {
    check_preconditions(h)?;
    let n = h.state_dim();
    let m = h.input_dim();
    let t = h.horizon();
    if weights.qx.nrows() != n || weights.r.nrows() != m {
        return Err(DdcError::InvalidArgument(
            "weight dimensions do not match the data".into(),
        ));
    }
    if !rank_condition(h) {
        return Err(DdcError::Precondition(format!(
            "rank([U0; X0]) < n + m = {}; the data cannot parameterize a controller",
            n + m
        )));
    }

    let r_sqrt = weights.r_sqrt();
    let mut prob = LinearMatrixProblem::new();
    let q_var = prob.add_var("Q", t, n);
    let x_var = prob.add_var("X", m, m);
    let q_expr = AffineMat::from_var(q_var);
    let x_expr = AffineMat::from_var(x_var);

    let p_expr = q_expr.left_mul(&h.x0);
    let s_expr = q_expr.left_mul(&h.x1);
    let ru_expr = q_expr.left_mul(&h.u0).left_mul(&r_sqrt);

    prob.require_symmetric(&p_expr);
    prob.require_symmetric(&x_expr);
    // [[X, R^1/2 U0 Q], [(R^1/2 U0 Q)', X0 Q]] >= 0
    prob.psd(
        AffineMat::block2x2(&x_expr, &ru_expr, &ru_expr.transpose(), &p_expr),
        margin,
    );
    // [[X0 Q - I, X1 Q], [(X1 Q)', X0 Q]] >= 0
    prob.psd(
        AffineMat::block2x2(
            &p_expr.sub(&AffineMat::identity(n)),
            &s_expr,
            &s_expr.transpose(),
            &p_expr,
        ),
        margin,
    );
    let mut obj = p_expr.left_mul(&weights.qx).trace();
    let xtr = x_expr.trace();
    obj.constant += xtr.constant;
    obj.terms.extend(xtr.terms);
    prob.set_objective(Sense::Minimize, obj);

    let report = solve(&prob, solver_tolerance())?;
    match report.status {
        SolveStatus::Infeasible => {
            return Err(DdcError::Infeasible(
                "H2 synthesis program is infeasible for this data".into(),
            ))
        }
        SolveStatus::Failed => {
            return Err(DdcError::SolverFailure(format!(
                "H2 synthesis solve failed: {}",
                report.detail
            )))
        }
        _ => {}
    }
    let q = report
        .value_of(q_var)
        .ok_or_else(|| DdcError::SolverFailure("solver returned no values".into()))?;
    let x = report
        .value_of(x_var)
        .ok_or_else(|| DdcError::SolverFailure("solver returned no values".into()))?;
    let (k, cond, residual) = recover_gain(h, &q)?;
    let status = if cond > CONDITION_LIMIT {
        SolveStatus::Inaccurate
    } else {
        report.status
    };
    Ok(SynthesisOutcome {
        k,
        q,
        x: Some(x),
        objective: report.objective,
        status,
        x0q_condition: cond,
        residual,
    })
}

/// Data-driven H2-optimal gain: minimizes trace(Qx X0 Q) + trace(X) over
/// the two-block LMI parameterization and returns K = -U0 Q (X0 Q)^-1.
pub fn h2_gain(h: &HankelPair, weights: &PerformanceWeights) -> Result<SynthesisOutcome> {
    h2_program(h, weights, 0.0)
}

/// rank([U0; X0]) = n + m, the solvability condition for every synthesis
/// in this module.
pub fn rank_condition(h: &HankelPair) -> bool {
    let stacked = stack_data(h);
    svd_rank(&stacked) == h.input_dim() + h.state_dim()
}

/// [U0; X0] stacked, exposed for the bias-attack analysis.
pub fn stack_data(h: &HankelPair) -> DMatrix<f64> {
    let m = h.input_dim();
    let n = h.state_dim();
    let t = h.horizon();
    let mut s = DMatrix::zeros(m + n, t);
    s.view_mut((0, 0), (m, t)).copy_from(&h.u0);
    s.view_mut((m, 0), (n, t)).copy_from(&h.x0);
    s
}
