//! Performance-degrading sensor attack against data-driven H2 synthesis.
//!
//! The adversary wants the operator's synthesized gain to perform badly on
//! the true plant while staying invisible to the energy detector and
//! keeping the operator's program solvable. The underlying max-min program
//! is nonconvex, so it is attacked by alternation: the operator's convex
//! step (fit (Q, X) to the current data) and the adversary's convex step
//! (at fixed (Q, X), pick attack samples maximizing the operator's cost
//! surrogate subject to the same LMI blocks, the stealth bound, and shift
//! consistency of the samples).
//!
//! The module also covers the constant-bias attack class: a rank-condition
//! guarantee for the adversary, and the input-design probe the operator can
//! use to void that guarantee.

use nalgebra::{DMatrix, DVector};

use crate::data::{AttackPlan, AttackPolicy, HankelPair};
use crate::detector::DetectorConfig;
use crate::error::{DdcError, Result};
use crate::lti::{h2_cost, PerformanceWeights, SystemRealization, RANK_REL_TOL};
use crate::sdp::{solve, solver_tolerance, AffineMat, LinearMatrixProblem, Sense, SolveStatus};
use crate::synthesis::{data_scale, h2_program, stack_data, SynthesisOutcome, STRICT_MARGIN_REL};

/// Attack halvings tolerated before the alternation gives up on an
/// operator-infeasible plan.
const MAX_HALVINGS: usize = 5;

/// Why the alternation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Ran all requested iterations.
    MaxIters,
    /// Successive operator gains agreed to within the tolerance.
    GainConverged,
    /// A sub-step failed and backtracking could not recover; the state
    /// holds the last successful iteration.
    SolverFailure,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::MaxIters => "max-iters",
            StopReason::GainConverged => "gain-converged",
            StopReason::SolverFailure => "solver-failure",
        };
        f.write_str(s)
    }
}

/// Rolling state of the alternating attack.
#[derive(Debug, Clone)]
pub struct AlternatingState {
    /// Last completed iteration (0 = clean solve only).
    pub iteration: usize,
    /// Operator certificate at the last iteration.
    pub q: DMatrix<f64>,
    pub x: DMatrix<f64>,
    /// Operator gain at the last iteration.
    pub gain: DMatrix<f64>,
    /// Data the operator saw at the last iteration.
    pub attacked: HankelPair,
    /// Gains K(0), K(1), ... including the clean one.
    pub gain_history: Vec<DMatrix<f64>>,
    /// Adversary-step optimal values, one per iteration, on the scale of
    /// the operator's trace objective.
    pub objective_history: Vec<f64>,
    /// Detector ratio ||W X0||_F / ||U0||_F of the data the operator saw,
    /// aligned with `gain_history` (entry 0 is the clean record).
    pub stealth_history: Vec<f64>,
    /// Diagnostics accumulated along the way (fallbacks, halvings).
    pub notes: Vec<String>,
    pub stop_reason: StopReason,
}

/// One adversary step: the plan, the value it achieved, and an optional
/// diagnostic when the program had to fall back.
#[derive(Debug, Clone)]
pub struct AdversaryStep {
    pub plan: AttackPlan,
    /// trace(Qx Xtilde0 Q) + trace(X) at the returned plan, comparable to
    /// the operator-step objective.
    pub objective: f64,
    pub note: Option<String>,
}

/// Outcome of deploying a plan: what the operator would synthesize from the
/// attacked record and what it costs on the true plant.
#[derive(Debug, Clone)]
pub struct AttackImpact {
    pub k_a: DMatrix<f64>,
    pub j_a: f64,
    pub j_star: f64,
    /// j_a / j_star; infinite when the deployed gain destabilizes.
    pub ratio: f64,
}

/// Add an attack plan to a clean pair: inputs untouched, states shifted by
/// the plan's sample columns.
pub fn apply_plan(h: &HankelPair, plan: &AttackPlan) -> Result<HankelPair> {
    if plan.dim() != h.state_dim() || plan.horizon() != h.horizon() {
        return Err(DdcError::InvalidArgument(format!(
            "plan is {}x{} samples, data expects {}x{}",
            plan.dim(),
            plan.horizon(),
            h.state_dim(),
            h.horizon()
        )));
    }
    HankelPair::new(h.u0.clone(), &h.x0 + &plan.a0, &h.x1 + &plan.a1)
}

/// Algorithm step 1, the operator's view: the H2 program on whatever data
/// it has, with a small interior margin so the adversary's next step has
/// room to move.
pub fn operator_step(
    h_attacked: &HankelPair,
    weights: &PerformanceWeights,
) -> Result<SynthesisOutcome> {
    let margin = STRICT_MARGIN_REL * data_scale(h_attacked);
    h2_program(h_attacked, weights, margin)
}

/// Algorithm step 2, the adversary's view: at fixed (Q, X) choose attack
/// samples a[0..T] maximizing trace(Qx (X0 + A0) Q) subject to the
/// operator's two LMI blocks (now affine in a), the stealth bound
/// ||W (X0 + A0)||_F <= gamma ||U0||_F, and exact shift consistency of
/// A0/A1 through the shared samples.
///
/// An infeasible or failed program degrades to the zero plan with a
/// diagnostic instead of an error, so the alternation can carry on.
pub fn adversary_step(
    h_clean: &HankelPair,
    q: &DMatrix<f64>,
    x: &DMatrix<f64>,
    weights: &PerformanceWeights,
    cfg: &DetectorConfig,
) -> Result<AdversaryStep> {
    let n = h_clean.state_dim();
    let m = h_clean.input_dim();
    let t = h_clean.horizon();
    if q.nrows() != t || q.ncols() != n {
        return Err(DdcError::InvalidArgument(format!(
            "certificate Q must be {t}x{n}, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    if x.nrows() != m || x.ncols() != m {
        return Err(DdcError::InvalidArgument(format!(
            "certificate X must be {m}x{m}, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    if cfg.w().ncols() != n {
        return Err(DdcError::InvalidArgument(format!(
            "detector weight W has {} columns but the state dimension is {n}",
            cfg.w().ncols()
        )));
    }
    let q_norm = q.norm();
    if q_norm == 0.0 {
        return Err(DdcError::InvalidArgument(
            "certificate Q is zero; run the operator step first".into(),
        ));
    }
    // The LMI blocks are homogeneous of degree one in (Q, X), so normalize
    // the fixed certificate; without this the problem's scale is whatever
    // the previous solve happened to return and the solver can misread a
    // badly scaled instance as unbounded.
    let s = 1.0 / q_norm;
    let qs = q * s;
    let xs = x * s;

    let zero_plan = || AttackPlan::zero(n, t, AttackPolicy::AlternatingH2);
    let value_at = |a0: &DMatrix<f64>| -> f64 {
        (&weights.qx * (&h_clean.x0 + a0) * q).trace() + x.trace()
    };

    let mut prob = LinearMatrixProblem::new();
    let a_var = prob.add_var("a", n, t + 1);
    let a0 = AffineMat::from_var_cols(a_var, 0, t);
    let a1 = AffineMat::from_var_cols(a_var, 1, t + 1);
    let x0_t = a0.add_constant(&h_clean.x0);
    let x1_t = a1.add_constant(&h_clean.x1);

    let p_t = x0_t.right_mul(&qs);
    let s_t = x1_t.right_mul(&qs);
    prob.require_symmetric(&p_t);

    let ru = weights.r_sqrt() * &h_clean.u0 * &qs;
    prob.psd(
        AffineMat::block2x2(
            &AffineMat::constant(&xs),
            &AffineMat::constant(&ru),
            &AffineMat::constant(&ru.transpose()),
            &p_t,
        ),
        0.0,
    );
    let shifted = p_t.add_constant(&(DMatrix::identity(n, n) * (-s)));
    prob.psd(
        AffineMat::block2x2(&shifted, &s_t, &s_t.transpose(), &p_t),
        0.0,
    );
    let stealth_bound = cfg.gamma() * h_clean.u0.norm();
    prob.frobenius_le(x0_t.left_mul(cfg.w()), stealth_bound);
    prob.set_objective(Sense::Maximize, p_t.left_mul(&weights.qx).trace());

    let report = solve(&prob, solver_tolerance())?;
    let fallback = |why: String| -> Result<AdversaryStep> {
        Ok(AdversaryStep {
            plan: zero_plan()?,
            objective: value_at(&DMatrix::zeros(n, t)),
            note: Some(why),
        })
    };
    let usable = matches!(
        report.status,
        SolveStatus::Optimal | SolveStatus::Feasible | SolveStatus::Inaccurate
    );
    if !usable {
        return fallback(format!(
            "adversary step fell back to the zero attack ({:?}: {})",
            report.status, report.detail
        ));
    }
    let a_mat = report
        .value_of(a_var)
        .ok_or_else(|| DdcError::SolverFailure("solver returned no values".into()))?;

    // The SOC row is satisfied only to solver accuracy; the stealth promise
    // is exact. Shrink the plan along the segment to zero (the constraint
    // value is convex in the scale) until it holds.
    let mut scale = 1.0;
    let stealth_of = |c: f64| (cfg.w() * (&h_clean.x0 + a_mat.columns(0, t) * c)).norm();
    if stealth_of(0.0) > stealth_bound {
        return fallback(
            "clean data already exceeds the detector threshold; no attack can hide".into(),
        );
    }
    if stealth_of(1.0) > stealth_bound {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if stealth_of(mid) <= stealth_bound {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        scale = lo;
    }
    let samples: Vec<DVector<f64>> = (0..=t).map(|j| a_mat.column(j) * scale).collect();
    let plan = AttackPlan::from_samples(samples, AttackPolicy::AlternatingH2)?;
    let note = if scale < 1.0 {
        Some(format!(
            "plan rescaled by {scale:.12} to restore the stealth bound exactly"
        ))
    } else if report.status == SolveStatus::Inaccurate {
        Some(format!("adversary step solved inaccurately: {}", report.detail))
    } else {
        None
    };
    Ok(AdversaryStep {
        plan,
        objective: value_at(&(a_mat.columns(0, t) * scale).into_owned()),
        note,
    })
}

/// Run the alternation for up to `n_max` iterations, stopping early when
/// the operator's gain settles to within `eps` in Frobenius norm. Every
/// accepted plan kept the operator's program solvable; plans that broke it
/// are halved up to five times before the loop gives up and reports the
/// best state so far.
pub fn alternating_attack(
    h_clean: &HankelPair,
    weights: &PerformanceWeights,
    cfg: &DetectorConfig,
    n_max: usize,
    eps: f64,
) -> Result<(AttackPlan, AlternatingState)> {
    if !(eps > 0.0) {
        return Err(DdcError::InvalidArgument(format!(
            "gain-convergence tolerance must be positive, got {eps}"
        )));
    }
    let clean = operator_step(h_clean, weights)?;
    let n = h_clean.state_dim();
    let t = h_clean.horizon();
    let mut plan = AttackPlan::zero(n, t, AttackPolicy::AlternatingH2)?;
    let x_clean = clean
        .x
        .ok_or_else(|| DdcError::SolverFailure("operator step returned no X".into()))?;
    let mut state = AlternatingState {
        iteration: 0,
        q: clean.q,
        x: x_clean,
        gain: clean.k.clone(),
        attacked: h_clean.clone(),
        gain_history: vec![clean.k],
        objective_history: Vec::new(),
        stealth_history: vec![(cfg.w() * &h_clean.x0).norm() / h_clean.u0.norm()],
        notes: Vec::new(),
        stop_reason: StopReason::MaxIters,
    };

    for k in 1..=n_max {
        let adv = adversary_step(h_clean, &state.q, &state.x, weights, cfg)?;
        if let Some(note) = &adv.note {
            state.notes.push(format!("iteration {k}: {note}"));
        }
        let mut candidate = adv.plan;
        let mut halvings = 0;
        let (outcome, attacked) = loop {
            let attacked = apply_plan(h_clean, &candidate)?;
            match operator_step(&attacked, weights) {
                Ok(out) => break (out, attacked),
                Err(
                    e @ (DdcError::Infeasible(_)
                    | DdcError::Precondition(_)
                    | DdcError::SolverFailure(_)
                    | DdcError::NumericalFailure(_)),
                ) => {
                    if halvings >= MAX_HALVINGS {
                        state
                            .notes
                            .push(format!("iteration {k}: operator step failed after {halvings} halvings: {e}"));
                        state.stop_reason = StopReason::SolverFailure;
                        return Ok((plan, state));
                    }
                    halvings += 1;
                    candidate = candidate.scaled(0.5);
                    state.notes.push(format!(
                        "iteration {k}: plan broke the operator's program ({e}); halving (attempt {halvings})"
                    ));
                }
                Err(e) => return Err(e),
            }
        };
        let x_next = outcome
            .x
            .ok_or_else(|| DdcError::SolverFailure("operator step returned no X".into()))?;
        let delta = (&outcome.k - &state.gain).norm();
        plan = candidate;
        state.iteration = k;
        state.q = outcome.q;
        state.x = x_next;
        state.gain = outcome.k.clone();
        state
            .stealth_history
            .push((cfg.w() * &attacked.x0).norm() / h_clean.u0.norm());
        state.attacked = attacked;
        state.gain_history.push(outcome.k);
        state.objective_history.push(adv.objective);
        if delta < eps {
            state.stop_reason = StopReason::GainConverged;
            break;
        }
    }
    Ok((plan, state))
}

/// Deploy a plan: synthesize on the attacked record, cost the resulting
/// gain on the true plant, and compare with the clean pipeline.
pub fn evaluate_attack(
    sys: &SystemRealization,
    plan: &AttackPlan,
    weights: &PerformanceWeights,
    h_clean: &HankelPair,
) -> Result<AttackImpact> {
    let attacked = apply_plan(h_clean, plan)?;
    let k_a = crate::synthesis::h2_gain(&attacked, weights)?.k;
    let k_star = crate::synthesis::h2_gain(h_clean, weights)?.k;
    let j_a = h2_cost(sys, &k_a, weights)?;
    let j_star = h2_cost(sys, &k_star, weights)?;
    let ratio = if j_a == j_star {
        1.0
    } else {
        j_a / j_star
    };
    Ok(AttackImpact {
        k_a,
        j_a,
        j_star,
        ratio,
    })
}

/// Theorem-level guarantee for the constant-bias attack class: when the
/// all-ones row is outside the row space of [U0; X0], every bias rho keeps
/// rank([U0; X0 + rho*1]) = n + m, so the operator stays able to
/// synthesize. Returns true when that guarantee holds.
pub fn bias_rank_condition(h_clean: &HankelPair) -> bool {
    let lambda = stack_data(h_clean);
    let t = h_clean.horizon();
    let ones = DVector::from_element(t, 1.0);
    let svd = lambda.svd(false, true);
    let v_t = svd
        .v_t
        .expect("svd computed with v_t requested");
    let smax = svd.singular_values.max();
    let tol = RANK_REL_TOL * smax.max(1.0);
    let mut projection = DVector::zeros(t);
    for (i, sigma) in svd.singular_values.iter().enumerate() {
        if *sigma > tol {
            let v_i = v_t.row(i).transpose();
            let coeff = v_i.dot(&ones);
            projection += v_i * coeff;
        }
    }
    let residual = (&ones - projection).norm();
    residual > 1e-8 * (t as f64).sqrt()
}

/// An input record the adversary cannot safely bias-attack.
#[derive(Debug, Clone)]
pub struct MitigationProbe {
    pub inputs: Vec<DVector<f64>>,
    /// Verified membership of the all-ones row in the row space of the
    /// input block alone; when true, `bias_rank_condition` is false for a
    /// dataset collected with these inputs on any plant.
    pub ones_in_input_rows: bool,
}

/// Design inputs that void the bias attack's feasibility guarantee by
/// holding one channel constant: the all-ones row then sits inside the
/// data's row space no matter what the plant does. With a single input
/// channel the whole input is constant, which sacrifices excitation; with
/// several, the remaining channels stay persistently exciting.
pub fn mitigation_probe(n: usize, m: usize, t: usize, seed: u64) -> Result<MitigationProbe> {
    if n == 0 || m == 0 {
        return Err(DdcError::InvalidArgument(
            "state and input dimensions must be positive".into(),
        ));
    }
    let bound = (m + 1) * n + m;
    if t < bound {
        return Err(DdcError::Precondition(format!(
            "horizon T={t} is below the minimum (m+1)n+m = {bound} for n={n}, m={m}"
        )));
    }
    let inputs: Vec<DVector<f64>> = if m == 1 {
        vec![DVector::from_element(1, 1.0); t]
    } else {
        let free = crate::data::gen_pe_input(m - 1, t, n + 1, seed)?;
        free.into_iter()
            .map(|u| {
                let mut v = DVector::zeros(m);
                v.rows_mut(0, m - 1).copy_from(&u);
                v[m - 1] = 1.0;
                v
            })
            .collect()
    };
    let mut u0 = DMatrix::zeros(m, t);
    for (k, u) in inputs.iter().enumerate() {
        u0.set_column(k, u);
    }
    let ones = DVector::from_element(t, 1.0);
    let svd = u0.svd(false, true);
    let v_t = svd.v_t.expect("svd computed with v_t requested");
    let smax = svd.singular_values.max();
    let tol = RANK_REL_TOL * smax.max(1.0);
    let mut projection = DVector::zeros(t);
    for (i, sigma) in svd.singular_values.iter().enumerate() {
        if *sigma > tol {
            let v_i = v_t.row(i).transpose();
            let coeff = v_i.dot(&ones);
            projection += v_i * coeff;
        }
    }
    let residual = (&ones - projection).norm();
    let member = residual <= 1e-8 * (t as f64).sqrt();
    if !member {
        return Err(DdcError::GenerationFailure(
            "constant-channel construction failed to span the all-ones row".into(),
        ));
    }
    Ok(MitigationProbe {
        inputs,
        ones_in_input_rows: member,
    })
}
