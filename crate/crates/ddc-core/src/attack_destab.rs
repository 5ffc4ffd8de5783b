//! Destabilizing sensor attack via a fake system.
//!
//! The adversary picks a target gain K~ and replaces the operator's
//! measurements with the trajectory of a fabricated plant (Atilde, Btilde)
//! built so that (i) the forged data is consistent with some linear system,
//! which makes K~ certifiable by the operator's own synthesis, and (ii) a
//! scalar knob kappa scales the whole fake system, shrinking the forged
//! signal energy until the detector stays quiet.
//!
//! Construction for K~ (m x n), kappa in (0, 1]:
//!   Atilde = kappa * [[0, I_{n-1}], [V]]   with V the column means of K~,
//!   Btilde = kappa/m * [0; ...; 0; 1_{1 x m}]
//! Then Atilde - Btilde K~ is nilpotent, so u = -K~ x "stabilizes" the fake
//! plant in n steps, while the pair stays controllable.

use nalgebra::{DMatrix, DVector};

use crate::data::{AttackPlan, AttackPolicy};
use crate::detector::DetectorConfig;
use crate::error::{DdcError, Result};
use crate::lti::{finite_horizon_l2_gain, simulate, StateTrajectory, SystemRealization};

/// Smallest kappa the line search will consider.
pub const KAPPA_FLOOR: f64 = 1e-6;

/// A fully built fake system, ready to forge measurements.
#[derive(Debug, Clone)]
pub struct FakeSystemSpec {
    /// The gain the adversary wants the operator to adopt.
    pub k_tilde: DMatrix<f64>,
    /// Scale knob in (0, 1].
    pub kappa: f64,
    /// Column means of `k_tilde` (1 x n); the last row of Atilde is
    /// kappa * V.
    pub v: DMatrix<f64>,
    /// The fake plant (Atilde, Btilde).
    pub system: SystemRealization,
}

/// Build the fake system for a target gain and scale.
pub fn build_fake_system(k_tilde: &DMatrix<f64>, kappa: f64) -> Result<FakeSystemSpec> {
    let m = k_tilde.nrows();
    let n = k_tilde.ncols();
    if m == 0 || n == 0 {
        return Err(DdcError::InvalidArgument(
            "target gain must be nonempty".into(),
        ));
    }
    if k_tilde.iter().any(|v| !v.is_finite()) {
        return Err(DdcError::InvalidArgument(
            "target gain must be finite".into(),
        ));
    }
    if !kappa.is_finite() || kappa <= 0.0 || kappa > 1.0 {
        return Err(DdcError::InvalidArgument(format!(
            "kappa must lie in (0, 1], got {kappa}"
        )));
    }
    let v = DMatrix::from_fn(1, n, |_, j| k_tilde.column(j).sum() / m as f64);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = kappa;
    }
    a.view_mut((n - 1, 0), (1, n)).copy_from(&(kappa * &v));
    let mut b = DMatrix::zeros(n, m);
    b.view_mut((n - 1, 0), (1, m))
        .fill(kappa / m as f64);
    Ok(FakeSystemSpec {
        k_tilde: k_tilde.clone(),
        kappa,
        v,
        system: SystemRealization::new(a, b)?,
    })
}

/// Replay the operator's inputs through the fake system and package the
/// result as an additive measurement attack: the forged record starts at
/// zero, follows the fake dynamics exactly, and a[k] = xtilde[k] - x[k].
pub fn forge_measurements(
    spec: &FakeSystemSpec,
    truth: &StateTrajectory,
) -> Result<(StateTrajectory, AttackPlan)> {
    let n = spec.system.state_dim();
    if truth.states[0].len() != n {
        return Err(DdcError::InvalidArgument(format!(
            "true trajectory has state dimension {}, fake system expects {n}",
            truth.states[0].len()
        )));
    }
    if truth.inputs[0].len() != spec.system.input_dim() {
        return Err(DdcError::InvalidArgument(format!(
            "true trajectory has input dimension {}, fake system expects {}",
            truth.inputs[0].len(),
            spec.system.input_dim()
        )));
    }
    let forged = simulate(&spec.system, &truth.inputs, &DVector::zeros(n))?;
    let samples: Vec<DVector<f64>> = forged
        .states
        .iter()
        .zip(truth.states.iter())
        .map(|(xa, x)| xa - x)
        .collect();
    let plan = AttackPlan::from_samples(samples, AttackPolicy::FakeSystem)?;
    Ok((forged, plan))
}

/// Detector gain of the kappa-scaled fake system over the given horizon.
pub fn fake_system_gain(
    k_tilde: &DMatrix<f64>,
    kappa: f64,
    cfg: &DetectorConfig,
    horizon: usize,
) -> Result<f64> {
    let spec = build_fake_system(k_tilde, kappa)?;
    finite_horizon_l2_gain(&spec.system, cfg.w(), horizon)
}

/// Closed-form stealthy scale: kappa = gamma / (2 delta), where delta is
/// the fake system's gain at kappa = 1. Since the horizon-T response scales
/// at least linearly in kappa <= 1, this guarantees a factor-two stealth
/// margin. The result is clamped to (0, 1].
pub fn kappa_closed_form(
    spec: &FakeSystemSpec,
    cfg: &DetectorConfig,
    horizon: usize,
) -> Result<f64> {
    let delta = fake_system_gain(&spec.k_tilde, 1.0, cfg, horizon)?;
    if delta <= 0.0 {
        return Err(DdcError::NumericalFailure(
            "fake system has zero detector gain; kappa is unconstrained".into(),
        ));
    }
    Ok((cfg.gamma() / (2.0 * delta)).min(1.0))
}

/// Largest kappa in [KAPPA_FLOOR, 1] whose forged-signal gain stays at or
/// below gamma: a log-spaced bracket scan followed by bisection. The
/// returned kappa always satisfies the stealth bound; `tol` is the relative
/// width at which bisection stops.
pub fn kappa_line_search(
    spec: &FakeSystemSpec,
    cfg: &DetectorConfig,
    horizon: usize,
    tol: f64,
) -> Result<f64> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(DdcError::InvalidArgument(format!(
            "line search tolerance must be positive, got {tol}"
        )));
    }
    let gamma = cfg.gamma();
    let gain = |kappa: f64| fake_system_gain(&spec.k_tilde, kappa, cfg, horizon);

    if gain(1.0)? <= gamma {
        return Ok(1.0);
    }
    const GRID: usize = 50;
    let log_lo = KAPPA_FLOOR.ln();
    let log_hi = 0.0_f64;
    let mut bracket: Option<(f64, f64)> = None;
    let mut prev: Option<f64> = None;
    for i in 0..GRID {
        let kappa = (log_lo + (log_hi - log_lo) * i as f64 / (GRID - 1) as f64).exp();
        if gain(kappa)? <= gamma {
            prev = Some(kappa);
        } else {
            match prev {
                Some(lo) => {
                    bracket = Some((lo, kappa));
                    break;
                }
                None => {
                    return Err(DdcError::Infeasible(format!(
                        "no kappa down to {KAPPA_FLOOR} meets the stealth threshold {gamma}"
                    )))
                }
            }
        }
    }
    let (mut lo, mut hi) = match bracket {
        Some(b) => b,
        // The scan never exceeded gamma below kappa = 1, but kappa = 1
        // itself alarms; bracket against 1.
        None => (prev.unwrap_or(KAPPA_FLOOR), 1.0),
    };
    for _ in 0..30 {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if gain(mid)? <= gamma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // lo carried the invariant gain <= gamma through the whole search, but
    // re-check rather than trust the bookkeeping.
    if gain(lo)? > gamma {
        return Err(DdcError::NumericalFailure(
            "line search lost the stealth invariant".into(),
        ));
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{collect_dataset, gen_pe_input, to_hankel, Provenance};
    use crate::lti::{is_controllable, spectral_radius, zoh_discretize};
    use approx::assert_relative_eq;

    const K_TILDE: [f64; 3] = [-0.01, -2.67, 3.27];

    fn target_gain() -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 3, &K_TILDE)
    }

    fn triangular_plant() -> SystemRealization {
        let ac = DMatrix::from_row_slice(
            3,
            3,
            &[-0.1, 3.0, 4.0, 0.0, -5.0, 6.0, 0.0, 0.0, -1.0],
        );
        let bc = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 1.0]);
        zoh_discretize(&ac, &bc, 0.15).unwrap()
    }

    #[test]
    fn fake_system_matrices_at_unit_kappa() {
        let spec = build_fake_system(&target_gain(), 1.0).unwrap();
        let a_expect = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -0.01, -2.67, 3.27],
        );
        let b_expect = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        assert_eq!(spec.system.a, a_expect);
        assert_eq!(spec.system.b, b_expect);
        assert_eq!(spec.v, target_gain());
    }

    #[test]
    fn fake_system_scales_linearly_in_kappa() {
        let unit = build_fake_system(&target_gain(), 1.0).unwrap();
        let half = build_fake_system(&target_gain(), 0.5).unwrap();
        assert_relative_eq!(half.system.a, &unit.system.a * 0.5, epsilon = 1e-15);
        assert_relative_eq!(half.system.b, &unit.system.b * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn fake_closed_loop_is_nilpotent() {
        let spec = build_fake_system(&target_gain(), 1.0).unwrap();
        let cl = &spec.system.a - &spec.system.b * &spec.k_tilde;
        assert!(spectral_radius(&cl).unwrap() < 1e-12);
        let n = cl.nrows() as u32;
        assert!(cl.pow(n).norm() < 1e-12);
    }

    #[test]
    fn multi_input_fake_system_is_nilpotent_and_controllable() {
        let k = DMatrix::from_row_slice(2, 3, &[0.4, -1.3, 2.2, -0.7, 0.9, 0.1]);
        let spec = build_fake_system(&k, 0.8).unwrap();
        let cl = &spec.system.a - &spec.system.b * &spec.k_tilde;
        assert!(cl.pow(3).norm() < 1e-12);
        assert!(is_controllable(&spec.system));
        for j in 0..3 {
            assert_relative_eq!(
                spec.v[(0, j)],
                (k[(0, j)] + k[(1, j)]) / 2.0,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn fake_open_loop_spectral_radius() {
        let spec = build_fake_system(&target_gain(), 1.0).unwrap();
        assert_relative_eq!(
            spectral_radius(&spec.system.a).unwrap(),
            1.6377439850,
            epsilon = 1e-9
        );
    }

    #[test]
    fn rejects_bad_kappa() {
        for kappa in [0.0, -0.3, 1.0 + 1e-12, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                build_fake_system(&target_gain(), kappa),
                Err(DdcError::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn forged_record_follows_fake_dynamics() {
        let sys = triangular_plant();
        let u = gen_pe_input(1, 16, 4, 21).unwrap();
        let truth = simulate(&sys, &u, &DVector::zeros(3)).unwrap();
        let spec = build_fake_system(&target_gain(), 0.5).unwrap();
        let (forged, plan) = forge_measurements(&spec, &truth).unwrap();

        assert_eq!(forged.states[0], DVector::zeros(3));
        for k in 0..16 {
            let expect = &spec.system.a * &forged.states[k] + &spec.system.b * &u[k];
            assert_relative_eq!(forged.states[k + 1], expect, epsilon = 1e-12);
            assert_relative_eq!(
                plan.samples()[k],
                &forged.states[k] - &truth.states[k],
                epsilon = 1e-12
            );
        }

        // The attacked dataset reproduces the forged record: x + a = xtilde,
        // so its Hankel pair obeys the fake system's data equation.
        let ds = collect_dataset(&sys, &u, Some(&plan)).unwrap();
        assert_eq!(*ds.provenance(), Provenance::Attacked("fake-system".into()));
        let h = to_hankel(&ds);
        let resid = &h.x1 - (&spec.system.a * &h.x0 + &spec.system.b * &h.u0);
        assert!(resid.norm() < 1e-10, "residual {}", resid.norm());
    }

    #[test]
    fn frozen_detector_gains() {
        let cfg = DetectorConfig::identity(3, 1.0).unwrap();
        let delta = fake_system_gain(&target_gain(), 1.0, &cfg, 16).unwrap();
        assert_relative_eq!(delta, 44503.3900649062, max_relative = 1e-8);
        assert_relative_eq!(
            fake_system_gain(&target_gain(), 0.5, &cfg, 16).unwrap(),
            10.425780689843927,
            max_relative = 1e-8
        );
        assert_relative_eq!(
            fake_system_gain(&target_gain(), 0.1, &cfg, 16).unwrap(),
            0.1425207050916266,
            max_relative = 1e-8
        );
    }

    #[test]
    fn kappa_scaling_bound_on_grid() {
        let cfg = DetectorConfig::identity(3, 1.0).unwrap();
        let delta = fake_system_gain(&target_gain(), 1.0, &cfg, 16).unwrap();
        for i in 1..=20 {
            let kappa = i as f64 / 20.0;
            let g = fake_system_gain(&target_gain(), kappa, &cfg, 16).unwrap();
            assert!(
                g <= kappa * delta * (1.0 + 1e-9),
                "kappa = {kappa}: gain {g} exceeds linear bound {}",
                kappa * delta
            );
        }
    }

    #[test]
    fn closed_form_kappa_matches_remark_formula() {
        let cfg = DetectorConfig::identity(3, 1.0).unwrap();
        let spec = build_fake_system(&target_gain(), 1.0).unwrap();
        let kappa = kappa_closed_form(&spec, &cfg, 16).unwrap();
        assert_relative_eq!(kappa, 1.0 / (2.0 * 44503.3900649062), max_relative = 1e-8);
        // And the resulting gain respects the factor-two margin.
        let g = fake_system_gain(&target_gain(), kappa, &cfg, 16).unwrap();
        assert!(g <= 0.5 * cfg.gamma() * (1.0 + 1e-9));
    }

    #[test]
    fn line_search_finds_tight_kappa() {
        let cfg = DetectorConfig::identity(3, 1.0).unwrap();
        let spec = build_fake_system(&target_gain(), 1.0).unwrap();
        let kappa = kappa_line_search(&spec, &cfg, 16, 1e-10).unwrap();
        let g = fake_system_gain(&target_gain(), kappa, &cfg, 16).unwrap();
        assert!(g <= cfg.gamma());
        assert!(g > 0.99 * cfg.gamma(), "line search not tight: gain {g}");
        assert!(kappa > 0.1 && kappa < 0.5, "kappa = {kappa}");
        // Strictly better than the conservative closed form.
        let cf = kappa_closed_form(&spec, &cfg, 16).unwrap();
        assert!(kappa > 10.0 * cf);
    }

    #[test]
    fn line_search_returns_one_when_unconstrained() {
        let cfg = DetectorConfig::identity(3, 1e6).unwrap();
        let spec = build_fake_system(&target_gain(), 1.0).unwrap();
        assert_eq!(kappa_line_search(&spec, &cfg, 16, 1e-10).unwrap(), 1.0);
    }

    #[test]
    fn forge_rejects_dimension_mismatch() {
        let spec = build_fake_system(&target_gain(), 1.0).unwrap();
        let truth = StateTrajectory::new(
            vec![DVector::zeros(2); 6],
            vec![DVector::zeros(1); 5],
        )
        .unwrap();
        assert!(matches!(
            forge_measurements(&spec, &truth),
            Err(DdcError::InvalidArgument(_))
        ));
    }
}
