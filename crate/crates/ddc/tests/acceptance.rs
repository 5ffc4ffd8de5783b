//! Acceptance gate for the whole workspace: one test per criterion, each
//! printing a single `AC<k> PASS/FAIL` line with the measured quantities
//! before asserting. Tolerances and reference values are pinned here.
//!
//! AC1 through AC3 pin external reference values for the two packaged
//! experiments. Our independent oracles (Riccati value iteration, true-plant
//! simulation) disagree with several of those references; the checks are
//! kept faithful to the references and fail where the oracles win. The
//! reports carry the measured values so the disagreement is visible.

use std::time::{Duration, Instant};

use ddc::experiments::{
    example1_target_gain, run_example1, run_example2, ExperimentConfig,
};
use ddc_core::attack_destab::{build_fake_system, fake_system_gain, forge_measurements, kappa_closed_form};
use ddc_core::attack_h2::{
    alternating_attack, apply_plan, bias_rank_condition, evaluate_attack, mitigation_probe,
};
use ddc_core::data::{collect_dataset, gen_pe_input, to_hankel, AttackPlan};
use ddc_core::detector::{detect, DetectorConfig};
use ddc_core::lti::{simulate, spectral_radius, PerformanceWeights};
use ddc_core::sdp::solver_tolerance;
use ddc_core::synthesis::{h2_gain, rank_condition, stabilizing_gain};
use ddc_core::testutil::{
    fast_triangular_plant, random_plant, random_stealthy_plan, riccati_h2,
    slow_triangular_plant,
};
use nalgebra::DVector;

const AC1_COST_REL_TOL: f64 = 0.01;
const AC1_GAIN_ABS_TOL: f64 = 1e-2;
const AC1_TIME_LIMIT: Duration = Duration::from_secs(10);
const AC1_J_REF: f64 = 61.7407;
const AC1_K_REF: [f64; 3] = [-0.5359, -0.7937, -3.0788];

const AC2_RATIO_MIN: f64 = 2.0;
const AC2_J_ATTACKED_REF: f64 = 244.49;
const AC2_TIME_LIMIT: Duration = Duration::from_secs(60);

const AC3_TIME_LIMIT: Duration = Duration::from_secs(10);

const AC4_SCALING_SLACK: f64 = 1e-9;

const AC5_SYSTEMS: u64 = 50;
const AC5_GAIN_REL_TOL: f64 = 1e-3;

const AC6_ATTACKS: u64 = 20;

const AC7_DATASETS: u64 = 20;
const BIAS_GRID: [f64; 10] = [
    -100.0, -10.0, -1.0, -0.1, -0.01, 0.01, 0.1, 1.0, 10.0, 100.0,
];

const AC8_RESIDUAL_TOL: f64 = 1e-10;

fn verdict(criterion: usize, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("AC{criterion} {tag} — {detail}");
    assert!(pass, "AC{criterion} failed: {detail}");
}

#[test]
fn ac1_clean_pipeline_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let report = run_example2(&ExperimentConfig::example2(dir.path().to_path_buf())).unwrap();
    let elapsed = start.elapsed();

    let j_rel = (report.j_star - AC1_J_REF).abs() / AC1_J_REF;
    let k = &report.k_star[0];
    let k_dev = (0..3)
        .map(|i| (k[i] - AC1_K_REF[i]).abs())
        .fold(0.0, f64::max);
    let pass = j_rel <= AC1_COST_REL_TOL && k_dev <= AC1_GAIN_ABS_TOL && elapsed < AC1_TIME_LIMIT;
    verdict(
        1,
        pass,
        &format!(
            "j_star {:.4} vs reference {} (rel {:.4}, tol {}), gain deviation {:.4} (tol {}), {:.2?} (limit {:?})",
            report.j_star, AC1_J_REF, j_rel, AC1_COST_REL_TOL, k_dev, AC1_GAIN_ABS_TOL, elapsed, AC1_TIME_LIMIT
        ),
    );
}

#[test]
fn ac2_attack_degrades_the_deployed_cost() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let report = run_example2(&ExperimentConfig::example2(dir.path().to_path_buf())).unwrap();
    let elapsed = start.elapsed();

    let doubled = report.j_attacked >= AC2_RATIO_MIN * report.j_star;
    let reference_reported = report.reference_j_attacked == AC2_J_ATTACKED_REF;
    let pass = doubled && report.stealthy && reference_reported && elapsed < AC2_TIME_LIMIT;
    verdict(
        2,
        pass,
        &format!(
            "j_attacked {:.4} vs {}*j_star = {:.4} (reference {}), stealthy {}, {:.2?} (limit {:?})",
            report.j_attacked,
            AC2_RATIO_MIN,
            AC2_RATIO_MIN * report.j_star,
            report.reference_j_attacked,
            report.stealthy,
            elapsed,
            AC2_TIME_LIMIT
        ),
    );
}

#[test]
fn ac3_forged_record_certifies_the_target_gain() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let report = run_example1(&ExperimentConfig::example1(dir.path().to_path_buf())).unwrap();
    let elapsed = start.elapsed();

    let pass = report.certified_from_forged
        && report.destabilizing
        && !report.certified_from_clean
        && elapsed < AC3_TIME_LIMIT;
    verdict(
        3,
        pass,
        &format!(
            "certified from forged {}, rho(A - B K~) {:.6} (> 1 required), certified from clean {} (false required), {:.2?} (limit {:?})",
            report.certified_from_forged,
            report.rho_true_closed_loop,
            report.certified_from_clean,
            elapsed,
            AC3_TIME_LIMIT
        ),
    );
}

#[test]
fn ac4_stealth_scaling_bounds() {
    let k_tilde = example1_target_gain();
    let cfg = DetectorConfig::identity(3, 1.0).unwrap();
    let horizon = 16;
    let delta = fake_system_gain(&k_tilde, 1.0, &cfg, horizon).unwrap();

    let mut worst_excess = f64::NEG_INFINITY;
    for i in 1..=20 {
        let kappa = i as f64 / 20.0;
        let gain = fake_system_gain(&k_tilde, kappa, &cfg, horizon).unwrap();
        worst_excess = worst_excess.max(gain - kappa * delta);
    }

    let sys = fast_triangular_plant();
    let u = gen_pe_input(1, horizon, 4, 41).unwrap();
    let truth = simulate(&sys, &u, &DVector::zeros(3)).unwrap();
    let spec = build_fake_system(&k_tilde, 1.0).unwrap();
    let kappa_cf = kappa_closed_form(&spec, &cfg, horizon).unwrap();
    let quiet = build_fake_system(&k_tilde, kappa_cf).unwrap();
    let (_, plan) = forge_measurements(&quiet, &truth).unwrap();
    let ds = collect_dataset(&sys, &u, Some(&plan)).unwrap();
    let detection = detect(&ds, &cfg).unwrap();

    let pass = worst_excess <= AC4_SCALING_SLACK && detection.ratio <= 0.5 * cfg.gamma();
    verdict(
        4,
        pass,
        &format!(
            "worst gain excess over linear bound {:.2e} (slack {}), ratio at closed-form kappa {:.3e} vs gamma/2 = {:.3e}",
            worst_excess,
            AC4_SCALING_SLACK,
            detection.ratio,
            0.5 * cfg.gamma()
        ),
    );
}

#[test]
fn ac5_clean_pipeline_matches_riccati_across_systems() {
    let mut worst_rel = 0.0_f64;
    let mut worst_rho = 0.0_f64;
    for seed in 0..AC5_SYSTEMS {
        let n = 2 + (seed % 3) as usize;
        let m = 1 + (seed % 2) as usize;
        let sys = random_plant(n, m, seed).unwrap();
        let weights = PerformanceWeights::identity(n, m);
        let t = (m + 1) * n + m + 10;
        let u = gen_pe_input(m, t, n + 1, seed.wrapping_add(9000)).unwrap();
        let h = to_hankel(&collect_dataset(&sys, &u, None).unwrap());

        let k_data = h2_gain(&h, &weights).unwrap().k;
        let (k_ric, _) = riccati_h2(&sys, &weights).unwrap();
        let rel = (&k_data - &k_ric).norm() / k_ric.norm();
        worst_rel = worst_rel.max(rel);

        let k_stab = stabilizing_gain(&h).unwrap().k;
        let rho = spectral_radius(&(&sys.a - &sys.b * &k_stab)).unwrap();
        worst_rho = worst_rho.max(rho);
    }
    let pass = worst_rel <= AC5_GAIN_REL_TOL && worst_rho < 1.0;
    verdict(
        5,
        pass,
        &format!(
            "{AC5_SYSTEMS} systems: worst h2 gain deviation {worst_rel:.2e} (tol {AC5_GAIN_REL_TOL}), worst stabilized spectral radius {worst_rho:.6}"
        ),
    );
}

#[test]
fn ac6_stealthy_attacks_strictly_degrade() {
    let sys = slow_triangular_plant();
    let weights = PerformanceWeights::identity(3, 1);
    let cfg = DetectorConfig::identity(3, 10f64.powf(1.5)).unwrap();
    let u = gen_pe_input(1, 20, 4, 7).unwrap();
    let h = to_hankel(&collect_dataset(&sys, &u, None).unwrap());
    let gate = 10.0 * solver_tolerance();
    let k_star = h2_gain(&h, &weights).unwrap().k;

    let mut moved = 0;
    let mut degraded = 0;
    let mut min_margin = f64::INFINITY;
    for seed in 0..AC6_ATTACKS {
        let plan = random_stealthy_plan(&h, &cfg, 0.5, seed).unwrap();
        let impact = evaluate_attack(&sys, &plan, &weights, &h).unwrap();
        let k_shift = (&impact.k_a - &k_star).norm();
        if k_shift > gate {
            moved += 1;
        }
        if impact.j_a > impact.j_star {
            degraded += 1;
        }
        min_margin = min_margin.min(impact.j_a - impact.j_star);
    }
    let pass = moved == AC6_ATTACKS as usize && degraded == AC6_ATTACKS as usize;
    verdict(
        6,
        pass,
        &format!(
            "{AC6_ATTACKS} stealthy attacks: {moved} moved the gain past 10*tol, {degraded} strictly degraded, smallest cost margin {min_margin:.3e}"
        ),
    );
}

#[test]
fn ac7_bias_rank_condition_and_probe() {
    let mut condition_held = 0;
    let mut rank_preserved = true;
    let mut probe_flipped = true;
    for seed in 0..AC7_DATASETS {
        let n = 2 + (seed % 2) as usize;
        let m = 1 + usize::from(seed % 3 == 0);
        let sys = random_plant(n, m, seed.wrapping_add(1000)).unwrap();
        let t = 16;
        let u = gen_pe_input(m, t, n + 1, seed.wrapping_add(2000)).unwrap();
        let h = to_hankel(&collect_dataset(&sys, &u, None).unwrap());
        if !bias_rank_condition(&h) {
            continue;
        }
        condition_held += 1;
        for rho in BIAS_GRID {
            let biased = apply_plan(&h, &AttackPlan::constant_bias(n, t, rho).unwrap()).unwrap();
            if !rank_condition(&biased) {
                rank_preserved = false;
            }
        }
        let probe = mitigation_probe(n, m, t, seed.wrapping_add(3000)).unwrap();
        let mitigated = to_hankel(&collect_dataset(&sys, &probe.inputs, None).unwrap());
        if bias_rank_condition(&mitigated) {
            probe_flipped = false;
        }
    }
    let pass = condition_held == AC7_DATASETS as usize && rank_preserved && probe_flipped;
    verdict(
        7,
        pass,
        &format!(
            "{condition_held}/{AC7_DATASETS} datasets satisfied the condition, rank preserved across the bias grid: {rank_preserved}, probe flipped the condition: {probe_flipped}"
        ),
    );
}

#[test]
fn ac8_data_consistency_invariants() {
    // Clean records reproduce the plant recursion.
    let mut worst_clean = 0.0_f64;
    for (sys, t, seed) in [
        (fast_triangular_plant(), 16, 41u64),
        (slow_triangular_plant(), 20, 7u64),
    ] {
        let u = gen_pe_input(1, t, 4, seed).unwrap();
        let h = to_hankel(&collect_dataset(&sys, &u, None).unwrap());
        let resid = (&h.x1 - (&sys.a * &h.x0 + &sys.b * &h.u0)).norm();
        worst_clean = worst_clean.max(resid);
    }

    // Forged records reproduce the fake recursion.
    let sys = fast_triangular_plant();
    let u = gen_pe_input(1, 16, 4, 41).unwrap();
    let truth = simulate(&sys, &u, &DVector::zeros(3)).unwrap();
    let spec = build_fake_system(&example1_target_gain(), 1.0).unwrap();
    let (_, fake_plan) = forge_measurements(&spec, &truth).unwrap();
    let h_forged = to_hankel(&collect_dataset(&sys, &u, Some(&fake_plan)).unwrap());
    let forged_resid =
        (&h_forged.x1 - (&spec.system.a * &h_forged.x0 + &spec.system.b * &h_forged.u0)).norm();

    // Attack plans keep the shifted windows consistent.
    let slow = slow_triangular_plant();
    let u2 = gen_pe_input(1, 20, 4, 7).unwrap();
    let h_clean = to_hankel(&collect_dataset(&slow, &u2, None).unwrap());
    let cfg = DetectorConfig::identity(3, 10f64.powf(1.5)).unwrap();
    let (alt_plan, _) = alternating_attack(&h_clean, &PerformanceWeights::identity(3, 1), &cfg, 1, 1e-9).unwrap();
    let mut shift_exact = true;
    for (h, plan) in [(&h_clean, &alt_plan), (&to_hankel(&collect_dataset(&sys, &u, None).unwrap()), &fake_plan)] {
        let attacked = apply_plan(h, plan).unwrap();
        let t = attacked.horizon();
        if attacked.x0.columns(1, t - 1) != attacked.x1.columns(0, t - 1) {
            shift_exact = false;
        }
    }

    let pass = worst_clean <= AC8_RESIDUAL_TOL
        && forged_resid <= AC8_RESIDUAL_TOL
        && shift_exact;
    verdict(
        8,
        pass,
        &format!(
            "clean recursion residual {worst_clean:.2e}, forged recursion residual {forged_resid:.2e} (tol {AC8_RESIDUAL_TOL}), shift consistency exact: {shift_exact}"
        ),
    );
}
