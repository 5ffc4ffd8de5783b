//! Test-only fixtures and independent oracles, compiled behind the
//! `testutil` feature. Nothing here is part of the library's contract; the
//! point is that these implementations share no code path with the modules
//! they check.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{AttackPlan, AttackPolicy, HankelPair};
use crate::detector::DetectorConfig;
use crate::error::{DdcError, Result};
use crate::lti::{
    bilinear_discretize, is_controllable, spectral_radius, zoh_discretize, PerformanceWeights,
    SystemRealization,
};

/// Unstable triangular plant discretized by zero-order hold at Ts = 0.15;
/// the destabilizing-attack experiment's plant.
pub fn fast_triangular_plant() -> SystemRealization {
    let ac = DMatrix::from_row_slice(3, 3, &[-0.1, 3.0, 4.0, 0.0, -5.0, 6.0, 0.0, 0.0, -1.0]);
    let bc = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 1.0]);
    zoh_discretize(&ac, &bc, 0.15).expect("fixture discretizes")
}

/// Stable triangular plant discretized by the bilinear transform at
/// Ts = 0.01; the performance-attack experiment's plant.
pub fn slow_triangular_plant() -> SystemRealization {
    let ac = DMatrix::from_row_slice(3, 3, &[-1.0, 3.0, 4.0, 0.0, -2.0, 6.0, 0.0, 0.0, -0.8]);
    let bc = DMatrix::from_column_slice(3, 1, &[0.1, 0.0, 0.1]);
    bilinear_discretize(&ac, &bc, 0.01).expect("fixture discretizes")
}

/// H2-optimal state feedback by value iteration on the Riccati equation:
/// P <- Qx + A'PA - A'PB (R + B'PB)^-1 B'PA. Returns the gain for
/// u = -K x and the optimal cost sqrt(trace(P)) under unit process noise.
pub fn riccati_h2(
    sys: &SystemRealization,
    weights: &PerformanceWeights,
) -> Result<(DMatrix<f64>, f64)> {
    let a = &sys.a;
    let b = &sys.b;
    let mut p = weights.qx.clone();
    let mut converged = false;
    for _ in 0..200_000 {
        let rb = &weights.r + b.transpose() * &p * b;
        let rb_inv = rb.try_inverse().ok_or_else(|| {
            DdcError::NumericalFailure("R + B'PB not invertible in Riccati iteration".into())
        })?;
        let k = &rb_inv * b.transpose() * &p * a;
        let p_next = &weights.qx + a.transpose() * &p * a
            - a.transpose() * &p * b * &k;
        let step = (&p_next - &p).norm();
        p = p_next;
        if step <= 1e-13 * p.norm().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(DdcError::NumericalFailure(
            "Riccati value iteration did not converge".into(),
        ));
    }
    let rb = &weights.r + b.transpose() * &p * b;
    let k = rb
        .try_inverse()
        .ok_or_else(|| {
            DdcError::NumericalFailure("R + B'PB not invertible at the fixed point".into())
        })?
        * b.transpose()
        * &p
        * a;
    let j = p.trace().sqrt();
    Ok((k, j))
}

fn randn_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Seeded random controllable plant with spectral radius drawn from
/// [0.4, 1.25], so both stable and mildly unstable cases appear.
pub fn random_plant(n: usize, m: usize, seed: u64) -> Result<SystemRealization> {
    if n == 0 || m == 0 {
        return Err(DdcError::InvalidArgument(
            "dimensions must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let raw = randn_matrix(&mut rng, n, n);
        let rho = spectral_radius(&raw)?;
        if rho < 1e-6 {
            continue;
        }
        let target = 0.4 + 0.85 * rng.gen::<f64>();
        let a = raw * (target / rho);
        let b = randn_matrix(&mut rng, n, m);
        let sys = SystemRealization::new(a, b)?;
        if is_controllable(&sys) {
            return Ok(sys);
        }
    }
    Err(DdcError::GenerationFailure(format!(
        "no controllable plant found for n={n}, m={m}, seed={seed}"
    )))
}

/// Seeded random gain that destabilizes the plant under u = -K x, with a
/// safety margin: spectral_radius(A - B K) > 1.05.
pub fn random_unstable_gain(sys: &SystemRealization, seed: u64) -> Result<DMatrix<f64>> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..500 {
        let scale = 10f64.powf(rng.gen::<f64>() * 2.0 - 0.5);
        let k = randn_matrix(&mut rng, m, n) * scale;
        let rho = spectral_radius(&(&sys.a - &sys.b * &k))?;
        if rho > 1.05 {
            return Ok(k);
        }
    }
    Err(DdcError::GenerationFailure(format!(
        "no destabilizing gain found for seed={seed}"
    )))
}

/// Seeded random attack plan scaled to sit inside the stealth budget of
/// `cfg` on the given clean data. The direction is Gaussian; the magnitude
/// is the largest fraction of it (up to `max_scale`) that keeps
/// ||W (X0 + A0)||_F <= gamma ||U0||_F.
pub fn random_stealthy_plan(
    h_clean: &HankelPair,
    cfg: &DetectorConfig,
    max_scale: f64,
    seed: u64,
) -> Result<AttackPlan> {
    let n = h_clean.state_dim();
    let t = h_clean.horizon();
    let bound = cfg.gamma() * h_clean.u0.norm();
    if (cfg.w() * &h_clean.x0).norm() > bound {
        return Err(DdcError::Precondition(
            "clean data already violates the stealth bound".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let direction = randn_matrix(&mut rng, n, t + 1);
    let stealth_of = |c: f64| {
        (cfg.w() * (&h_clean.x0 + direction.columns(0, t) * c)).norm()
    };
    let mut scale = max_scale;
    if stealth_of(scale) > bound {
        let (mut lo, mut hi) = (0.0_f64, scale);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if stealth_of(mid) <= bound {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        scale = lo;
    }
    let samples: Vec<DVector<f64>> = (0..=t).map(|j| direction.column(j) * scale).collect();
    AttackPlan::from_samples(samples, AttackPolicy::Custom)
}
