//! Discrete-time LTI plant models and the handful of system-theoretic
//! quantities the rest of the crate needs: discretization, spectral radius,
//! controllability, finite-horizon l2 gain, and the H2 cost of a
//! state-feedback loop.

use nalgebra::{DMatrix, DVector};

use crate::error::{DdcError, Result};

/// Relative cutoff for numerical rank decisions: singular values below
/// `RANK_REL_TOL * sigma_max` count as zero.
pub const RANK_REL_TOL: f64 = 1e-8;

/// Margin inside the unit circle below which a spectral radius is treated as
/// strictly stable.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// A discrete-time realization x[k+1] = A x[k] + B u[k].
#[derive(Debug, Clone, PartialEq)]
pub struct SystemRealization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl SystemRealization {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(DdcError::InvalidArgument(format!(
                "state matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() {
            return Err(DdcError::InvalidArgument(format!(
                "input matrix has {} rows but the state dimension is {}",
                b.nrows(),
                a.nrows()
            )));
        }
        if a.nrows() == 0 || b.ncols() == 0 {
            return Err(DdcError::InvalidArgument(
                "state and input dimensions must be positive".into(),
            ));
        }
        if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
            return Err(DdcError::InvalidArgument(
                "system matrices must be finite".into(),
            ));
        }
        Ok(Self { a, b })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
}

/// A simulated or measured run: states x[0..T] and the inputs u[0..T-1]
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
}

impl StateTrajectory {
    pub fn new(states: Vec<DVector<f64>>, inputs: Vec<DVector<f64>>) -> Result<Self> {
        if states.len() != inputs.len() + 1 {
            return Err(DdcError::InvalidArgument(format!(
                "expected one more state than inputs, got {} states and {} inputs",
                states.len(),
                inputs.len()
            )));
        }
        Ok(Self { states, inputs })
    }

    /// Number of input samples T; there are T+1 states.
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }
}

/// Cost weights for the H2 problem: Qx on the state, R on the input.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceWeights {
    pub qx: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl PerformanceWeights {
    /// Validates symmetry, Qx positive semidefinite, R positive definite.
    pub fn new(qx: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        for (name, mat) in [("Qx", &qx), ("R", &r)] {
            if mat.nrows() != mat.ncols() {
                return Err(DdcError::InvalidArgument(format!("{name} must be square")));
            }
            let asym = (mat - mat.transpose()).norm();
            if asym > 1e-10 * (1.0 + mat.norm()) {
                return Err(DdcError::InvalidArgument(format!(
                    "{name} must be symmetric (asymmetry {asym:.3e})"
                )));
            }
        }
        let scale_q = 1.0 + qx.norm();
        let min_eig_q = qx.symmetric_eigenvalues().min();
        if min_eig_q < -1e-10 * scale_q {
            return Err(DdcError::InvalidArgument(format!(
                "Qx must be positive semidefinite (min eigenvalue {min_eig_q:.3e})"
            )));
        }
        let scale_r = 1.0 + r.norm();
        let min_eig_r = r.symmetric_eigenvalues().min();
        if min_eig_r <= 1e-10 * scale_r {
            return Err(DdcError::InvalidArgument(format!(
                "R must be positive definite (min eigenvalue {min_eig_r:.3e})"
            )));
        }
        Ok(Self { qx, r })
    }

    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            qx: DMatrix::identity(n, n),
            r: DMatrix::identity(m, m),
        }
    }

    /// Symmetric PSD square root, via the spectral decomposition.
    pub fn r_sqrt(&self) -> DMatrix<f64> {
        symmetric_sqrt(&self.r)
    }
}

/// Square root of a symmetric PSD matrix; eigenvalues clipped at zero.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Exact zero-order-hold discretization of xdot = Ac x + Bc u with sampling
/// time `ts`, via the exponential of the augmented matrix [[Ac, Bc], [0, 0]].
pub fn zoh_discretize(ac: &DMatrix<f64>, bc: &DMatrix<f64>, ts: f64) -> Result<SystemRealization> {
    let cont = SystemRealization::new(ac.clone(), bc.clone())?;
    if !(ts.is_finite() && ts > 0.0) {
        return Err(DdcError::InvalidArgument(format!(
            "sampling time must be positive and finite, got {ts}"
        )));
    }
    let n = cont.state_dim();
    let m = cont.input_dim();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(ac);
    aug.view_mut((0, n), (n, m)).copy_from(bc);
    let phi = (aug * ts).exp();
    let a = phi.view((0, 0), (n, n)).into_owned();
    let b = phi.view((0, n), (n, m)).into_owned();
    SystemRealization::new(a, b)
}

/// Tustin (bilinear) discretization: A = (I - Ts/2 Ac)^-1 (I + Ts/2 Ac),
/// B = (I - Ts/2 Ac)^-1 Ts Bc.
pub fn bilinear_discretize(
    ac: &DMatrix<f64>,
    bc: &DMatrix<f64>,
    ts: f64,
) -> Result<SystemRealization> {
    let cont = SystemRealization::new(ac.clone(), bc.clone())?;
    if !(ts.is_finite() && ts > 0.0) {
        return Err(DdcError::InvalidArgument(format!(
            "sampling time must be positive and finite, got {ts}"
        )));
    }
    let n = cont.state_dim();
    let eye = DMatrix::identity(n, n);
    let minus = &eye - ac * (ts / 2.0);
    let plus = &eye + ac * (ts / 2.0);
    let inv = minus.clone().try_inverse().ok_or_else(|| {
        DdcError::NumericalFailure("bilinear transform is singular at this sampling time".into())
    })?;
    SystemRealization::new(&inv * plus, inv * bc * ts)
}

/// Largest eigenvalue magnitude of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(DdcError::InvalidArgument(format!(
            "spectral radius needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(DdcError::NumericalFailure(
            "matrix has non-finite entries".into(),
        ));
    }
    let eigs = m.complex_eigenvalues();
    Ok(eigs.iter().map(|e| e.norm()).fold(0.0, f64::max))
}

/// Whether `rho(m) < 1` with a small safety margin.
pub fn is_schur_stable(m: &DMatrix<f64>) -> Result<bool> {
    Ok(spectral_radius(m)? < 1.0 - STABILITY_MARGIN)
}

/// Numerical rank with a relative singular-value cutoff.
pub fn svd_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    if smax <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_REL_TOL * smax).count()
}

/// Rank of the controllability matrix [B, AB, ..., A^(n-1) B].
pub fn controllability_rank(sys: &SystemRealization) -> usize {
    let n = sys.state_dim();
    let m = sys.input_dim();
    let mut ctrb = DMatrix::zeros(n, n * m);
    let mut block = sys.b.clone();
    for j in 0..n {
        ctrb.view_mut((0, j * m), (n, m)).copy_from(&block);
        block = &sys.a * block;
    }
    svd_rank(&ctrb)
}

pub fn is_controllable(sys: &SystemRealization) -> bool {
    controllability_rank(sys) == sys.state_dim()
}

/// Simulate x[k+1] = A x[k] + B u[k] from `x0` over the given inputs.
pub fn simulate(
    sys: &SystemRealization,
    inputs: &[DVector<f64>],
    x0: &DVector<f64>,
) -> Result<StateTrajectory> {
    if x0.nrows() != sys.state_dim() {
        return Err(DdcError::InvalidArgument(format!(
            "initial state has dimension {}, expected {}",
            x0.nrows(),
            sys.state_dim()
        )));
    }
    if inputs.is_empty() {
        return Err(DdcError::InvalidArgument(
            "input sequence must be nonempty".into(),
        ));
    }
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(x0.clone());
    for (k, u) in inputs.iter().enumerate() {
        if u.nrows() != sys.input_dim() {
            return Err(DdcError::InvalidArgument(format!(
                "input {} has dimension {}, expected {}",
                k,
                u.nrows(),
                sys.input_dim()
            )));
        }
        let next = &sys.a * states.last().unwrap() + &sys.b * u;
        states.push(next);
    }
    StateTrajectory::new(states, inputs.to_vec())
}

/// Worst-case l2 gain from inputs u[0..T-1] to the weighted states
/// W x[1..T] they produce from rest (x[0] = 0 contributes nothing to the
/// state norm), i.e. the largest singular value of the block-lower-triangular
/// convolution operator over the horizon.
pub fn finite_horizon_l2_gain(
    sys: &SystemRealization,
    w: &DMatrix<f64>,
    horizon: usize,
) -> Result<f64> {
    if horizon == 0 {
        return Err(DdcError::InvalidArgument(
            "horizon must be at least 1".into(),
        ));
    }
    if w.ncols() != sys.state_dim() {
        return Err(DdcError::InvalidArgument(format!(
            "weight matrix has {} columns but the state dimension is {}",
            w.ncols(),
            sys.state_dim()
        )));
    }
    let p = w.nrows();
    let m = sys.input_dim();
    // Row block k holds the weighted impulse responses reaching x[k+1]:
    //   W x[k+1] = sum_{j<=k} W A^(k-j) B u[j].
    let mut blocks = Vec::with_capacity(horizon);
    let mut power = sys.b.clone();
    blocks.push(w * &power);
    for _ in 1..horizon {
        power = &sys.a * power;
        blocks.push(w * &power);
    }
    let mut toeplitz = DMatrix::zeros(horizon * p, horizon * m);
    for k in 0..horizon {
        for j in 0..=k {
            toeplitz
                .view_mut((k * p, j * m), (p, m))
                .copy_from(&blocks[k - j]);
        }
    }
    if !toeplitz.iter().all(|v| v.is_finite()) {
        return Err(DdcError::NumericalFailure(
            "impulse response overflowed over this horizon".into(),
        ));
    }
    Ok(toeplitz.singular_values()[0])
}

/// H2 cost of the loop u = -K x driven by unit-covariance process noise:
/// J = sqrt(trace((Qx + K' R K) P)) with P the closed-loop controllability
/// Gramian, P = (A - B K) P (A - B K)' + I. Returns infinity when the loop
/// is not strictly stable.
pub fn h2_cost(
    sys: &SystemRealization,
    k_gain: &DMatrix<f64>,
    weights: &PerformanceWeights,
) -> Result<f64> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    if k_gain.nrows() != m || k_gain.ncols() != n {
        return Err(DdcError::InvalidArgument(format!(
            "gain must be {}x{}, got {}x{}",
            m,
            n,
            k_gain.nrows(),
            k_gain.ncols()
        )));
    }
    if weights.qx.nrows() != n || weights.r.nrows() != m {
        return Err(DdcError::InvalidArgument(
            "weight dimensions do not match the system".into(),
        ));
    }
    let acl = &sys.a - &sys.b * k_gain;
    if !is_schur_stable(&acl)? {
        return Ok(f64::INFINITY);
    }
    let p = solve_discrete_lyapunov(&acl, &DMatrix::identity(n, n))?;
    let weight = &weights.qx + k_gain.transpose() * &weights.r * k_gain;
    let cost_sq = (weight * p).trace();
    if cost_sq < -1e-9 {
        return Err(DdcError::NumericalFailure(format!(
            "H2 cost came out negative ({cost_sq:.3e})"
        )));
    }
    Ok(cost_sq.max(0.0).sqrt())
}

/// Solve P = A P A' + Q for symmetric Q via the Kronecker-vectorized linear
/// system (I - A (x) A) vec(P) = vec(Q).
pub fn solve_discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(DdcError::InvalidArgument(
            "Lyapunov solve needs square matrices of matching size".into(),
        ));
    }
    let kron = a.kronecker(a);
    let lhs = DMatrix::identity(n * n, n * n) - kron;
    let rhs = DVector::from_column_slice(q.as_slice());
    let sol = lhs.lu().solve(&rhs).ok_or_else(|| {
        DdcError::NumericalFailure("Lyapunov equation is singular (eigenvalue product 1)".into())
    })?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    // Symmetrize away the last few ulps of asymmetry from the linear solve.
    Ok((&p + p.transpose()) * 0.5)
}
