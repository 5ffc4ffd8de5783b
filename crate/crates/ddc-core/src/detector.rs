//! Energy-ratio anomaly detector.
//!
//! The operator watches the ratio of weighted measurement energy to input
//! energy over the whole record, ||W Xtilde||_F / ||U||_F, and raises an
//! alarm when it exceeds a threshold gamma. An attack is stealthy exactly
//! when it keeps that ratio at or below gamma.

use nalgebra::DMatrix;

use crate::data::{HankelPair, TrajectoryDataset};
use crate::error::{DdcError, Result};

/// Detector parameters: a weighting matrix W applied to measurements and
/// the alarm threshold gamma.
#[derive(Debug, Clone)]
pub struct DetectorConfig {
    w: DMatrix<f64>,
    gamma: f64,
}

impl DetectorConfig {
    pub fn new(w: DMatrix<f64>, gamma: f64) -> Result<Self> {
        if w.nrows() == 0 || w.ncols() == 0 {
            return Err(DdcError::InvalidArgument(
                "detector weight W must be nonempty".into(),
            ));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(DdcError::InvalidArgument(
                "detector weight W must be finite".into(),
            ));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(DdcError::InvalidArgument(format!(
                "detector threshold gamma must be positive and finite, got {gamma}"
            )));
        }
        Ok(Self { w, gamma })
    }

    /// W = I_n with the given threshold.
    pub fn identity(n: usize, gamma: f64) -> Result<Self> {
        Self::new(DMatrix::identity(n, n), gamma)
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Outcome of running the detector over a record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// ||W Xtilde||_F / ||U||_F over the record's synthesis window.
    pub ratio: f64,
    /// True when the ratio strictly exceeds gamma.
    pub alarm: bool,
}

fn check_weight_dim(w: &DMatrix<f64>, n: usize) -> Result<()> {
    if w.ncols() != n {
        return Err(DdcError::InvalidArgument(format!(
            "detector weight W has {} columns but measurements have dimension {n}",
            w.ncols()
        )));
    }
    Ok(())
}

/// Run the detector on a recorded dataset. The window matches what the
/// operator would feed to synthesis: measurements 0..T-1 against inputs
/// 0..T-1.
pub fn detect(ds: &TrajectoryDataset, cfg: &DetectorConfig) -> Result<Detection> {
    check_weight_dim(&cfg.w, ds.measurement_dim())?;
    let t = ds.horizon();
    let n = ds.measurement_dim();
    let m = ds.input_dim();
    let mut x = DMatrix::zeros(n, t);
    let mut u = DMatrix::zeros(m, t);
    for k in 0..t {
        x.set_column(k, &ds.measurements()[k]);
        u.set_column(k, &ds.inputs()[k]);
    }
    let u_norm = u.norm();
    if u_norm == 0.0 {
        return Err(DdcError::InvalidArgument(
            "input record has zero energy; the detector ratio is undefined".into(),
        ));
    }
    let ratio = (&cfg.w * x).norm() / u_norm;
    Ok(Detection {
        ratio,
        alarm: ratio > cfg.gamma,
    })
}

/// Stealth condition on a data matrix pair: ||W X0||_F <= gamma ||U0||_F,
/// inclusive at the boundary. This is the same quantity `detect` computes,
/// expressed on the Hankel data the synthesis consumes.
pub fn frobenius_stealth_check(h: &HankelPair, cfg: &DetectorConfig) -> Result<bool> {
    check_weight_dim(&cfg.w, h.state_dim())?;
    let u_norm = h.u0.norm();
    if u_norm == 0.0 {
        return Err(DdcError::InvalidArgument(
            "input data has zero energy; the stealth ratio is undefined".into(),
        ));
    }
    Ok((&cfg.w * &h.x0).norm() <= cfg.gamma * u_norm)
}
