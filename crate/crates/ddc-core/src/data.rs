//! Hankel matrices, persistency of excitation, dataset assembly, attack
//! application, and CSV persistence.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DdcError, Result};
use crate::lti::{simulate, svd_rank, SystemRealization};

/// Which adversary policy produced an attack plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackPolicy {
    FakeSystem,
    AlternatingH2,
    ConstantBias,
    Custom,
}

impl fmt::Display for AttackPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttackPolicy::FakeSystem => "fake-system",
            AttackPolicy::AlternatingH2 => "alternating-h2",
            AttackPolicy::ConstantBias => "constant-bias",
            AttackPolicy::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl FromStr for AttackPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fake-system" => Ok(AttackPolicy::FakeSystem),
            "alternating-h2" => Ok(AttackPolicy::AlternatingH2),
            "constant-bias" => Ok(AttackPolicy::ConstantBias),
            "custom" => Ok(AttackPolicy::Custom),
            other => Err(format!("unknown attack policy `{other}`")),
        }
    }
}

/// Whether a dataset holds pristine measurements or attacked ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Clean,
    Attacked(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Clean => f.write_str("clean"),
            Provenance::Attacked(policy) => write!(f, "attacked:{policy}"),
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "clean" {
            return Ok(Provenance::Clean);
        }
        if let Some(policy) = s.strip_prefix("attacked:") {
            if policy.is_empty() {
                return Err("attacked provenance needs a policy id".into());
            }
            return Ok(Provenance::Attacked(policy.to_string()));
        }
        Err(format!("unknown provenance `{s}`"))
    }
}

/// A recorded experiment: inputs u[0..T-1] and measurements x[0..T].
///
/// The horizon must satisfy T >= (m+1)n + m, the minimum sample count for
/// data-driven stabilization; shorter records are rejected outright.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    inputs: Vec<DVector<f64>>,
    measurements: Vec<DVector<f64>>,
    provenance: Provenance,
    seed: Option<u64>,
}

impl TrajectoryDataset {
    pub fn new(
        inputs: Vec<DVector<f64>>,
        measurements: Vec<DVector<f64>>,
        provenance: Provenance,
        seed: Option<u64>,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(DdcError::InvalidArgument(
                "dataset needs at least one input sample".into(),
            ));
        }
        if measurements.len() != inputs.len() + 1 {
            return Err(DdcError::InvalidArgument(format!(
                "expected {} measurements for {} inputs, got {}",
                inputs.len() + 1,
                inputs.len(),
                measurements.len()
            )));
        }
        let m = inputs[0].nrows();
        let n = measurements[0].nrows();
        if m == 0 || n == 0 {
            return Err(DdcError::InvalidArgument(
                "input and measurement dimensions must be positive".into(),
            ));
        }
        if inputs.iter().any(|u| u.nrows() != m) {
            return Err(DdcError::InvalidArgument(
                "inconsistent input dimensions across samples".into(),
            ));
        }
        if measurements.iter().any(|x| x.nrows() != n) {
            return Err(DdcError::InvalidArgument(
                "inconsistent measurement dimensions across samples".into(),
            ));
        }
        let finite = inputs
            .iter()
            .chain(measurements.iter())
            .all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(DdcError::InvalidArgument(
                "dataset entries must be finite".into(),
            ));
        }
        let t = inputs.len();
        let bound = (m + 1) * n + m;
        if t < bound {
            return Err(DdcError::Precondition(format!(
                "horizon T={t} is below the minimum (m+1)n+m = {bound} for n={n}, m={m}"
            )));
        }
        Ok(Self {
            inputs,
            measurements,
            provenance,
            seed,
        })
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn measurements(&self) -> &[DVector<f64>] {
        &self.measurements
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].nrows()
    }

    pub fn measurement_dim(&self) -> usize {
        self.measurements[0].nrows()
    }
}

/// The three data matrices of the behavioral setup: U0 holds u[0..T-1],
/// X0 holds x[0..T-1], X1 holds x[1..T], one sample per column.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelPair {
    pub u0: DMatrix<f64>,
    pub x0: DMatrix<f64>,
    pub x1: DMatrix<f64>,
}

impl HankelPair {
    pub fn new(u0: DMatrix<f64>, x0: DMatrix<f64>, x1: DMatrix<f64>) -> Result<Self> {
        let t = u0.ncols();
        if x0.ncols() != t || x1.ncols() != t {
            return Err(DdcError::InvalidArgument(format!(
                "column counts differ: U0 has {}, X0 has {}, X1 has {}",
                t,
                x0.ncols(),
                x1.ncols()
            )));
        }
        if x0.nrows() != x1.nrows() {
            return Err(DdcError::InvalidArgument(
                "X0 and X1 must have the same row count".into(),
            ));
        }
        // Shift consistency: both matrices window the same signal, so
        // X0's columns 1..T-1 must be X1's columns 0..T-2.
        for c in 1..t {
            let lhs = x0.column(c);
            let rhs = x1.column(c - 1);
            if lhs != rhs {
                return Err(DdcError::InvalidArgument(format!(
                    "X0/X1 shift mismatch at column {c}"
                )));
            }
        }
        Ok(Self { u0, x0, x1 })
    }

    pub fn horizon(&self) -> usize {
        self.u0.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.u0.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.x0.nrows()
    }
}

/// An attack sequence a[0..T] with its windowed matrices A0 = [a[0..T-1]]
/// and A1 = [a[1..T]].
#[derive(Debug, Clone, PartialEq)]
pub struct AttackPlan {
    samples: Vec<DVector<f64>>,
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub policy: AttackPolicy,
}

impl AttackPlan {
    /// Builds the windowed matrices from the raw samples; the shift
    /// consistency between A0 and A1 then holds by construction.
    pub fn from_samples(samples: Vec<DVector<f64>>, policy: AttackPolicy) -> Result<Self> {
        if samples.len() < 2 {
            return Err(DdcError::InvalidArgument(
                "attack plan needs at least two samples (a[0] and a[1])".into(),
            ));
        }
        let n = samples[0].nrows();
        if n == 0 || samples.iter().any(|a| a.nrows() != n) {
            return Err(DdcError::InvalidArgument(
                "attack samples must share a positive dimension".into(),
            ));
        }
        if !samples.iter().all(|a| a.iter().all(|v| v.is_finite())) {
            return Err(DdcError::InvalidArgument(
                "attack samples must be finite".into(),
            ));
        }
        let t = samples.len() - 1;
        let a0 = matrix_from_columns(&samples[..t]);
        let a1 = matrix_from_columns(&samples[1..]);
        Ok(Self {
            samples,
            a0,
            a1,
            policy,
        })
    }

    pub fn zero(n: usize, horizon: usize, policy: AttackPolicy) -> Result<Self> {
        Self::from_samples(vec![DVector::zeros(n); horizon + 1], policy)
    }

    /// a[k] = rho * 1 for every k.
    pub fn constant_bias(n: usize, horizon: usize, rho: f64) -> Result<Self> {
        Self::from_samples(
            vec![DVector::from_element(n, rho); horizon + 1],
            AttackPolicy::ConstantBias,
        )
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    pub fn horizon(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.samples[0].nrows()
    }

    /// Scales every sample (and the windowed matrices) by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|a| a * factor).collect(),
            a0: &self.a0 * factor,
            a1: &self.a1 * factor,
            policy: self.policy,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|a| a.iter().all(|v| *v == 0.0))
    }
}

fn matrix_from_columns(cols: &[DVector<f64>]) -> DMatrix<f64> {
    let n = cols[0].nrows();
    let mut m = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.column_mut(j).copy_from(c);
    }
    m
}

/// Block Hankel matrix of a vector signal: block row r, column c holds
/// signal[start + r + c], with `depth` block rows and `cols` columns.
pub fn hankel(
    signal: &[DVector<f64>],
    start: usize,
    depth: usize,
    cols: usize,
) -> Result<DMatrix<f64>> {
    if depth == 0 || cols == 0 {
        return Err(DdcError::InvalidArgument(
            "Hankel depth and column count must be positive".into(),
        ));
    }
    if signal.is_empty() {
        return Err(DdcError::InvalidArgument("signal is empty".into()));
    }
    let needed = start + depth + cols - 1;
    if needed > signal.len() {
        return Err(DdcError::InvalidArgument(format!(
            "signal too short: need {} samples from index {}, have {}",
            depth + cols - 1,
            start,
            signal.len().saturating_sub(start)
        )));
    }
    let q = signal[0].nrows();
    if signal.iter().any(|v| v.nrows() != q) {
        return Err(DdcError::InvalidArgument(
            "signal samples must share one dimension".into(),
        ));
    }
    let mut h = DMatrix::zeros(depth * q, cols);
    for r in 0..depth {
        for c in 0..cols {
            h.view_mut((r * q, c), (q, 1))
                .copy_from(&signal[start + r + c]);
        }
    }
    Ok(h)
}

/// Persistency of excitation of order `order`: the depth-`order` Hankel
/// matrix of the input, with T - order + 1 columns, has full row rank
/// order * m. Errors (rather than answering false) when the horizon is too
/// short for the test to be meaningful.
pub fn is_pe(u: &[DVector<f64>], order: usize) -> Result<bool> {
    if order == 0 {
        return Err(DdcError::InvalidArgument(
            "PE order must be at least 1".into(),
        ));
    }
    let t = u.len();
    if t < order {
        return Err(DdcError::InvalidArgument(format!(
            "horizon {t} is shorter than the PE order {order}"
        )));
    }
    let m = u[0].nrows();
    let cols = t - order + 1;
    if cols < order * m {
        return Err(DdcError::InvalidArgument(format!(
            "horizon {t} cannot support PE of order {order} for {m} inputs \
             ({cols} columns < {} rows)",
            order * m
        )));
    }
    let h = hankel(u, 0, order, cols)?;
    Ok(svd_rank(&h) == order * m)
}

/// Draws a seeded standard-normal input sequence and verifies it is PE of
/// the requested order, re-drawing up to 10 times.
pub fn gen_pe_input(m: usize, t: usize, order: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    if m == 0 || order == 0 {
        return Err(DdcError::InvalidArgument(
            "input dimension and PE order must be positive".into(),
        ));
    }
    let bound = (order + 1) * m + order - 1;
    if t < bound {
        return Err(DdcError::InvalidArgument(format!(
            "horizon T={t} is below the PE generation bound {bound} for m={m}, order={order}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10 {
        let u: Vec<DVector<f64>> = (0..t)
            .map(|_| DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        if is_pe(&u, order)? {
            return Ok(u);
        }
    }
    Err(DdcError::GenerationFailure(format!(
        "failed to draw a PE input of order {order} in 10 attempts (m={m}, T={t}, seed={seed})"
    )))
}

/// Runs the plant from x[0] = 0 under `u` and records measurements
/// x~[k] = x[k] + a[k]; without an attack the measurements are the states.
pub fn collect_dataset(
    sys: &SystemRealization,
    u: &[DVector<f64>],
    attack: Option<&AttackPlan>,
) -> Result<TrajectoryDataset> {
    let x0 = DVector::zeros(sys.state_dim());
    let traj = simulate(sys, u, &x0)?;
    let (measurements, provenance) = match attack {
        None => (traj.states.clone(), Provenance::Clean),
        Some(plan) => {
            if plan.horizon() != u.len() {
                return Err(DdcError::InvalidArgument(format!(
                    "attack plan horizon {} does not match input horizon {}",
                    plan.horizon(),
                    u.len()
                )));
            }
            if plan.dim() != sys.state_dim() {
                return Err(DdcError::InvalidArgument(format!(
                    "attack dimension {} does not match state dimension {}",
                    plan.dim(),
                    sys.state_dim()
                )));
            }
            let forged = traj
                .states
                .iter()
                .zip(plan.samples())
                .map(|(x, a)| x + a)
                .collect();
            (forged, Provenance::Attacked(plan.policy.to_string()))
        }
    };
    TrajectoryDataset::new(u.to_vec(), measurements, provenance, None)
}

/// Windows a dataset into the (U0, X0, X1) matrices.
pub fn to_hankel(ds: &TrajectoryDataset) -> HankelPair {
    let t = ds.horizon();
    let u0 = matrix_from_columns(&ds.inputs()[..t]);
    let x0 = matrix_from_columns(&ds.measurements()[..t]);
    let x1 = matrix_from_columns(&ds.measurements()[1..]);
    HankelPair::new(u0, x0, x1).expect("windowed matrices are shift-consistent by construction")
}

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    n: usize,
    m: usize,
    #[serde(rename = "T")]
    t: usize,
    provenance: String,
    seed: Option<u64>,
}

/// Resolves the `.ddc.csv` / `.ddc.json` pair for a dataset path. The
/// suffix may be omitted, or either file of the pair may be named directly.
pub fn dataset_paths(path: &Path) -> (PathBuf, PathBuf) {
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let base = name
        .strip_suffix(".ddc.csv")
        .or_else(|| name.strip_suffix(".ddc.json"))
        .unwrap_or(&name)
        .to_string();
    let csv = path.with_file_name(format!("{base}.ddc.csv"));
    let json = path.with_file_name(format!("{base}.ddc.json"));
    (csv, json)
}

/// Writes the dataset as `<base>.ddc.csv` plus a `<base>.ddc.json` sidecar.
/// Values are printed with the shortest round-trip decimal form, so a
/// save/load/save cycle is byte-identical.
pub fn save_dataset(ds: &TrajectoryDataset, path: &Path) -> Result<()> {
    let (csv_path, json_path) = dataset_paths(path);
    let m = ds.input_dim();
    let n = ds.measurement_dim();

    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_io_error)?;
    let mut header = vec!["k".to_string()];
    header.extend((1..=m).map(|i| format!("u_{i}")));
    header.extend((1..=n).map(|i| format!("x_{i}")));
    w.write_record(&header).map_err(csv_io_error)?;
    for k in 0..=ds.horizon() {
        let mut record = vec![k.to_string()];
        if k < ds.horizon() {
            record.extend(ds.inputs()[k].iter().map(|v| v.to_string()));
        } else {
            // The final sample has no input; leave the u cells empty.
            record.extend(std::iter::repeat(String::new()).take(m));
        }
        record.extend(ds.measurements()[k].iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(csv_io_error)?;
    }
    w.flush()?;

    let meta = DatasetMeta {
        n,
        m,
        t: ds.horizon(),
        provenance: ds.provenance().to_string(),
        seed: ds.seed(),
    };
    let json = serde_json::to_string_pretty(&meta)
        .map_err(|e| DdcError::SolverFailure(format!("metadata serialization failed: {e}")))?;
    fs::write(&json_path, json + "\n")?;
    Ok(())
}

fn csv_io_error(e: csv::Error) -> DdcError {
    match e.kind() {
        csv::ErrorKind::Io(_) => {
            DdcError::Io(std::io::Error::other(e.to_string()))
        }
        _ => DdcError::Parse {
            line: e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(0),
            msg: e.to_string(),
        },
    }
}

/// Loads a dataset saved by [`save_dataset`], validating shape and metadata.
pub fn load_dataset(path: &Path) -> Result<TrajectoryDataset> {
    let (csv_path, json_path) = dataset_paths(path);
    let meta_raw = fs::read_to_string(&json_path)?;
    let meta: DatasetMeta = serde_json::from_str(&meta_raw).map_err(|e| DdcError::Parse {
        line: e.line(),
        msg: format!("bad dataset sidecar: {e}"),
    })?;
    let provenance =
        Provenance::from_str(&meta.provenance).map_err(|msg| DdcError::Parse { line: 0, msg })?;

    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(&csv_path)
        .map_err(csv_io_error)?;
    let expected_fields = 1 + meta.m + meta.n;
    {
        let header = reader.headers().map_err(csv_io_error)?;
        if header.len() != expected_fields {
            return Err(DdcError::Parse {
                line: 1,
                msg: format!(
                    "header has {} columns, metadata implies {expected_fields}",
                    header.len()
                ),
            });
        }
    }

    let mut inputs = Vec::with_capacity(meta.t);
    let mut measurements = Vec::with_capacity(meta.t + 1);
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(csv_io_error)?;
        let line = idx + 2; // header is line 1
        if record.len() != expected_fields {
            return Err(DdcError::Parse {
                line,
                msg: format!(
                    "row has {} columns, expected {expected_fields}",
                    record.len()
                ),
            });
        }
        let k: usize = record[0].parse().map_err(|_| DdcError::Parse {
            line,
            msg: format!("bad sample index `{}`", &record[0]),
        })?;
        if k != idx {
            return Err(DdcError::Parse {
                line,
                msg: format!("sample index {k} out of order (expected {idx})"),
            });
        }
        let parse_cell = |cell: &str, what: &str| -> Result<f64> {
            cell.parse::<f64>().map_err(|_| DdcError::Parse {
                line,
                msg: format!("bad {what} value `{cell}`"),
            })
        };
        if k < meta.t {
            let mut u = DVector::zeros(meta.m);
            for i in 0..meta.m {
                u[i] = parse_cell(&record[1 + i], "input")?;
            }
            inputs.push(u);
        } else {
            for i in 0..meta.m {
                if !record[1 + i].is_empty() {
                    return Err(DdcError::Parse {
                        line,
                        msg: "final sample must have empty input cells".into(),
                    });
                }
            }
        }
        let mut x = DVector::zeros(meta.n);
        for i in 0..meta.n {
            x[i] = parse_cell(&record[1 + meta.m + i], "measurement")?;
        }
        measurements.push(x);
    }
    if measurements.len() != meta.t + 1 {
        return Err(DdcError::Parse {
            line: measurements.len() + 1,
            msg: format!(
                "expected {} data rows, found {}",
                meta.t + 1,
                measurements.len()
            ),
        });
    }
    TrajectoryDataset::new(inputs, measurements, provenance, meta.seed)
}
