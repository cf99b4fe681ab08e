//! Linear cocycles: i.i.d. random matrix products and products driven by an
//! irrational rotation of the circle.
//!
//! Every estimator is deterministic in its master seed. Trial `t` uses the
//! stream [`crate::seed::stream_seed`]`(seed, t)` and results are aggregated
//! in ascending trial order, so the thread count never changes an answer.
//!
//! ```
//! use randlocal::cocycle::{lyapunov_spectrum, CocycleSpec, MatrixEnsemble};
//! use randlocal::linalg::real_matrix;
//!
//! let spec = CocycleSpec::Iid(MatrixEnsemble::new(vec![
//!     (real_matrix(&[&[0.5, 0.0], &[0.0, 1.0]]), 0.5),
//!     (real_matrix(&[&[0.5, 1.0], &[0.0, 1.0]]), 0.5),
//! ]).unwrap());
//! let spectrum = lyapunov_spectrum(&spec, 2000, 20, 7, 0.05).unwrap();
//! assert_eq!(spectrum.entries.len(), 2);
//! assert!(spectrum.entries[0].kappa.abs() < 0.01);
//! assert!((spectrum.entries[1].kappa + 2f64.ln()).abs() < 0.01);
//! ```

mod form;
mod product;

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c, diag, hermitian_eigen, hermitize, log_abs_det, CMatrix};
use crate::record::{ext_f64, ext_f64_vec};
use crate::seed::{cumulative, rng_from_seed, sample_index, stream_seed};

pub use form::{find_invariant_form, InvariantForm, InvariantFormFailure, InvariantFormOutcome, FORM_MAX_ITERS};
pub(crate) use product::ProductTracker;

/// Multiplications between two re-orthogonalizations of a running product.
pub const RENORMALIZATION_PERIOD: usize = 10;
pub const DEFAULT_GAP_THRESHOLD: f64 = 0.05;
/// Points of the equispaced rule used for `E log|det|` under a rotation driver.
pub const ROTATION_QUADRATURE_POINTS: u64 = 1 << 16;

#[derive(Debug, Error)]
pub enum CocycleError {
    #[error("an ensemble needs at least one atom")]
    EmptyEnsemble,
    #[error("atom {index} is {rows}x{cols}, expected {dim}x{dim}")]
    BadShape { index: usize, rows: usize, cols: usize, dim: usize },
    #[error("atom {index} has invalid probability {prob}")]
    BadProbability { index: usize, prob: f64 },
    #[error("probabilities sum to {0}, not 1")]
    ProbabilitySum(f64),
    #[error("generator {0} is not invertible")]
    SingularGenerator(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operation needs an i.i.d. driver")]
    NotIid,
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("invalid ensemble text: {0}")]
    Syntax(#[from] serde_json::Error),
}

/// A point of the circle `R/Z` stored as a 64-bit binary fraction, so that
/// rotation is exact wrapping addition and orbit points never drift.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CirclePoint(pub u64);

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

impl CirclePoint {
    /// Nearest representable point to `x mod 1`.
    pub fn from_f64(x: f64) -> CirclePoint {
        let frac = x - x.floor();
        let scaled = (frac * TWO_POW_64).round();
        if scaled >= TWO_POW_64 {
            CirclePoint(0)
        } else {
            CirclePoint(scaled as u64)
        }
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / TWO_POW_64
    }

    pub fn rotate(self, by: CirclePoint) -> CirclePoint {
        CirclePoint(self.0.wrapping_add(by.0))
    }

    pub fn rotate_n(self, by: CirclePoint, n: u64) -> CirclePoint {
        CirclePoint(self.0.wrapping_add(by.0.wrapping_mul(n)))
    }

    /// Signed offset `self - center` in `[-1/2, 1/2)`, in units of `2^-64`.
    pub fn offset_from(self, center: CirclePoint) -> i64 {
        self.0.wrapping_sub(center.0) as i64
    }
}

/// Finitely supported probability measure on `m x m` complex matrices.
#[derive(Clone, Debug)]
pub struct MatrixEnsemble {
    dim: usize,
    atoms: Vec<CMatrix>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    log_dets: Vec<f64>,
}

impl MatrixEnsemble {
    pub fn new(atoms: Vec<(CMatrix, f64)>) -> Result<MatrixEnsemble, CocycleError> {
        let Some(first) = atoms.first() else {
            return Err(CocycleError::EmptyEnsemble);
        };
        let dim = first.0.nrows();
        let mut total = 0.0;
        for (index, (m, p)) in atoms.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim || dim == 0 {
                return Err(CocycleError::BadShape { index, rows: m.nrows(), cols: m.ncols(), dim });
            }
            if !(p.is_finite() && *p >= 0.0) {
                return Err(CocycleError::BadProbability { index, prob: *p });
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(CocycleError::ProbabilitySum(total));
        }
        let probs: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        let log_dets = atoms.iter().map(|a| log_abs_det(&a.0)).collect();
        Ok(MatrixEnsemble {
            dim,
            cumulative: cumulative(&probs),
            probs,
            atoms: atoms.into_iter().map(|a| a.0).collect(),
            log_dets,
        })
    }

    /// Equal weights on the given matrices.
    pub fn uniform(atoms: Vec<CMatrix>) -> Result<MatrixEnsemble, CocycleError> {
        let p = 1.0 / atoms.len().max(1) as f64;
        MatrixEnsemble::new(atoms.into_iter().map(|m| (m, p)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom(&self, i: usize) -> &CMatrix {
        &self.atoms[i]
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&CMatrix, f64)> {
        self.atoms.iter().zip(self.probs.iter().copied())
    }

    /// `sum_i p_i log|det A_i|`; `-inf` when a charged atom is singular.
    pub fn expected_log_det(&self) -> f64 {
        self.log_dets
            .iter()
            .zip(&self.probs)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&l, &p)| p * l)
            .sum()
    }

    /// Multiply every atom by `factor`.
    pub fn scaled(&self, factor: f64) -> MatrixEnsemble {
        MatrixEnsemble::new(
            self.atoms
                .iter()
                .zip(&self.probs)
                .map(|(m, &p)| (m.map(|z| z * factor), p))
                .collect(),
        )
        .expect("scaling preserves validity")
    }

    pub(crate) fn sample<R: RngCore>(&self, rng: &mut R) -> usize {
        sample_index(rng, &self.cumulative)
    }

    pub fn to_record(&self) -> MatrixEnsembleRecord {
        MatrixEnsembleRecord {
            dimension: self.dim,
            atoms: self
                .atoms
                .iter()
                .zip(&self.probs)
                .map(|(m, &prob)| MatrixAtomRecord {
                    matrix: (0..self.dim)
                        .map(|i| (0..self.dim).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                        .collect(),
                    prob,
                })
                .collect(),
        }
    }

    pub fn from_record(record: &MatrixEnsembleRecord) -> Result<MatrixEnsemble, CocycleError> {
        let dim = record.dimension;
        let mut atoms = Vec::with_capacity(record.atoms.len());
        for (index, atom) in record.atoms.iter().enumerate() {
            if atom.matrix.len() != dim || atom.matrix.iter().any(|row| row.len() != dim) {
                return Err(CocycleError::Schema(format!("atom {index} is not a {dim}x{dim} matrix")));
            }
            let m = CMatrix::from_fn(dim, dim, |i, j| c(atom.matrix[i][j][0], atom.matrix[i][j][1]));
            atoms.push((m, atom.prob));
        }
        MatrixEnsemble::new(atoms)
    }
}

/// Ensemble file: `{dimension, atoms: [{matrix: [[[re, im], ...], ...], prob}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixEnsembleRecord {
    pub dimension: usize,
    pub atoms: Vec<MatrixAtomRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixAtomRecord {
    pub matrix: Vec<Vec<[f64; 2]>>,
    pub prob: f64,
}

pub type MatrixFn = Arc<dyn Fn(CirclePoint) -> CMatrix + Send + Sync>;

/// Deterministic cocycle `x -> M(x)` over the rotation `x -> x + theta`.
#[derive(Clone)]
pub struct RotationDriver {
    pub dim: usize,
    pub theta: CirclePoint,
    pub matrix: MatrixFn,
    /// Parameters that rebuild the driver from a file.
    pub generator: Option<serde_json::Value>,
}

impl fmt::Debug for RotationDriver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RotationDriver")
            .field("dim", &self.dim)
            .field("theta", &self.theta.to_f64())
            .field("generator", &self.generator)
            .finish()
    }
}

impl RotationDriver {
    /// `M^n_x = M(T^{n-1}x) ... M(x)`.
    pub fn product(&self, x: CirclePoint, n: usize) -> CMatrix {
        let mut acc = CMatrix::identity(self.dim, self.dim);
        let mut p = x;
        for _ in 0..n {
            acc = (self.matrix)(p) * acc;
            p = p.rotate(self.theta);
        }
        acc
    }
}

#[derive(Clone, Debug)]
pub enum CocycleSpec {
    Iid(MatrixEnsemble),
    Rotation(RotationDriver),
}

impl CocycleSpec {
    pub fn dim(&self) -> usize {
        match self {
            CocycleSpec::Iid(e) => e.dim(),
            CocycleSpec::Rotation(r) => r.dim,
        }
    }

    pub fn ensemble(&self) -> Option<&MatrixEnsemble> {
        match self {
            CocycleSpec::Iid(e) => Some(e),
            CocycleSpec::Rotation(_) => None,
        }
    }

    /// `E log|det M|`: exact for i.i.d. drivers, an equispaced midpoint rule
    /// with [`ROTATION_QUADRATURE_POINTS`] nodes for rotation drivers.
    pub fn expected_log_det(&self) -> f64 {
        match self {
            CocycleSpec::Iid(e) => e.expected_log_det(),
            CocycleSpec::Rotation(r) => {
                let n = ROTATION_QUADRATURE_POINTS;
                let step = u64::MAX / n + 1;
                (0..n)
                    .map(|j| log_abs_det(&(r.matrix)(CirclePoint(j * step + step / 2))))
                    .sum::<f64>()
                    / n as f64
            }
        }
    }
}

/// Summary of one sampled product `M^n_omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductSample {
    #[serde(with = "ext_f64_vec")]
    pub log_singular_values: Vec<f64>,
    #[serde(with = "ext_f64")]
    pub log_norm: f64,
    #[serde(with = "ext_f64")]
    pub log_abs_det: f64,
    pub seed: u64,
    pub n: usize,
}

fn check_positive(name: &str, value: usize) -> Result<(), CocycleError> {
    if value == 0 {
        Err(CocycleError::InvalidParameter(format!("{name} must be at least 1")))
    } else {
        Ok(())
    }
}

/// Run the product for one sequence; the sequence is drawn from a stream
/// seeded with `seed` directly.
pub(crate) fn run_product(spec: &CocycleSpec, n: usize, seed: u64, period: usize, mut each: impl FnMut(&mut ProductTracker)) -> ProductTracker {
    let mut rng = rng_from_seed(seed);
    let mut tracker = ProductTracker::new(spec.dim(), period);
    match spec {
        CocycleSpec::Iid(e) => {
            for _ in 0..n {
                let i = e.sample(&mut rng);
                tracker.push(&e.atoms[i], e.log_dets[i]);
                each(&mut tracker);
            }
        }
        CocycleSpec::Rotation(r) => {
            let mut x = CirclePoint(rng.next_u64());
            for _ in 0..n {
                let m = (r.matrix)(x);
                tracker.push(&m, log_abs_det(&m));
                each(&mut tracker);
                x = x.rotate(r.theta);
            }
        }
    }
    tracker
}

/// Sample `M^n_omega` for the sequence determined by `seed`.
pub fn sample_product(spec: &CocycleSpec, n: usize, seed: u64) -> Result<ProductSample, CocycleError> {
    check_positive("n", n)?;
    let mut tracker = run_product(spec, n, seed, RENORMALIZATION_PERIOD, |_| {});
    let (s, _) = tracker.decomposition();
    Ok(ProductSample {
        log_norm: s[0],
        log_singular_values: s,
        log_abs_det: tracker.log_abs_det(),
        seed,
        n,
    })
}

/// Mean and standard error of the mean; a single sample has zero error and
/// any `-inf` sample makes the mean `-inf`.
pub(crate) fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 || !mean.is_finite() {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    #[serde(with = "ext_f64")]
    pub kappa: f64,
    #[serde(with = "ext_f64")]
    pub stderr: f64,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
}

/// Estimate the top exponent `lim n^-1 E log ||M^n||` by averaging over
/// `trials` independent sequences. A singular product contributes `-inf`.
pub fn lyapunov_exponent(spec: &CocycleSpec, n: usize, trials: usize, seed: u64) -> Result<ExponentEstimate, CocycleError> {
    check_positive("n", n)?;
    check_positive("trials", trials)?;
    let per_trial: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut tr = run_product(spec, n, stream_seed(seed, t), RENORMALIZATION_PERIOD, |_| {});
            tr.log_norm() / n as f64
        })
        .collect();
    let (kappa, stderr) = mean_stderr(&per_trial);
    Ok(ExponentEstimate { kappa, stderr, n, trials, seed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    #[serde(with = "ext_f64")]
    pub kappa: f64,
    pub alpha: usize,
    #[serde(with = "ext_f64")]
    pub stderr: f64,
}

/// Distinct Lyapunov indices with multiplicities, strictly decreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovSpectrum {
    pub entries: Vec<SpectrumEntry>,
    /// All `m` averaged exponents before grouping.
    pub exponents: Vec<f64>,
    pub exponent_stderr: Vec<f64>,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub gap_threshold: f64,
}

/// Result file: `{kappa, alpha, stderr, n, trials, seed, gap_threshold}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    #[serde(with = "ext_f64_vec")]
    pub kappa: Vec<f64>,
    pub alpha: Vec<usize>,
    #[serde(with = "ext_f64_vec")]
    pub stderr: Vec<f64>,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub gap_threshold: f64,
}

impl LyapunovSpectrum {
    pub fn to_record(&self) -> SpectrumRecord {
        SpectrumRecord {
            kappa: self.entries.iter().map(|e| e.kappa).collect(),
            alpha: self.entries.iter().map(|e| e.alpha).collect(),
            stderr: self.entries.iter().map(|e| e.stderr).collect(),
            n: self.n,
            trials: self.trials,
            seed: self.seed,
            gap_threshold: self.gap_threshold,
        }
    }

    /// `sum_i alpha_i kappa_i`.
    pub fn weighted_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.alpha as f64 * e.kappa).sum()
    }
}

fn close(a: f64, b: f64, gap: f64) -> bool {
    a == b || (a - b).abs() < gap
}

/// Per-trial log singular values of `M^n / n`, averaged and grouped: adjacent
/// averaged exponents closer than `gap_threshold` form one index whose
/// multiplicity is the group size.
pub fn lyapunov_spectrum(
    spec: &CocycleSpec,
    n: usize,
    trials: usize,
    seed: u64,
    gap_threshold: f64,
) -> Result<LyapunovSpectrum, CocycleError> {
    check_positive("n", n)?;
    check_positive("trials", trials)?;
    if !(gap_threshold > 0.0) {
        return Err(CocycleError::InvalidParameter("gap_threshold must be positive".into()));
    }
    let m = spec.dim();
    let per_trial: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut tr = run_product(spec, n, stream_seed(seed, t), RENORMALIZATION_PERIOD, |_| {});
            tr.decomposition().0.into_iter().map(|s| s / n as f64).collect()
        })
        .collect();
    let mut exponents = Vec::with_capacity(m);
    let mut exponent_stderr = Vec::with_capacity(m);
    for i in 0..m {
        let col: Vec<f64> = per_trial.iter().map(|v| v[i]).collect();
        let (mean, se) = mean_stderr(&col);
        exponents.push(mean);
        exponent_stderr.push(se);
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..m {
        match groups.last_mut() {
            Some(g) if close(exponents[*g.last().unwrap()], exponents[i], gap_threshold) => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let entries = groups
        .iter()
        .map(|g| {
            let means: Vec<f64> = per_trial
                .iter()
                .map(|v| g.iter().map(|&i| v[i]).sum::<f64>() / g.len() as f64)
                .collect();
            let (kappa, stderr) = mean_stderr(&means);
            SpectrumEntry { kappa, alpha: g.len(), stderr }
        })
        .collect();
    Ok(LyapunovSpectrum { entries, exponents, exponent_stderr, n, trials, seed, gap_threshold })
}

/// `Lambda = ((M^n)^* M^n)^{1/(2n)}` for the trial-0 sequence of `seed`.
#[derive(Clone, Debug)]
pub struct OseledecEstimate {
    pub matrix: CMatrix,
    /// Logarithms of the eigenvalues of `matrix`, nonincreasing.
    pub log_eigenvalues: Vec<f64>,
    pub n: usize,
    pub seed: u64,
}

pub fn oseledec_matrix(spec: &CocycleSpec, seed: u64, n: usize) -> Result<OseledecEstimate, CocycleError> {
    check_positive("n", n)?;
    let mut tr = run_product(spec, n, stream_seed(seed, 0), RENORMALIZATION_PERIOD, |_| {});
    let (s, v) = tr.decomposition();
    let d = diag(&s.iter().map(|&x| c((x / n as f64).exp(), 0.0)).collect::<Vec<_>>());
    let matrix = hermitize(&(&v * d * v.adjoint()));
    let (values, _) = hermitian_eigen(&matrix);
    let log_eigenvalues = values
        .iter()
        .rev()
        .map(|&l| if l <= 0.0 { f64::NEG_INFINITY } else { l.ln() })
        .collect();
    Ok(OseledecEstimate { matrix, log_eigenvalues, n, seed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetIdentityReport {
    /// `|sum alpha_i kappa_i - E log|det||`; `inf` when divergent.
    #[serde(with = "ext_f64")]
    pub residual: f64,
    #[serde(with = "ext_f64")]
    pub lyapunov_sum: f64,
    #[serde(with = "ext_f64")]
    pub expected_log_det: f64,
    /// Set when `E log|det|` is `-inf` (a singular atom carries mass).
    pub divergent: bool,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
}

pub fn det_identity_residual(spec: &CocycleSpec, n: usize, trials: usize, seed: u64) -> Result<DetIdentityReport, CocycleError> {
    let spectrum = lyapunov_spectrum(spec, n, trials, seed, DEFAULT_GAP_THRESHOLD)?;
    let lyapunov_sum = spectrum.weighted_sum();
    let expected_log_det = spec.expected_log_det();
    let divergent = !expected_log_det.is_finite();
    let residual = if divergent { f64::INFINITY } else { (lyapunov_sum - expected_log_det).abs() };
    Ok(DetIdentityReport { residual, lyapunov_sum, expected_log_det, divergent, n, trials, seed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinNormReport {
    pub min_norm: f64,
    /// `(trial, n)` where the minimum was attained.
    pub argmin: (usize, usize),
    pub n_max: usize,
    pub trials: usize,
    pub seed: u64,
}

/// Minimum of `||M^n_omega||` over trials and `1 <= n <= n_max`.
pub fn min_product_norm(spec: &CocycleSpec, n_max: usize, trials: usize, seed: u64) -> Result<MinNormReport, CocycleError> {
    check_positive("n_max", n_max)?;
    check_positive("trials", trials)?;
    let per_trial: Vec<(f64, usize)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut best = (f64::INFINITY, 0);
            run_product(spec, n_max, stream_seed(seed, t), 1, |tr| {
                let l = tr.log_norm();
                if l < best.0 {
                    best = (l, tr.steps());
                }
            });
            best
        })
        .collect();
    let mut best = (f64::INFINITY, (0, 0));
    for (t, &(l, n)) in per_trial.iter().enumerate() {
        if l < best.0 {
            best = (l, (t, n));
        }
    }
    Ok(MinNormReport { min_norm: best.0.exp(), argmin: best.1, n_max, trials, seed })
}
