//! Random orbits of germ ensembles near their common fixed point.
//!
//! Orbits are computed by evaluating the polynomial atoms pointwise, one atom
//! per step drawn from the sequence stream. A point escapes when its norm
//! exceeds the escape radius `R` or stops being finite.

mod limit;
mod trap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use num_complex::Complex64;

use crate::cocycle::{CocycleError, MatrixEnsemble};
use crate::jets::{Jet, JetError, JetRecord, DEFAULT_DEGREE};
use crate::linalg::{vector_norm, C_ZERO};
use crate::seed::{cumulative, rng_from_seed, sample_index, stream_seed, trial_rng, TrialRng, AUX_STREAM};

pub use limit::{
    grid_nodes, limit_map_estimate, rank_profile, stable_set, LimitMapEstimate, LimitMapOptions, LimitSource, NotConverged, RankProfile,
    SliceFit, SnapshotDefect, StableSet,
};
pub use trap::{
    ball_mesh, trapping_radius, uniform_trapping_check, AtomTrap, ContractionStats, TrapOptions, TrappingReport, UniformTrapReport,
};

pub const DEFAULT_ESCAPE_RADIUS: f64 = 10.0;
pub const DEFAULT_STEPS: usize = 10_000;

#[derive(Debug, Error)]
pub enum GermError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
    #[error("atom {0} does not fix the origin")]
    NotOriginFixing(usize),
    #[error("an ensemble needs at least one atom")]
    EmptyEnsemble,
    #[error("atom {index} has invalid probability {prob}")]
    BadProbability { index: usize, prob: f64 },
    #[error("probabilities sum to {0}, not 1")]
    ProbabilitySum(f64),
    #[error("atoms mix dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("ensemble is not attracting: E log(||df(0)|| + eps) = {elog}")]
    NotAttracting { elog: f64 },
    #[error("no trapping radius above {floor}: best certified radius {best}")]
    NoTrappingRadius { floor: f64, best: f64 },
    #[error("limit map did not converge by n = {}: best defect {}", .0.max_n, .0.best_defect)]
    NotConverged(Box<NotConverged>),
    #[error("no grid point lies on the level set through the given point")]
    EmptyLevelSet,
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("invalid ensemble text: {0}")]
    Syntax(#[from] serde_json::Error),
}

/// Description of a countably supported family truncated to finitely many
/// atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexedFamily {
    pub family: String,
    pub params: Value,
    pub first_index: u32,
    pub cap: u32,
    /// Total variation distance between the truncated and the full index law.
    pub tv_distance: f64,
}

/// Probability measure on polynomial germs fixing the origin, together with
/// the escape radius `R`.
#[derive(Clone, Debug)]
pub struct GermEnsemble {
    dim: usize,
    atoms: Vec<Jet>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    pub escape_radius: f64,
    pub compact_support: bool,
    pub family: Option<IndexedFamily>,
}

impl GermEnsemble {
    pub fn new(atoms: Vec<(Jet, f64)>, escape_radius: f64) -> Result<GermEnsemble, GermError> {
        let Some(first) = atoms.first() else {
            return Err(GermError::EmptyEnsemble);
        };
        let dim = first.0.dim();
        let mut total = 0.0;
        for (index, (jet, p)) in atoms.iter().enumerate() {
            if jet.dim() != dim {
                return Err(GermError::DimensionMismatch(dim, jet.dim()));
            }
            if !jet.fixes_origin() {
                return Err(GermError::NotOriginFixing(index));
            }
            if !(p.is_finite() && *p >= 0.0) {
                return Err(GermError::BadProbability { index, prob: *p });
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(GermError::ProbabilitySum(total));
        }
        if !(escape_radius > 0.0) {
            return Err(GermError::InvalidParameter("escape radius must be positive".into()));
        }
        let probs: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        Ok(GermEnsemble {
            dim,
            cumulative: cumulative(&probs),
            probs,
            atoms: atoms.into_iter().map(|a| a.0).collect(),
            escape_radius,
            compact_support: true,
            family: None,
        })
    }

    /// Truncated countable family; `weights` need not be normalized.
    pub fn indexed(atoms: Vec<(Jet, f64)>, escape_radius: f64, family: IndexedFamily) -> Result<GermEnsemble, GermError> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let normalized = atoms.into_iter().map(|(j, w)| (j, w / total)).collect();
        let mut e = GermEnsemble::new(normalized, escape_radius)?;
        e.compact_support = false;
        e.family = Some(family);
        Ok(e)
    }

    pub fn with_escape_radius(mut self, r: f64) -> GermEnsemble {
        self.escape_radius = r;
        self
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

    pub fn atom(&self, i: usize) -> &Jet {
        &self.atoms[i]
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&Jet, f64)> {
        self.atoms.iter().zip(self.probs.iter().copied())
    }

    pub(crate) fn sample(&self, rng: &mut TrialRng) -> usize {
        sample_index(rng, &self.cumulative)
    }

    /// Push-forward under `f -> df(0)`.
    pub fn linear_parts(&self) -> Result<MatrixEnsemble, GermError> {
        Ok(MatrixEnsemble::new(self.atoms().map(|(j, p)| (j.linear_part(), p)).collect())?)
    }

    pub(crate) fn escaped(&self, z: &[Complex64]) -> bool {
        let n = vector_norm(z);
        !(n <= self.escape_radius)
    }

    /// File form; generator-backed families serialize their parameters only.
    pub fn to_json(&self) -> Value {
        if let Some(f) = &self.family {
            let mut generator = serde_json::Map::new();
            generator.insert("family".into(), Value::String(f.family.clone()));
            if let Value::Object(params) = &f.params {
                generator.extend(params.clone());
            }
            return serde_json::json!({ "generator": generator, "R": self.escape_radius });
        }
        let atoms: Vec<Value> = self
            .atoms()
            .map(|(j, p)| serde_json::json!({ "map": j.to_record(), "prob": p }))
            .collect();
        serde_json::json!({
            "dimension": self.dim,
            "R": self.escape_radius,
            "degree": self.atoms[0].degree(),
            "atoms": atoms,
        })
    }

    /// Parse `{dimension, R, atoms: [{map, prob}]}`; generator forms are
    /// resolved by [`crate::gallery::germ_ensemble_from_json`].
    pub fn from_atoms_json(value: &Value) -> Result<GermEnsemble, GermError> {
        let record: GermEnsembleRecord = serde_json::from_value(value.clone())?;
        let degree = record.degree.unwrap_or(DEFAULT_DEGREE);
        let mut atoms = Vec::with_capacity(record.atoms.len());
        for a in &record.atoms {
            let jet = Jet::from_record(&a.map, degree)?;
            if jet.dim() != record.dimension {
                return Err(GermError::Schema(format!(
                    "map of dimension {} in a dimension-{} ensemble",
                    jet.dim(),
                    record.dimension
                )));
            }
            atoms.push((jet, a.prob));
        }
        GermEnsemble::new(atoms, record.escape_radius.unwrap_or(DEFAULT_ESCAPE_RADIUS))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GermEnsembleRecord {
    dimension: usize,
    #[serde(rename = "R", default)]
    escape_radius: Option<f64>,
    #[serde(default)]
    degree: Option<usize>,
    atoms: Vec<GermAtomRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GermAtomRecord {
    map: JetRecord,
    prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitPoint {
    pub step: usize,
    pub z: Vec<Complex64>,
}

/// A sampled random orbit. If `escape_step = Some(k)` the point at step `k`
/// has norm above `R` and all earlier points do not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub initial: Vec<Complex64>,
    pub points: Vec<OrbitPoint>,
    pub escape_step: Option<usize>,
    pub max_norm: f64,
    pub seed: u64,
    /// Steps actually taken.
    pub steps: usize,
    /// Atom index used at each step.
    pub choices: Vec<usize>,
}

impl OrbitRecord {
    pub fn bounded(&self) -> bool {
        self.escape_step.is_none()
    }

    pub fn last(&self) -> &[Complex64] {
        &self.points.last().expect("orbit has its initial point").z
    }
}

fn check_start(ensemble: &GermEnsemble, z0: &[Complex64]) -> Result<(), GermError> {
    if z0.len() != ensemble.dim() {
        return Err(GermError::Jet(JetError::DimensionMismatch { expected: ensemble.dim(), got: z0.len() }));
    }
    if !(vector_norm(z0) <= ensemble.escape_radius) {
        return Err(GermError::InvalidParameter(format!("start point lies outside the ball of radius {}", ensemble.escape_radius)));
    }
    Ok(())
}

fn run_orbit(
    ensemble: &GermEnsemble,
    z0: &[Complex64],
    steps: usize,
    seed: u64,
    thin: usize,
    mut next: impl FnMut(usize) -> Option<usize>,
) -> OrbitRecord {
    let thin = thin.max(1);
    let mut z = z0.to_vec();
    let mut buf = vec![C_ZERO; z.len()];
    let mut points = vec![OrbitPoint { step: 0, z: z.clone() }];
    let mut max_norm = vector_norm(&z);
    let mut escape_step = None;
    let mut choices = Vec::with_capacity(steps);
    let mut taken = 0;
    for step in 1..=steps {
        let Some(i) = next(step) else { break };
        choices.push(i);
        ensemble.atoms[i].evaluate_into(&z, &mut buf);
        std::mem::swap(&mut z, &mut buf);
        taken = step;
        let norm = vector_norm(&z);
        if norm > max_norm || norm.is_nan() {
            max_norm = if norm.is_nan() { f64::INFINITY } else { norm };
        }
        let done = ensemble.escaped(&z);
        if done || step % thin == 0 || step == steps {
            points.push(OrbitPoint { step, z: z.clone() });
        }
        if done {
            escape_step = Some(step);
            break;
        }
    }
    OrbitRecord { initial: z0.to_vec(), points, escape_step, max_norm, seed, steps: taken, choices }
}

/// Orbit of `z0` for the sequence drawn from a stream seeded with `seed`.
pub fn simulate_orbit(ensemble: &GermEnsemble, z0: &[Complex64], steps: usize, seed: u64) -> Result<OrbitRecord, GermError> {
    simulate_orbit_thinned(ensemble, z0, steps, seed, 1)
}

/// As [`simulate_orbit`], keeping only every `thin`-th point plus the last.
pub fn simulate_orbit_thinned(
    ensemble: &GermEnsemble,
    z0: &[Complex64],
    steps: usize,
    seed: u64,
    thin: usize,
) -> Result<OrbitRecord, GermError> {
    check_start(ensemble, z0)?;
    let mut rng = rng_from_seed(seed);
    Ok(run_orbit(ensemble, z0, steps, seed, thin, |_| Some(ensemble.sample(&mut rng))))
}

/// Orbit of `z0` under an explicit atom sequence.
pub fn replay_orbit(ensemble: &GermEnsemble, z0: &[Complex64], choices: &[usize]) -> Result<OrbitRecord, GermError> {
    check_start(ensemble, z0)?;
    if let Some(&bad) = choices.iter().find(|&&i| i >= ensemble.len()) {
        return Err(GermError::InvalidParameter(format!("atom index {bad} out of range")));
    }
    Ok(run_orbit(ensemble, z0, choices.len(), 0, 1, |step| Some(choices[step - 1])))
}

/// Uniform point of the unit ball of `C^m`.
pub(crate) fn unit_ball_point<R: Rng>(rng: &mut R, dim: usize) -> Vec<Complex64> {
    let g: Vec<f64> = (0..2 * dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u: f64 = rng.gen();
    let radius = u.powf(1.0 / (2 * dim) as f64);
    (0..dim).map(|k| Complex64::new(g[2 * k], g[2 * k + 1]) * (radius / norm)).collect()
}

/// Uniform point of the unit sphere of `C^m`.
pub(crate) fn unit_sphere_point<R: Rng>(rng: &mut R, dim: usize) -> Vec<Complex64> {
    let g: Vec<f64> = (0..2 * dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    (0..dim).map(|k| Complex64::new(g[2 * k], g[2 * k + 1]) / norm).collect()
}

/// Apply one sequence to many points; returns for each point whether it
/// stayed in the ball for all `steps`.
pub(crate) fn bounded_under_sequence(ensemble: &GermEnsemble, starts: &[Vec<Complex64>], steps: usize, rng: &mut TrialRng) -> Vec<bool> {
    let mut pts: Vec<Vec<Complex64>> = starts.to_vec();
    let mut alive: Vec<bool> = pts.iter().map(|z| !ensemble.escaped(z)).collect();
    let mut live = alive.iter().filter(|&&a| a).count();
    let mut buf = vec![C_ZERO; ensemble.dim()];
    for _ in 0..steps {
        if live == 0 {
            break;
        }
        let atom = &ensemble.atoms[ensemble.sample(rng)];
        for (z, a) in pts.iter_mut().zip(alive.iter_mut()) {
            if !*a {
                continue;
            }
            atom.evaluate_into(z, &mut buf);
            z.copy_from_slice(&buf);
            if ensemble.escaped(z) {
                *a = false;
                live -= 1;
            }
        }
    }
    alive
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FatouReport {
    pub delta: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    pub trials: usize,
    pub test_points: usize,
    pub seed: u64,
    /// Fraction of (sequence, start point) pairs that stayed bounded.
    pub fraction: f64,
    /// Bounded trials for each start point.
    pub per_point: Vec<usize>,
    /// Bounded start points for each trial.
    pub per_trial: Vec<usize>,
}

/// Start points shared by all trials of a membership run: `delta * u_k` with
/// `u_k` uniform in the unit ball, drawn from the auxiliary stream.
pub fn fatou_test_points(dim: usize, delta: f64, count: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = trial_rng(seed, AUX_STREAM);
    (0..count)
        .map(|_| unit_ball_point(&mut rng, dim).into_iter().map(|x| x * delta).collect())
        .collect()
}

/// Monte Carlo surrogate for membership of the origin in the random Fatou
/// set: trial `t` draws one sequence and applies it to every start point.
pub fn fatou_membership(
    ensemble: &GermEnsemble,
    delta: f64,
    test_points: usize,
    steps: usize,
    trials: usize,
    seed: u64,
) -> Result<FatouReport, GermError> {
    if !(delta > 0.0 && delta < ensemble.escape_radius) {
        return Err(GermError::InvalidParameter(format!("delta must lie in (0, R = {})", ensemble.escape_radius)));
    }
    if test_points == 0 || trials == 0 {
        return Err(GermError::InvalidParameter("test_points and trials must be at least 1".into()));
    }
    let starts = fatou_test_points(ensemble.dim(), delta, test_points, seed);
    let outcomes: Vec<Vec<bool>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| bounded_under_sequence(ensemble, &starts, steps, &mut rng_from_seed(stream_seed(seed, t))))
        .collect();
    let mut per_point = vec![0; test_points];
    let mut per_trial = Vec::with_capacity(trials);
    for o in &outcomes {
        per_trial.push(o.iter().filter(|&&b| b).count());
        for (k, &b) in o.iter().enumerate() {
            per_point[k] += b as usize;
        }
    }
    let fraction = per_trial.iter().sum::<usize>() as f64 / (trials * test_points) as f64;
    Ok(FatouReport { delta, steps, trials, test_points, seed, fraction, per_point, per_trial })
}
