//! Limit maps `g = lim f^{n_k}_omega` sampled on a grid, their rank profile,
//! and level sets of `g` (stable sets).
//!
//! The grid is a real two-dimensional slice of `B_rho`: `(Re z, Im z)` in
//! dimension one and `(Re z_1, Re z_2)` otherwise, each axis
//! `linspace(-rho, rho, grid_size)`. Snapshots of `f^n` are taken every
//! `stride` steps; a pair of snapshots whose sup distance over the grid is
//! below `cauchy_tol` is accepted as evidence of a convergent subsequence.
//! Snapshots are compared with every earlier one, not only the previous, so
//! limits reached along sparse return times are found.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::jets::Jet;
use crate::linalg::{c, vector_norm, CMatrix, C_ZERO};
use crate::seed::rng_from_seed;

use super::{GermEnsemble, GermError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitMapOptions {
    pub rho: f64,
    pub grid_size: usize,
    pub stride: usize,
    pub cauchy_tol: f64,
    pub max_n: usize,
    /// Central-difference step relative to `rho`.
    pub fd_step: f64,
}

impl Default for LimitMapOptions {
    fn default() -> Self {
        LimitMapOptions { rho: 0.1, grid_size: 33, stride: 50, cauchy_tol: 1e-6, max_n: 100_000, fd_step: 1e-5 }
    }
}

/// How to evaluate the limit map away from the grid.
#[derive(Clone, Debug)]
pub enum LimitSource {
    /// `f^n` for the recorded atom sequence.
    Sequence { ensemble: GermEnsemble, choices: Vec<usize> },
    /// A closed-form map.
    Map(Jet),
}

impl LimitSource {
    pub fn evaluate_many(&self, points: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let mut pts = points.to_vec();
        match self {
            LimitSource::Map(jet) => {
                for z in pts.iter_mut() {
                    *z = jet.evaluate(z).expect("grid points match the map dimension");
                }
            }
            LimitSource::Sequence { ensemble, choices } => {
                let mut buf = vec![C_ZERO; ensemble.dim()];
                for &i in choices {
                    let atom = ensemble.atom(i);
                    for z in pts.iter_mut() {
                        atom.evaluate_into(z, &mut buf);
                        z.copy_from_slice(&buf);
                    }
                }
            }
        }
        pts
    }

    pub fn evaluate(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.evaluate_many(&[z.to_vec()]).pop().unwrap()
    }

    /// Central-difference Jacobians along the real coordinate directions,
    /// which are the complex partial derivatives of a holomorphic map.
    pub fn jacobians(&self, points: &[Vec<Complex64>], h: f64) -> Vec<CMatrix> {
        let dim = points.first().map_or(0, |z| z.len());
        let mut shifted = Vec::with_capacity(points.len() * 2 * dim);
        for z in points {
            for k in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut p = z.clone();
                    p[k] += c(sign * h, 0.0);
                    shifted.push(p);
                }
            }
        }
        let images = self.evaluate_many(&shifted);
        points
            .iter()
            .enumerate()
            .map(|(i, _)| {
                CMatrix::from_fn(dim, dim, |row, col| {
                    let base = (i * dim + col) * 2;
                    (images[base][row] - images[base + 1][row]) / (2.0 * h)
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDefect {
    pub n: usize,
    /// Sup distance over the grid to the previous snapshot.
    pub consecutive: f64,
    /// Smallest probe distance to any earlier snapshot.
    pub best: f64,
    /// Time of the earlier snapshot attaining `best`.
    pub partner: usize,
}

#[derive(Clone, Debug)]
pub struct NotConverged {
    pub max_n: usize,
    pub best_defect: f64,
    pub defects: Vec<SnapshotDefect>,
}

#[derive(Clone, Debug)]
pub struct LimitMapEstimate {
    pub dim: usize,
    pub rho: f64,
    pub grid_size: usize,
    /// Row-major: entry `i * grid_size + j` has axis coordinates
    /// `(nodes[i], nodes[j])`.
    pub grid: Vec<Vec<Complex64>>,
    pub values: Vec<Vec<Complex64>>,
    pub jacobians: Vec<CMatrix>,
    /// The Cauchy pair `[n_a, n_b]`; values are taken at `n_b`.
    pub times: Vec<usize>,
    pub cauchy_defect: f64,
    pub defects: Vec<SnapshotDefect>,
    pub fd_step: f64,
    pub source: LimitSource,
}

pub fn grid_nodes(rho: f64, grid_size: usize) -> Vec<f64> {
    if grid_size < 2 {
        return vec![0.0];
    }
    (0..grid_size)
        .map(|k| (2.0 * k as f64 - (grid_size - 1) as f64) / (grid_size - 1) as f64 * rho)
        .collect()
}

pub(crate) fn slice_grid(dim: usize, rho: f64, grid_size: usize) -> Vec<Vec<Complex64>> {
    let nodes = grid_nodes(rho, grid_size);
    let mut grid = Vec::with_capacity(nodes.len() * nodes.len());
    for &x in &nodes {
        for &y in &nodes {
            let mut z = vec![C_ZERO; dim];
            if dim == 1 {
                z[0] = c(x, y);
            } else {
                z[0] = c(x, 0.0);
                z[1] = c(y, 0.0);
            }
            grid.push(z);
        }
    }
    grid
}

fn sup_distance(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d: Vec<Complex64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
            vector_norm(&d)
        })
        .fold(0.0, f64::max)
}

fn probe_indices(g: usize) -> Vec<usize> {
    let last = g - 1;
    let mid = g / 2;
    let mut idx = vec![
        0,
        last,
        last * g,
        last * g + last,
        mid,
        last * g + mid,
        mid * g,
        mid * g + last,
        mid * g + mid,
    ];
    idx.sort_unstable();
    idx.dedup();
    idx
}

impl LimitMapEstimate {
    fn assemble(dim: usize, options: &LimitMapOptions, grid: Vec<Vec<Complex64>>, values: Vec<Vec<Complex64>>, source: LimitSource) -> Self {
        let h = options.fd_step * options.rho;
        let jacobians = source.jacobians(&grid, h);
        LimitMapEstimate {
            dim,
            rho: options.rho,
            grid_size: options.grid_size,
            grid,
            values,
            jacobians,
            times: Vec::new(),
            cauchy_defect: 0.0,
            defects: Vec::new(),
            fd_step: h,
            source,
        }
    }

    /// Sample a closed-form map on the grid, used for known limits and
    /// negative controls.
    pub fn from_jet(jet: Jet, rho: f64, grid_size: usize) -> LimitMapEstimate {
        let options = LimitMapOptions { rho, grid_size, ..LimitMapOptions::default() };
        let dim = jet.dim();
        let grid = slice_grid(dim, rho, grid_size);
        let source = LimitSource::Map(jet);
        let values = source.evaluate_many(&grid);
        LimitMapEstimate::assemble(dim, &options, grid, values, source)
    }

    pub fn evaluate(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.source.evaluate(z)
    }

    /// Index of the grid point nearest the origin.
    pub fn origin_index(&self) -> usize {
        (0..self.grid.len())
            .min_by(|&a, &b| vector_norm(&self.grid[a]).total_cmp(&vector_norm(&self.grid[b])))
            .unwrap_or(0)
    }
}

/// Estimate a limit map of `f^n_omega` on a grid over `B_rho` for the sequence
/// drawn from a stream seeded with `seed`.
pub fn limit_map_estimate(ensemble: &GermEnsemble, seed: u64, options: &LimitMapOptions) -> Result<LimitMapEstimate, GermError> {
    if !(options.rho > 0.0) || options.grid_size < 2 || options.stride == 0 || !(options.cauchy_tol > 0.0) {
        return Err(GermError::InvalidParameter("need rho > 0, grid_size >= 2, stride >= 1, cauchy_tol > 0".into()));
    }
    let dim = ensemble.dim();
    let grid = slice_grid(dim, options.rho, options.grid_size);
    let probes = probe_indices(options.grid_size);
    let mut rng = rng_from_seed(seed);
    let mut choices = Vec::new();
    let mut current = grid.clone();
    let mut previous: Option<Vec<Vec<Complex64>>> = None;
    let mut probe_history: Vec<(usize, Vec<Vec<Complex64>>)> = Vec::new();
    let mut defects = Vec::new();
    let mut best_defect = f64::INFINITY;
    let mut buf = vec![C_ZERO; dim];
    let replay = |upto: &[usize]| {
        LimitSource::Sequence { ensemble: ensemble.clone(), choices: upto.to_vec() }.evaluate_many(&grid)
    };

    for n in 1..=options.max_n {
        let i = ensemble.sample(&mut rng);
        choices.push(i);
        let atom = ensemble.atom(i);
        for z in current.iter_mut() {
            atom.evaluate_into(z, &mut buf);
            z.copy_from_slice(&buf);
            if ensemble.escaped(z) {
                return Err(GermError::InvalidParameter(format!("a grid orbit left B_R at step {n}")));
            }
        }
        if n % options.stride != 0 {
            continue;
        }
        let probe: Vec<Vec<Complex64>> = probes.iter().map(|&k| current[k].clone()).collect();
        let consecutive = previous.as_ref().map_or(f64::INFINITY, |p| sup_distance(p, &current));
        let mut record = SnapshotDefect { n, consecutive, best: consecutive, partner: n.saturating_sub(options.stride) };
        let mut pair = None;
        if consecutive < options.cauchy_tol {
            pair = Some((n - options.stride, consecutive));
        } else {
            let earlier = probe_history.len().saturating_sub(1);
            for (t, snap) in probe_history[..earlier].iter().rev() {
                let d = sup_distance(snap, &probe);
                if d < record.best {
                    record.best = d;
                    record.partner = *t;
                }
                if d < options.cauchy_tol {
                    let full = sup_distance(&replay(&choices[..*t]), &current);
                    if full < options.cauchy_tol {
                        pair = Some((*t, full));
                        break;
                    }
                }
            }
        }
        best_defect = best_defect.min(record.best);
        defects.push(record);
        if let Some((na, defect)) = pair {
            let source = LimitSource::Sequence { ensemble: ensemble.clone(), choices };
            let mut est = LimitMapEstimate::assemble(dim, options, grid, current, source);
            est.times = vec![na, n];
            est.cauchy_defect = defect;
            est.defects = defects;
            return Ok(est);
        }
        probe_history.push((n, probe));
        previous = Some(current.clone());
    }
    Err(GermError::NotConverged(Box::new(NotConverged { max_n: options.max_n, best_defect, defects })))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankProfile {
    /// Singular values of `dg` at each grid point, nonincreasing.
    pub singular_values: Vec<Vec<f64>>,
    pub origin_index: usize,
    pub sigma_origin: Vec<f64>,
    /// `max_grid sigma_m`.
    pub max_sigma_min: f64,
    /// `max_grid sigma_m < tol`.
    pub degenerate: bool,
    /// `sigma_1(origin) >= 1 - tol`.
    pub nonvanishing: bool,
    pub tol: f64,
}

pub fn rank_profile(estimate: &LimitMapEstimate, tol: f64) -> RankProfile {
    let singular_values: Vec<Vec<f64>> = estimate.jacobians.iter().map(crate::linalg::singular_values_desc).collect();
    let origin_index = estimate.origin_index();
    let sigma_origin = singular_values[origin_index].clone();
    let max_sigma_min = singular_values
        .iter()
        .map(|s| *s.last().unwrap())
        .fold(0.0, f64::max);
    RankProfile {
        degenerate: max_sigma_min < tol,
        nonvanishing: sigma_origin[0] >= 1.0 - tol,
        singular_values,
        origin_index,
        sigma_origin,
        max_sigma_min,
        tol,
    }
}

/// Best-fitting local complex line `z + C k` through a stable set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceFit {
    /// Unit kernel direction of `dg(z)`.
    pub direction: Vec<Complex64>,
    /// Largest distance of a level-set point from the line.
    pub residual: f64,
    pub singular_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableSet {
    pub z: Vec<Complex64>,
    pub gz: Vec<Complex64>,
    pub level_tol: f64,
    pub indices: Vec<usize>,
    pub points: Vec<Vec<Complex64>>,
    pub fit: Option<SliceFit>,
}

/// Grid points `w` with `||g(w) - g(z)|| < level_tol`; in dimension two the
/// set is compared with the kernel line of `dg(z)`.
pub fn stable_set(estimate: &LimitMapEstimate, z: &[Complex64], level_tol: f64) -> Result<StableSet, GermError> {
    if z.len() != estimate.dim {
        return Err(GermError::InvalidParameter(format!("point has dimension {}, map has {}", z.len(), estimate.dim)));
    }
    let gz = estimate.evaluate(z);
    let indices: Vec<usize> = estimate
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| {
            let d: Vec<Complex64> = v.iter().zip(&gz).map(|(a, b)| a - b).collect();
            vector_norm(&d) < level_tol
        })
        .map(|(i, _)| i)
        .collect();
    if indices.is_empty() {
        return Err(GermError::EmptyLevelSet);
    }
    let points: Vec<Vec<Complex64>> = indices.iter().map(|&i| estimate.grid[i].clone()).collect();
    let fit = (estimate.dim == 2).then(|| {
        let jac = estimate.source.jacobians(&[z.to_vec()], estimate.fd_step).pop().unwrap();
        let svd = jac.svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let k = (0..2)
            .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
            .unwrap();
        let direction: Vec<Complex64> = (0..2).map(|j| v_t[(k, j)].conj()).collect();
        let residual = points
            .iter()
            .map(|w| {
                let d: Vec<Complex64> = w.iter().zip(z).map(|(a, b)| a - b).collect();
                let coeff: Complex64 = direction.iter().zip(&d).map(|(u, x)| u.conj() * x).sum();
                let orth: Vec<Complex64> = d.iter().zip(&direction).map(|(x, u)| x - coeff * u).collect();
                vector_norm(&orth)
            })
            .fold(0.0, f64::max);
        let mut singular_values: Vec<f64> = svd.singular_values.iter().cloned().collect();
        singular_values.sort_by(|a, b| b.total_cmp(a));
        SliceFit { direction, residual, singular_values }
    });
    Ok(StableSet { z: z.to_vec(), gz, level_tol, indices, points, fit })
}
