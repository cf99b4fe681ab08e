use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{op_norm, vector_norm, C_ZERO};
use crate::seed::{rng_from_seed, stream_seed, trial_rng, AUX_STREAM};

use super::{unit_ball_point, unit_sphere_point, GermEnsemble, GermError};

/// Shell radii, as fractions of `r`, probed when verifying a trapping radius.
const SHELLS: [f64; 4] = [1.0, 0.75, 0.5, 0.25];
const SHELL_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapOptions {
    /// Boundary samples per shell and atom.
    pub shell_samples: usize,
    pub contraction_orbits: usize,
    pub contraction_steps: usize,
    /// Orbits whose norm drops below this count as converged.
    pub convergence_floor: f64,
    /// Smallest acceptable radius.
    pub radius_floor: f64,
    pub seed: u64,
}

impl Default for TrapOptions {
    fn default() -> Self {
        TrapOptions {
            shell_samples: 4096,
            contraction_orbits: 1000,
            contraction_steps: 100,
            convergence_floor: 1e-8,
            radius_floor: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomTrap {
    /// `||df(0)||`.
    pub linear_norm: f64,
    /// `||df(0)|| + eps`.
    pub alpha: f64,
    /// Largest radius on which the coefficient bound certifies the
    /// contraction, capped at `R`.
    pub certified_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionStats {
    pub orbits: usize,
    pub converged: usize,
    pub steps: usize,
    pub floor: f64,
    /// Largest norm at the end of the run over all orbits.
    pub max_final_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrappingReport {
    pub eps: f64,
    pub r: f64,
    pub atoms: Vec<AtomTrap>,
    /// `E log ||df(0)||`.
    pub elog_linear: f64,
    /// `E log(||df(0)|| + eps)`.
    pub elog_alpha: f64,
    /// Every shell sample satisfied `||f(z)|| <= alpha_f ||z||`.
    pub verified: bool,
    /// Largest observed `||f(z)|| / (alpha_f ||z||)`.
    pub max_ratio: f64,
    pub contraction: ContractionStats,
}

fn expected_log(ensemble: &GermEnsemble, norms: &[f64], eps: f64) -> f64 {
    norms.iter().enumerate().map(|(i, n)| ensemble.prob(i) * (n + eps).ln()).sum()
}

/// `B_k = ||(sum_{|b| = k} |c_{i,b}|)_i||_2` for `k >= 2`; indexed by `k`.
fn remainder_bounds(jet: &crate::jets::Jet) -> Vec<f64> {
    let per = jet.degree_moduli();
    (0..=jet.degree())
        .map(|k| if k < 2 { 0.0 } else { per.iter().map(|c| c[k] * c[k]).sum::<f64>().sqrt() })
        .collect()
}

/// Largest `r <= cap` with `sum_k B_k r^{k-1} <= eps`.
fn certified_radius(bounds: &[f64], eps: f64, cap: f64) -> f64 {
    let active: Vec<usize> = (2..bounds.len()).filter(|&k| bounds[k] != 0.0).collect();
    match active.as_slice() {
        [] => cap,
        [k] => {
            let b = bounds[*k];
            if !b.is_finite() {
                return 0.0;
            }
            (eps / b).powf(1.0 / (*k as f64 - 1.0)).min(cap)
        }
        _ => {
            let excess = |r: f64| active.iter().map(|&k| bounds[k] * r.powi(k as i32 - 1)).sum::<f64>();
            if excess(cap) <= eps {
                return cap;
            }
            let (mut lo, mut hi) = (0.0, cap);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if excess(mid) <= eps {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    }
}

fn shell_points(dim: usize, radius: f64, count: usize, rng: &mut crate::seed::TrialRng) -> Vec<Vec<Complex64>> {
    if dim == 1 {
        return (0..count)
            .map(|k| vec![Complex64::from_polar(radius, std::f64::consts::TAU * k as f64 / count as f64)])
            .collect();
    }
    (0..count)
        .map(|_| unit_sphere_point(rng, dim).into_iter().map(|x| x * radius).collect())
        .collect()
}

/// Trapping neighborhood for an attracting ensemble: `eps` with
/// `E log(||df(0)|| + eps) < 0` and a radius `r` on which every atom obeys
/// `||f(z)|| <= (||df(0)|| + eps) ||z||`. Without `eps`, half of the root of
/// `E log(||df(0)|| + eps) = 0` is used.
pub fn trapping_radius(ensemble: &GermEnsemble, eps: Option<f64>, options: &TrapOptions) -> Result<TrappingReport, GermError> {
    let norms: Vec<f64> = ensemble.atoms().map(|(j, _)| op_norm(&j.linear_part())).collect();
    let elog_linear = expected_log(ensemble, &norms, 0.0);
    if !(elog_linear < 0.0) {
        return Err(GermError::NotAttracting { elog: elog_linear });
    }
    let eps = match eps {
        Some(e) => {
            if !(e > 0.0) {
                return Err(GermError::InvalidParameter("eps must be positive".into()));
            }
            e
        }
        None => {
            let mut hi = 1.0;
            while expected_log(ensemble, &norms, hi) < 0.0 {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if expected_log(ensemble, &norms, mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * lo
        }
    };
    let elog_alpha = expected_log(ensemble, &norms, eps);
    if !(elog_alpha < 0.0) {
        return Err(GermError::NotAttracting { elog: elog_alpha });
    }
    let atoms: Vec<AtomTrap> = ensemble
        .atoms()
        .zip(&norms)
        .map(|((jet, _), &n)| AtomTrap {
            linear_norm: n,
            alpha: n + eps,
            certified_radius: certified_radius(&remainder_bounds(jet), eps, ensemble.escape_radius),
        })
        .collect();
    let r = atoms.iter().map(|a| a.certified_radius).fold(f64::INFINITY, f64::min);
    if !(r >= options.radius_floor) {
        return Err(GermError::NoTrappingRadius { floor: options.radius_floor, best: r });
    }

    let mut rng = trial_rng(options.seed, AUX_STREAM);
    let mut max_ratio = 0.0f64;
    let mut buf = vec![C_ZERO; ensemble.dim()];
    for &frac in &SHELLS {
        for z in shell_points(ensemble.dim(), r * frac, options.shell_samples, &mut rng) {
            let nz = vector_norm(&z);
            for ((jet, _), a) in ensemble.atoms().zip(&atoms) {
                jet.evaluate_into(&z, &mut buf);
                let ratio = vector_norm(&buf) / (a.alpha * nz);
                max_ratio = max_ratio.max(if ratio.is_nan() { f64::INFINITY } else { ratio });
            }
        }
    }
    let verified = max_ratio <= 1.0 + SHELL_SLACK;

    let finals: Vec<f64> = (0..options.contraction_orbits as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(stream_seed(options.seed, t));
            let mut z: Vec<Complex64> = unit_ball_point(&mut rng, ensemble.dim()).into_iter().map(|x| x * (0.5 * r)).collect();
            let mut buf = vec![C_ZERO; z.len()];
            for _ in 0..options.contraction_steps {
                if vector_norm(&z) < options.convergence_floor {
                    break;
                }
                ensemble.atom(ensemble.sample(&mut rng)).evaluate_into(&z, &mut buf);
                z.copy_from_slice(&buf);
            }
            let n = vector_norm(&z);
            if n.is_nan() {
                f64::INFINITY
            } else {
                n
            }
        })
        .collect();
    let contraction = ContractionStats {
        orbits: options.contraction_orbits,
        converged: finals.iter().filter(|&&n| n < options.convergence_floor).count(),
        steps: options.contraction_steps,
        floor: options.convergence_floor,
        max_final_norm: finals.iter().cloned().fold(0.0, f64::max),
    };
    Ok(TrappingReport { eps, r, atoms, elog_linear, elog_alpha, verified, max_ratio, contraction })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformTrapReport {
    pub rho: f64,
    pub eps: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub mesh_points: usize,
    /// (trial, mesh point) pairs whose orbit left `B_eps`.
    pub violating_orbits: usize,
    /// Trials with at least one violating orbit.
    pub violating_trials: usize,
    pub max_norm: f64,
}

/// Cartesian mesh with `per_axis` nodes on each of the `2m` real
/// coordinates of `[-rho, rho]^{2m}`, restricted to the closed ball.
pub fn ball_mesh(dim: usize, rho: f64, per_axis: usize) -> Vec<Vec<Complex64>> {
    let nodes: Vec<f64> = if per_axis < 2 {
        vec![0.0]
    } else {
        super::limit::grid_nodes(rho, per_axis)
    };
    let total = nodes.len().pow(2 * dim as u32);
    let mut out = Vec::new();
    for mut code in 0..total {
        let mut coords = Vec::with_capacity(2 * dim);
        for _ in 0..2 * dim {
            coords.push(nodes[code % nodes.len()]);
            code /= nodes.len();
        }
        let z: Vec<Complex64> = (0..dim).map(|k| Complex64::new(coords[2 * k], coords[2 * k + 1])).collect();
        if vector_norm(&z) <= rho * (1.0 + 1e-12) {
            out.push(z);
        }
    }
    out
}

/// Counts orbits from a mesh of `B_rho` that leave `B_eps` within `steps`.
pub fn uniform_trapping_check(
    ensemble: &GermEnsemble,
    rho: f64,
    eps: f64,
    steps: usize,
    trials: usize,
    seed: u64,
    per_axis: usize,
) -> Result<UniformTrapReport, GermError> {
    if !(rho > 0.0 && rho < eps && eps <= ensemble.escape_radius) {
        return Err(GermError::InvalidParameter("need 0 < rho < eps <= R".into()));
    }
    let mesh = ball_mesh(ensemble.dim(), rho, per_axis);
    let per_trial: Vec<(usize, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(stream_seed(seed, t));
            let mut pts = mesh.clone();
            let mut alive = vec![true; pts.len()];
            let mut live = pts.len();
            let mut max_norm = pts.iter().map(|z| vector_norm(z)).fold(0.0, f64::max);
            let mut buf = vec![C_ZERO; ensemble.dim()];
            for _ in 0..steps {
                if live == 0 {
                    break;
                }
                let atom = ensemble.atom(ensemble.sample(&mut rng));
                for (z, a) in pts.iter_mut().zip(alive.iter_mut()) {
                    if !*a {
                        continue;
                    }
                    atom.evaluate_into(z, &mut buf);
                    z.copy_from_slice(&buf);
                    let n = vector_norm(z);
                    max_norm = max_norm.max(if n.is_nan() { f64::INFINITY } else { n });
                    if !(n <= eps) {
                        *a = false;
                        live -= 1;
                    }
                }
            }
            (pts.len() - live, max_norm)
        })
        .collect();
    Ok(UniformTrapReport {
        rho,
        eps,
        steps,
        trials,
        seed,
        mesh_points: mesh.len(),
        violating_orbits: per_trial.iter().map(|p| p.0).sum(),
        violating_trials: per_trial.iter().filter(|p| p.0 > 0).count(),
        max_norm: per_trial.iter().map(|p| p.1).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certified_radius_cases() {
        assert_eq!(certified_radius(&[0.0, 0.0, 1.0], 0.1, 10.0), 0.1);
        assert_eq!(certified_radius(&[0.0, 0.0, 0.0], 0.1, 10.0), 10.0);
        assert_eq!(certified_radius(&[0.0, 0.0, f64::INFINITY], 0.1, 10.0), 0.0);
        // r + r^2 = 0.1
        let r = certified_radius(&[0.0, 0.0, 1.0, 1.0], 0.1, 10.0);
        assert!((r + r * r - 0.1).abs() < 1e-15);
    }

    #[test]
    fn mesh_is_inside_ball() {
        let mesh = ball_mesh(2, 0.1, 5);
        assert!(mesh.iter().all(|z| vector_norm(z) <= 0.1 * (1.0 + 1e-12)));
        assert!(mesh.iter().any(|z| vector_norm(z) == 0.0));
        assert_eq!(ball_mesh(1, 1.0, 3).len(), 5);
    }
}
