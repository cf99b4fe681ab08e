//! Search for a Hermitian form preserved by a family of matrices.
//!
//! If `M_i^* P M_i = P` for all generators with `P > 0`, then `H = P^{1/2}`
//! conjugates every generator into the unitary group. The search iterates
//! the averaging map `P -> (P + sum_i p_i M_i^* P M_i) / 2` from the identity,
//! renormalized to trace `m`, and also watches the Cesaro mean of the
//! iterates as a second candidate.

use serde::{Deserialize, Serialize};

use crate::linalg::{frobenius, hermitian_eigen, hermitian_fn, hermitize, log_abs_det, trace_re, unitarity_defect, CMatrix};

use super::CocycleError;

pub const FORM_MAX_ITERS: usize = 10_000;
pub const FORM_MAX_CONDITION: f64 = 1e12;
/// Iteration continues past `tol` until this fraction of it is reached.
const POLISH_FACTOR: f64 = 1e-3;
const STAGNATION_WINDOW: usize = 500;
const HISTORY_STRIDE: usize = 100;

#[derive(Clone, Debug)]
pub struct InvariantForm {
    /// Positive definite, trace `m`.
    pub p: CMatrix,
    /// `P^{1/2}`.
    pub conjugator: CMatrix,
    /// `H M_i H^{-1}` for every generator.
    pub conjugated: Vec<CMatrix>,
    /// `max_i ||M_i^* P M_i - P||_F / ||P||_F`.
    pub residual: f64,
    /// `max_i max_{jk} |(U_i^* U_i - I)_{jk}|` over the conjugated generators.
    pub unitarity_defect: f64,
    pub condition: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureReason {
    MaxIterations,
    Stagnated,
    IllConditioned,
    NotPositive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvariantFormFailure {
    pub best_residual: f64,
    pub iterations: usize,
    pub condition: f64,
    pub reason: FailureReason,
    /// `(iteration, residual)` sampled along the run.
    pub residual_history: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub enum InvariantFormOutcome {
    Found(InvariantForm),
    Failure(InvariantFormFailure),
}

impl InvariantFormOutcome {
    pub fn found(&self) -> Option<&InvariantForm> {
        match self {
            InvariantFormOutcome::Found(f) => Some(f),
            InvariantFormOutcome::Failure(_) => None,
        }
    }
}

struct Step {
    residual: f64,
    average: CMatrix,
}

fn evaluate(generators: &[CMatrix], p: &CMatrix) -> Step {
    let scale = frobenius(p);
    let weight = 1.0 / generators.len() as f64;
    let mut residual = 0.0f64;
    let mut average = CMatrix::zeros(p.nrows(), p.ncols());
    for m in generators {
        let image = m.adjoint() * p * m;
        residual = residual.max(frobenius(&(&image - p)) / scale);
        average += image.map(|z| z * weight);
    }
    Step { residual, average }
}

fn normalized(p: CMatrix) -> CMatrix {
    let m = p.nrows() as f64;
    let t = trace_re(&p);
    hermitize(&p).map(|z| z * (m / t))
}

fn condition(p: &CMatrix) -> f64 {
    let (values, _) = hermitian_eigen(p);
    let lo = values[0];
    let hi = values[values.len() - 1];
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Find `P > 0` with `max_i ||M_i^* P M_i - P|| <= tol ||P||`, equal weights
/// on the generators.
pub fn find_invariant_form(generators: &[CMatrix], max_iters: usize, tol: f64) -> Result<InvariantFormOutcome, CocycleError> {
    let Some(first) = generators.first() else {
        return Err(CocycleError::EmptyEnsemble);
    };
    let dim = first.nrows();
    for (index, g) in generators.iter().enumerate() {
        if g.nrows() != dim || g.ncols() != dim {
            return Err(CocycleError::BadShape { index, rows: g.nrows(), cols: g.ncols(), dim });
        }
        if !log_abs_det(g).is_finite() {
            return Err(CocycleError::SingularGenerator(index));
        }
    }
    if !(tol > 0.0) {
        return Err(CocycleError::InvalidParameter("tol must be positive".into()));
    }

    let mut p = CMatrix::identity(dim, dim);
    let mut cesaro = p.clone();
    let mut best = (f64::INFINITY, p.clone());
    let mut best_at = 0;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut reason = FailureReason::MaxIterations;
    for k in 0..=max_iters {
        let step = evaluate(generators, &p);
        if step.residual < best.0 {
            if step.residual < 0.99 * best.0 {
                best_at = k;
            }
            best = (step.residual, p.clone());
        }
        if k % HISTORY_STRIDE == 0 {
            history.push((k, step.residual));
            let c = evaluate(generators, &cesaro);
            if c.residual < best.0 {
                best = (c.residual, cesaro.clone());
                best_at = k;
            }
            if condition(&p) > FORM_MAX_CONDITION {
                reason = FailureReason::IllConditioned;
                break;
            }
        }
        iterations = k;
        if best.0 <= POLISH_FACTOR * tol {
            break;
        }
        if k - best_at > STAGNATION_WINDOW {
            reason = FailureReason::Stagnated;
            break;
        }
        if k == max_iters {
            break;
        }
        p = normalized((&p + step.average).map(|z| z * 0.5));
        cesaro += (&p - &cesaro).map(|z| z / (k as f64 + 2.0));
    }

    let (residual, p) = best;
    let cond = condition(&p);
    if residual.is_finite() && residual <= tol && cond <= FORM_MAX_CONDITION {
        let conjugator = hermitian_fn(&p, f64::sqrt);
        let inverse = hermitian_fn(&p, |v| 1.0 / v.sqrt());
        let conjugated: Vec<CMatrix> = generators.iter().map(|m| &conjugator * m * &inverse).collect();
        let defect = conjugated.iter().map(unitarity_defect).fold(0.0, f64::max);
        return Ok(InvariantFormOutcome::Found(InvariantForm {
            p,
            conjugator,
            conjugated,
            residual,
            unitarity_defect: defect,
            condition: cond,
            iterations,
        }));
    }
    if !cond.is_finite() {
        reason = FailureReason::NotPositive;
    } else if cond > FORM_MAX_CONDITION {
        reason = FailureReason::IllConditioned;
    }
    Ok(InvariantFormOutcome::Failure(InvariantFormFailure {
        best_residual: residual,
        iterations,
        condition: cond,
        reason,
        residual_history: history,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, real_matrix};

    #[test]
    fn unitary_generators_keep_identity() {
        let r = real_matrix(&[&[0.6, -0.8], &[0.8, 0.6]]);
        let u = CMatrix::from_fn(2, 2, |i, j| if i == j { c(0.0, if i == 0 { 1.0 } else { -1.0 }) } else { c(0.0, 0.0) });
        let out = find_invariant_form(&[r, u], FORM_MAX_ITERS, 1e-10).unwrap();
        let f = out.found().expect("unitary family");
        assert!(frobenius(&(&f.p - CMatrix::identity(2, 2))) < 1e-12);
        assert_eq!(f.iterations, 0);
    }

    #[test]
    fn jordan_block_has_no_form() {
        let shear = real_matrix(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let out = find_invariant_form(&[shear], FORM_MAX_ITERS, 1e-8).unwrap();
        assert!(matches!(out, InvariantFormOutcome::Failure(_)));
    }

    #[test]
    fn singular_generator_is_an_error() {
        let n = real_matrix(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(find_invariant_form(&[n], 10, 1e-8), Err(CocycleError::SingularGenerator(0))));
    }
}
