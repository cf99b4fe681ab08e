//! Attracting / repelling / neutral / semi-neutral verdicts from the top
//! exponent and the exact mean log-determinant.
//!
//! With `I = [kappa - 3 se, kappa + 3 se]` and threshold `eps`:
//! `I` below `-eps` is attracting, above `eps` repelling; `I` inside
//! `[-eps, eps]` is neutral when `|E log|det|| <= eps` and semi-neutral when
//! `E log|det| < -eps`. Everything else is undetermined.

use serde::{Deserialize, Serialize};

use crate::cocycle::{lyapunov_exponent, CocycleError, CocycleSpec};
use crate::germ_dynamics::{GermEnsemble, GermError};
use crate::record::ext_f64;

pub const DEFAULT_EPS_ABS: f64 = 1e-3;
pub const CONFIDENCE_SIGMAS: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Attracting,
    Repelling,
    Neutral,
    SemiNeutral,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    #[serde(with = "ext_f64")]
    pub kappa_hat: f64,
    #[serde(with = "ext_f64")]
    pub stderr: f64,
    #[serde(with = "ext_f64")]
    pub elogdet: f64,
    pub eps_abs: f64,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyParams {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub eps_abs: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams { n: 10_000, trials: 200, seed: 0, eps_abs: DEFAULT_EPS_ABS }
    }
}

/// The decision rule on its own.
pub fn decide(kappa_hat: f64, stderr: f64, elogdet: f64, eps_abs: f64) -> Verdict {
    if kappa_hat == f64::NEG_INFINITY {
        return Verdict::Attracting;
    }
    let lo = kappa_hat - CONFIDENCE_SIGMAS * stderr;
    let hi = kappa_hat + CONFIDENCE_SIGMAS * stderr;
    if hi < -eps_abs {
        Verdict::Attracting
    } else if lo > eps_abs {
        Verdict::Repelling
    } else if lo >= -eps_abs && hi <= eps_abs {
        if elogdet.abs() <= eps_abs {
            Verdict::Neutral
        } else if elogdet < -eps_abs {
            Verdict::SemiNeutral
        } else {
            Verdict::Undetermined
        }
    } else {
        Verdict::Undetermined
    }
}

pub fn classify_ensemble(spec: &CocycleSpec, params: &ClassifyParams) -> Result<Classification, CocycleError> {
    let ensemble = spec.ensemble().ok_or(CocycleError::NotIid)?;
    let est = lyapunov_exponent(spec, params.n, params.trials, params.seed)?;
    let elogdet = ensemble.expected_log_det();
    Ok(Classification {
        verdict: decide(est.kappa, est.stderr, elogdet, params.eps_abs),
        kappa_hat: est.kappa,
        stderr: est.stderr,
        elogdet,
        eps_abs: params.eps_abs,
        n: params.n,
        trials: params.trials,
        seed: params.seed,
    })
}

/// Classify through the linear parts `df(0)` of the atoms.
pub fn classify_germ_measure(ensemble: &GermEnsemble, params: &ClassifyParams) -> Result<Classification, GermError> {
    Ok(classify_ensemble(&CocycleSpec::Iid(ensemble.linear_parts()?), params)?)
}
