//! The attracting family `f_i(z) = lambda z + a_i z^2` with
//! `a_i = lambda^{-3 * 2^i}` and `P(i) = 2^{-i}`, `i >= 1`.
//!
//! The quadratic coefficient of `f^n_omega` satisfies
//! `c_n = lambda c_{n-1} + a_{i_n} lambda^{2(n-1)}`, that is
//! `c_n = lambda^{n-1} sum_k lambda^{k-1} a_{i_k}`. Coefficients overflow for
//! moderate `i`, so everything here runs on logarithms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::{cumulative, rng_from_seed, sample_index, stream_seed, TrialRng};

use super::GalleryError;

pub const DEFAULT_CAP: u32 = 60;

/// `ln a_i = -3 * 2^i * ln lambda`.
pub fn e1_log_coefficient(i: u32, lambda1: f64) -> f64 {
    -3.0 * (i as f64).exp2() * lambda1.ln()
}

/// `a_i = lambda^{-3 * 2^i}`; `+inf` once it leaves the double range.
pub fn e1_coefficient(i: u32, lambda1: f64) -> f64 {
    lambda1.powf(-3.0 * (i as f64).exp2())
}

/// `P(i) = 2^{-i}` on `1..=cap`, renormalized.
pub fn e1_index_weights(cap: u32) -> Vec<f64> {
    let raw: Vec<f64> = (1..=cap).map(|i| (-(i as f64)).exp2()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Total variation distance between the capped and the full index law.
pub fn e1_truncation_distance(cap: u32) -> f64 {
    (-(cap as f64)).exp2()
}

pub(crate) struct IndexSampler {
    cumulative: Vec<f64>,
}

impl IndexSampler {
    pub(crate) fn new(cap: u32) -> Self {
        IndexSampler { cumulative: cumulative(&e1_index_weights(cap)) }
    }

    pub(crate) fn draw(&self, rng: &mut TrialRng) -> u32 {
        sample_index(rng, &self.cumulative) as u32 + 1
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln c_n` for `n = 1..=len` given `ln a_{i_n}` per step.
pub fn second_coefficient_log(log_a: &[f64], lambda1: f64) -> Vec<f64> {
    let ll = lambda1.ln();
    let mut prev = f64::NEG_INFINITY;
    log_a
        .iter()
        .enumerate()
        .map(|(k, &la)| {
            prev = log_add_exp(ll + prev, la + 2.0 * k as f64 * ll);
            prev
        })
        .collect()
}

/// The same recursion on explicit coefficients `a_{i_n}`, in floating point.
pub fn second_coefficient_recursion(a: &[f64], lambda1: f64) -> Vec<f64> {
    let mut prev = 0.0;
    let mut scale = 1.0;
    a.iter()
        .map(|&ai| {
            prev = lambda1 * prev + ai * scale;
            scale *= lambda1 * lambda1;
            prev
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondCoefficient {
    /// `ln c_n` for `n = 1..=len`.
    pub log_values: Vec<f64>,
    /// `c_len`, possibly `inf`.
    pub value: f64,
    /// `c_n >= lambda^{2n} a_{i_n}` held at every `n`.
    pub lower_bound_holds: bool,
}

/// Quadratic coefficient of `f_{i_n} o ... o f_{i_1}` for an index prefix.
pub fn e1_second_coefficient(indices: &[u32], lambda1: f64) -> Result<SecondCoefficient, GalleryError> {
    if !(lambda1 > 0.0 && lambda1 < 1.0) {
        return Err(GalleryError::InvalidParameter("lambda1 must lie in (0, 1)".into()));
    }
    let log_a: Vec<f64> = indices.iter().map(|&i| e1_log_coefficient(i, lambda1)).collect();
    Ok(finish(second_coefficient_log(&log_a, lambda1), &log_a, lambda1))
}

/// Same as [`e1_second_coefficient`] for explicit positive coefficients
/// `a_{i_n}`, e.g. with `a_0 = 1`.
pub fn second_coefficient_from_coefficients(a: &[f64], lambda1: f64) -> Result<SecondCoefficient, GalleryError> {
    if !(lambda1 > 0.0 && lambda1 < 1.0) || a.iter().any(|&x| !(x > 0.0)) {
        return Err(GalleryError::InvalidParameter("need lambda1 in (0, 1) and positive coefficients".into()));
    }
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    Ok(finish(second_coefficient_log(&log_a, lambda1), &log_a, lambda1))
}

fn finish(log_values: Vec<f64>, log_a: &[f64], lambda1: f64) -> SecondCoefficient {
    let ll = lambda1.ln();
    let lower_bound_holds = log_values
        .iter()
        .zip(log_a)
        .enumerate()
        .all(|(k, (&lc, &la))| lc >= 2.0 * (k + 1) as f64 * ll + la);
    let value = log_values.last().map_or(0.0, |l| l.exp());
    SecondCoefficient { log_values, value, lower_bound_holds }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupStats {
    pub lambda1: f64,
    pub trials: usize,
    pub horizon: usize,
    pub threshold: f64,
    pub seed: u64,
    pub cap: u32,
    pub blown_up: usize,
    pub fraction: f64,
}

/// Fraction of trials with `max_{n <= horizon} c_n > threshold`. Trial `t`
/// uses stream `t`, so a longer horizon extends the same sequences.
pub fn e1_blowup_statistics(
    lambda1: f64,
    trials: usize,
    horizon: usize,
    threshold: f64,
    seed: u64,
) -> Result<BlowupStats, GalleryError> {
    e1_blowup_statistics_capped(lambda1, trials, horizon, threshold, seed, DEFAULT_CAP)
}

pub fn e1_blowup_statistics_capped(
    lambda1: f64,
    trials: usize,
    horizon: usize,
    threshold: f64,
    seed: u64,
    cap: u32,
) -> Result<BlowupStats, GalleryError> {
    if !(lambda1 > 0.0 && lambda1 < 1.0) || trials == 0 || !(threshold > 0.0) || cap == 0 {
        return Err(GalleryError::InvalidParameter("need lambda1 in (0,1), trials >= 1, threshold > 0, cap >= 1".into()));
    }
    let sampler = IndexSampler::new(cap);
    let ll = lambda1.ln();
    let log_threshold = threshold.ln();
    let hits: Vec<bool> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(stream_seed(seed, t));
            let mut log_c = f64::NEG_INFINITY;
            for k in 0..horizon {
                let la = e1_log_coefficient(sampler.draw(&mut rng), lambda1);
                log_c = log_add_exp(ll + log_c, la + 2.0 * k as f64 * ll);
                if log_c > log_threshold {
                    return true;
                }
            }
            false
        })
        .collect();
    let blown_up = hits.iter().filter(|&&h| h).count();
    Ok(BlowupStats {
        lambda1,
        trials,
        horizon,
        threshold,
        seed,
        cap,
        blown_up,
        fraction: blown_up as f64 / trials as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Empirical `P(2^{i_n} >= n)`.
    pub estimate: f64,
    pub stderr: f64,
    /// The same probability under the capped index law.
    pub exact: f64,
}

/// Estimate `p_n = P(i_n >= log2 n)`, the chance that step `n` uses an
/// index large enough to dominate the decay `lambda^{2n}` at `lambda = 1/2`.
pub fn e1_tail_probability(n: usize, trials: usize, seed: u64) -> Result<TailEstimate, GalleryError> {
    if n == 0 || trials == 0 {
        return Err(GalleryError::InvalidParameter("n and trials must be at least 1".into()));
    }
    let sampler = IndexSampler::new(DEFAULT_CAP);
    let hit = |i: u32| (i as f64).exp2() >= n as f64;
    let hits = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(stream_seed(seed, t));
            let mut last = 0;
            for _ in 0..n {
                last = sampler.draw(&mut rng);
            }
            hit(last) as usize
        })
        .sum::<usize>();
    let p = hits as f64 / trials as f64;
    let exact = e1_index_weights(DEFAULT_CAP)
        .iter()
        .enumerate()
        .filter(|(k, _)| hit(*k as u32 + 1))
        .map(|(_, w)| w)
        .sum();
    Ok(TailEstimate { n, trials, seed, estimate: p, stderr: (p * (1.0 - p) / trials as f64).sqrt(), exact })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recursion_examples() {
        assert_eq!(second_coefficient_recursion(&[1.0], 0.5), vec![1.0]);
        assert_eq!(second_coefficient_recursion(&[1.0, 1.0], 0.5), vec![1.0, 0.75]);
        let logs = second_coefficient_log(&[0.0, 0.0], 0.5);
        assert!((logs[1] - 0.75f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn coefficient_formula() {
        assert_eq!(e1_coefficient(3, 0.5), 16_777_216.0);
        assert_eq!(e1_coefficient(10, 0.5), f64::INFINITY);
        assert!((e1_log_coefficient(3, 0.5) - 24.0 * 2f64.ln()).abs() < 1e-12);
        let w = e1_index_weights(20);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tail_exact_value() {
        let t = e1_tail_probability(100, 10, 1).unwrap();
        assert!((t.exact - 1.0 / 64.0).abs() < 1e-15);
    }
}
