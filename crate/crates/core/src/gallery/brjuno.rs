//! Partial sums `S_N = sum_{n < N} ln(q_{n+1}) / q_n` over the continued
//! fraction denominators of `alpha`.
//!
//! A double is a dyadic rational, so its expansion is computed exactly with
//! integer Euclid and terminates. Liouville-type angles, whose `ln q_n` grows
//! past any integer type, go through [`brjuno_log_space`].

use serde::{Deserialize, Serialize};

use super::GalleryError;

pub const MAX_DEPTH: usize = 40;
/// `S_N` counts as converged once the last increment is below this.
pub const CONVERGENCE_INCREMENT: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrjunoReport {
    pub alpha: f64,
    pub depth: usize,
    /// `a_1, a_2, ...` up to the depth used.
    pub partial_quotients: Vec<u128>,
    /// `q_0 = 1, q_1 = a_1, ...`.
    pub convergents: Vec<u128>,
    /// `S_1, ..., S_N`.
    pub partial_sums: Vec<f64>,
    pub converged: bool,
    /// Depth at which the exact expansion of the double ran out.
    pub terminated_at: Option<usize>,
}

/// Exact continued fraction of a double in `(0, 1)`; at most `limit` terms.
pub fn partial_quotients(alpha: f64, limit: usize) -> Result<Vec<u128>, GalleryError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GalleryError::InvalidParameter("alpha must lie in (0, 1)".into()));
    }
    let bits = alpha.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let (mantissa, shift) = if exp == 0 {
        (bits & ((1 << 52) - 1), 1074)
    } else {
        ((bits & ((1 << 52) - 1)) | (1 << 52), 1075 - exp)
    };
    if shift > 127 {
        return Err(GalleryError::InvalidParameter("alpha below 2^-75 is not supported".into()));
    }
    let (mut num, mut den) = (mantissa as u128, 1u128 << shift);
    let g = gcd(num, den);
    num /= g;
    den /= g;
    let mut out = Vec::new();
    while num != 0 && out.len() < limit {
        out.push(den / num);
        (num, den) = (den % num, num);
    }
    Ok(out)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn brjuno_partial_sum(alpha: f64, depth: usize) -> Result<BrjunoReport, GalleryError> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(GalleryError::InvalidParameter(format!("depth must lie in 1..={MAX_DEPTH}")));
    }
    let a = partial_quotients(alpha, depth)?;
    let terminated_at = (a.len() < depth).then_some(a.len());
    let mut q = vec![1u128, a[0]];
    for n in 1..a.len() {
        let next = a[n]
            .checked_mul(q[n])
            .and_then(|v| v.checked_add(q[n - 1]))
            .ok_or_else(|| GalleryError::InvalidParameter("convergent overflowed 128 bits".into()))?;
        q.push(next);
    }
    let mut sums = Vec::with_capacity(a.len());
    let mut s = 0.0;
    let mut last_increment = f64::INFINITY;
    for n in 0..a.len() {
        last_increment = (q[n + 1] as f64).ln() / q[n] as f64;
        s += last_increment;
        sums.push(s);
    }
    Ok(BrjunoReport {
        alpha,
        depth,
        partial_quotients: a,
        convergents: q,
        partial_sums: sums,
        converged: last_increment < CONVERGENCE_INCREMENT,
        terminated_at,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrjunoLogReport {
    /// `ln q_0 = 0, ln q_1, ...`.
    pub log_convergents: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub converged: bool,
}

/// Same sums from `ln a_{n+1}`, using `ln q_{n+1} = ln(a_{n+1} q_n + q_{n-1})`.
pub fn brjuno_log_space(log_partial_quotients: &[f64]) -> BrjunoLogReport {
    let mut lq = vec![0.0];
    let mut prev = f64::NEG_INFINITY;
    for &la in log_partial_quotients {
        let cur = *lq.last().unwrap();
        let hi = la + cur;
        let next = if prev == f64::NEG_INFINITY { hi } else { hi + (prev - hi).exp().ln_1p() };
        prev = cur;
        lq.push(next);
    }
    let mut s = 0.0;
    let mut last = f64::INFINITY;
    let sums = (0..log_partial_quotients.len())
        .map(|n| {
            last = lq[n + 1] * (-lq[n]).exp();
            s += last;
            s
        })
        .collect();
    BrjunoLogReport { log_convergents: lq, partial_sums: sums, converged: last < CONVERGENCE_INCREMENT }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_mean_quotients() {
        let a = partial_quotients(0.618_033_988_749_894_9, 30).unwrap();
        assert!(a.iter().take(30).all(|&x| x == 1));
    }

    #[test]
    fn dyadic_terminates() {
        let r = brjuno_partial_sum(0.375, 10).unwrap();
        assert_eq!(r.partial_quotients, vec![2, 1, 2]);
        assert_eq!(r.convergents, vec![1, 2, 3, 8]);
        assert_eq!(r.terminated_at, Some(3));
    }

    #[test]
    fn log_space_agrees_on_small_quotients() {
        let r = brjuno_partial_sum(0.618_033_988_749_894_9, 20).unwrap();
        let l = brjuno_log_space(&vec![0.0; 20]);
        for (x, y) in r.partial_sums.iter().zip(&l.partial_sums) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
