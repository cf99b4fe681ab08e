//! Scalar cocycles over an irrational rotation `T x = x + theta`.
//!
//! `R1` is the coboundary `M(x) = T(x) / x`. `R2` is `M = exp(f)` where
//! `f = sum_{k <= K} f_k` and each `f_k = phi_k - phi_k o T` is built from
//! tent bumps on the orbit points `omega_j = (j - 1) theta`:
//! on `I_j = [omega_j - eps_k, omega_j + eps_k]`, with `tau` the tent height,
//! `f_k = -tau` for `1 <= j <= a_k` and `+tau` for `a_k < j <= 2 a_k`, while
//! `phi_k = tau * (min(j - 1, a) - max(0, j - 1 - a))`. Hence
//! `f_k(T^i x) = -2^{-k}` for `i < a_k` at `x = omega_1`, and
//! `phi_k(omega_{a_k + 1}) = a_k 2^{-k} = k`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cocycle::{CirclePoint, CocycleSpec, RotationDriver};
use crate::linalg::c;

use super::GalleryError;

/// Largest supported depth; `a_12 = 49152`.
pub const MAX_DEPTH: u32 = 12;

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// `a_k = 2^k k`.
pub fn level_length(k: u32) -> u64 {
    (1u64 << k) * k as u64
}

/// One level `k` of the `R2` construction.
#[derive(Clone, Debug)]
pub struct RotationLevel {
    pub k: u32,
    pub a: u64,
    /// Half-width of the bumps in units of `2^-64`.
    pub eps: u64,
    /// Halvings applied to the starting width `1 / a^2`.
    pub halvings: u32,
    /// `(omega_j, j)` for `j = 1..=2a`, sorted by position.
    centers: Vec<(u64, u32)>,
}

impl RotationLevel {
    fn new(theta: CirclePoint, k: u32) -> Result<RotationLevel, GalleryError> {
        let a = level_length(k);
        // omega_0 .. omega_{2a+1}; bumps live on 1..=2a.
        let mut all: Vec<u64> = (0..=2 * a + 1)
            .map(|j| CirclePoint(0).rotate_n(theta, j).0.wrapping_sub(theta.0))
            .collect();
        all.sort_unstable();
        let mut min_gap = all[0].wrapping_sub(all[all.len() - 1]);
        for w in all.windows(2) {
            min_gap = min_gap.min(w[1] - w[0]);
        }
        let mut eps = (TWO_POW_64 / (a as f64 * a as f64)) as u64;
        let mut halvings = 0;
        while eps > 0 && eps >= min_gap / 2 {
            eps /= 2;
            halvings += 1;
        }
        if eps == 0 {
            return Err(GalleryError::Separation { k, theta: theta.to_f64() });
        }
        let mut centers: Vec<(u64, u32)> =
            (1..=2 * a).map(|j| (CirclePoint(0).rotate_n(theta, j - 1).0, j as u32)).collect();
        centers.sort_unstable();
        Ok(RotationLevel { k, a, eps, halvings, centers })
    }

    pub fn eps_f64(&self) -> f64 {
        self.eps as f64 / TWO_POW_64
    }

    /// Bump index `j` and tent height `tau` at `x`, if `x` lies in some `I_j`.
    fn locate(&self, x: CirclePoint) -> Option<(u64, f64)> {
        let pos = self.centers.partition_point(|&(w, _)| w <= x.0);
        let n = self.centers.len();
        let candidates = [self.centers[(pos + n - 1) % n], self.centers[pos % n]];
        for (w, j) in candidates {
            let offset = x.offset_from(CirclePoint(w)).unsigned_abs();
            if offset <= self.eps {
                let tau = (1.0 - offset as f64 / self.eps as f64) / (self.k as f64).exp2();
                return Some((j as u64, tau));
            }
        }
        None
    }

    pub fn f(&self, x: CirclePoint) -> f64 {
        match self.locate(x) {
            Some((j, tau)) if j <= self.a => -tau,
            Some((_, tau)) => tau,
            None => 0.0,
        }
    }

    pub fn phi(&self, x: CirclePoint) -> f64 {
        match self.locate(x) {
            Some((j, tau)) => tau * ((j - 1).min(self.a) - (j - 1).saturating_sub(self.a)) as f64,
            None => 0.0,
        }
    }

    /// `int phi_k` by the trapezoid rule on the tent breakpoints, which is
    /// exact for piecewise linear `phi_k`.
    pub fn phi_integral(&self) -> f64 {
        let e = self.eps_f64();
        self.centers
            .iter()
            .map(|&(w, _)| {
                let mid = self.phi(CirclePoint(w));
                let left = self.phi(CirclePoint(w.wrapping_sub(self.eps)));
                let right = self.phi(CirclePoint(w.wrapping_add(self.eps)));
                e * (left + mid) / 2.0 + e * (mid + right) / 2.0
            })
            .sum()
    }

    /// `sum_j eps * peak_j = a^2 eps 2^{-k}`.
    pub fn phi_integral_closed_form(&self) -> f64 {
        let a = self.a as f64;
        a * a * self.eps_f64() / (self.k as f64).exp2()
    }
}

/// The full `R2` data for given `theta` and depth `K`.
#[derive(Clone, Debug)]
pub struct RotationConstruction {
    pub theta: CirclePoint,
    pub depth: u32,
    pub levels: Vec<RotationLevel>,
}

impl RotationConstruction {
    pub fn new(theta: f64, depth: u32) -> Result<RotationConstruction, GalleryError> {
        validate_angle(theta)?;
        if depth == 0 || depth > MAX_DEPTH {
            return Err(GalleryError::InvalidParameter(format!("depth must lie in 1..={MAX_DEPTH}")));
        }
        let theta = CirclePoint::from_f64(theta);
        let levels = (1..=depth).map(|k| RotationLevel::new(theta, k)).collect::<Result<_, _>>()?;
        Ok(RotationConstruction { theta, depth, levels })
    }

    pub fn f(&self, x: CirclePoint) -> f64 {
        self.levels.iter().map(|l| l.f(x)).sum()
    }

    pub fn phi(&self, x: CirclePoint) -> f64 {
        self.levels.iter().map(|l| l.phi(x)).sum()
    }

    /// `omega_{a_k + 1} = a_k theta`, where `phi_k = k`.
    pub fn designated_point(&self, k: u32) -> CirclePoint {
        CirclePoint(0).rotate_n(self.theta, level_length(k))
    }

    /// `log M^n_x = sum_{i < n} f(T^i x)`.
    pub fn log_product(&self, x: CirclePoint, n: usize) -> f64 {
        let mut p = x;
        let mut sum = 0.0;
        let mut comp = 0.0;
        for _ in 0..n {
            let v = self.f(p);
            let t = sum + v;
            comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
            sum = t;
            p = p.rotate(self.theta);
        }
        sum + comp
    }

    pub fn eval(&self, x: CirclePoint, n: usize) -> RotationEval {
        let log_m = self.log_product(x, n);
        RotationEval {
            x: x.to_f64(),
            n,
            f: self.f(x),
            phi: self.phi(x),
            f_levels: self.levels.iter().map(|l| l.f(x)).collect(),
            phi_levels: self.levels.iter().map(|l| l.phi(x)).collect(),
            log_m,
            m: log_m.exp(),
        }
    }

    pub fn driver(&self) -> RotationDriver {
        let me = Arc::new(self.clone());
        RotationDriver {
            dim: 1,
            theta: self.theta,
            matrix: Arc::new(move |x| nalgebra::DMatrix::from_element(1, 1, c(me.f(x).exp(), 0.0))),
            generator: Some(serde_json::json!({
                "generator": { "family": "R2", "theta": self.theta.to_f64(), "depth": self.depth }
            })),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationEval {
    pub x: f64,
    pub n: usize,
    pub f: f64,
    pub phi: f64,
    pub f_levels: Vec<f64>,
    pub phi_levels: Vec<f64>,
    pub log_m: f64,
    pub m: f64,
}

/// Evaluate `f`, `phi` and `M^n_x` of the depth-`K` construction.
pub fn rotation_cocycle_eval(depth: u32, theta: f64, x: f64, n: usize) -> Result<RotationEval, GalleryError> {
    Ok(RotationConstruction::new(theta, depth)?.eval(CirclePoint::from_f64(x), n))
}

pub(crate) fn validate_angle(theta: f64) -> Result<(), GalleryError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(GalleryError::InvalidParameter("rotation angle must lie in (0, 1)".into()));
    }
    Ok(())
}

/// `R1`: `M(x) = (x + theta mod 1) / x` on `(0, 1)`.
pub fn coboundary_driver(theta: f64) -> Result<RotationDriver, GalleryError> {
    validate_angle(theta)?;
    let t = CirclePoint::from_f64(theta);
    Ok(RotationDriver {
        dim: 1,
        theta: t,
        matrix: Arc::new(move |x: CirclePoint| {
            nalgebra::DMatrix::from_element(1, 1, c(x.rotate(t).to_f64() / x.to_f64(), 0.0))
        }),
        generator: Some(serde_json::json!({ "generator": { "family": "R1", "theta": theta } })),
    })
}

pub fn rotation_spec(theta: f64, depth: u32) -> Result<CocycleSpec, GalleryError> {
    Ok(CocycleSpec::Rotation(RotationConstruction::new(theta, depth)?.driver()))
}
