//! A chooser that looks at the current point and always picks the map that
//! does not decrease `|z|` for `f_{1,2}(z) = lambda (z +- z^2)`, `|lambda| = 1`.
//! With `Re z >= 0` it picks `f_1`, since `|1 + z| >= 1` there; otherwise `f_2`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::GalleryError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialOrbit {
    pub z0: Complex64,
    pub alpha: f64,
    pub steps: usize,
    /// `|z_i|` for `i = 0..=last`.
    pub norms: Vec<f64>,
    /// `1` for `f_1`, `2` for `f_2`, one per step taken.
    pub choices: Vec<u8>,
    /// First `i` with `|z_i| > 1`.
    pub exit_step: Option<usize>,
    /// `min_i |z_{i+1}| / |z_i|`.
    pub min_ratio: f64,
}

impl AdversarialOrbit {
    /// `|z_{i+1}| >= |z_i| (1 - slack)` at every step.
    pub fn monotone(&self, slack: f64) -> bool {
        self.norms.windows(2).all(|w| w[1] >= w[0] * (1.0 - slack))
    }
}

pub fn adversarial_orbit(z0: Complex64, alpha: f64, steps: usize) -> Result<AdversarialOrbit, GalleryError> {
    if z0 == Complex64::new(0.0, 0.0) || !z0.is_finite() {
        return Err(GalleryError::InvalidParameter("starting point must be finite and nonzero".into()));
    }
    if !alpha.is_finite() {
        return Err(GalleryError::InvalidParameter("alpha must be finite".into()));
    }
    let lambda = Complex64::from_polar(1.0, TAU * alpha);
    let mut z = z0;
    let mut norms = vec![z.norm()];
    let mut choices = Vec::new();
    let mut exit_step = (norms[0] > 1.0).then_some(0);
    let mut min_ratio = f64::INFINITY;
    let mut i = 0;
    while exit_step.is_none() && i < steps {
        let (next, choice) = if z.re >= 0.0 { (lambda * (z + z * z), 1) } else { (lambda * (z - z * z), 2) };
        let norm = next.norm();
        min_ratio = min_ratio.min(norm / norms[i]);
        norms.push(norm);
        choices.push(choice);
        z = next;
        i += 1;
        if norm > 1.0 {
            exit_step = Some(i);
        }
    }
    Ok(AdversarialOrbit { z0, alpha, steps, norms, choices, exit_step, min_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbit_grows_and_exits() {
        let o = adversarial_orbit(Complex64::new(0.05, 0.02), 0.618_033_988_749_894_9, 100_000).unwrap();
        assert!(o.monotone(1e-14));
        assert!(o.exit_step.is_some());
        assert_eq!(o.choices.len(), o.norms.len() - 1);
    }

    #[test]
    fn zero_start_rejected() {
        assert!(adversarial_orbit(Complex64::new(0.0, 0.0), 0.3, 10).is_err());
    }
}
