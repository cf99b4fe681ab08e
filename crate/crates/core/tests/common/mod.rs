#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use randlocal::cocycle::MatrixEnsemble;
use randlocal::germ_dynamics::GermEnsemble;
use randlocal::jets::Jet;
use randlocal::linalg::{c, CMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) / 2f64.sqrt()
}

pub fn gaussian_matrix(rng: &mut impl Rng, dim: usize) -> CMatrix {
    DMatrix::from_fn(dim, dim, |_, _| gaussian(rng))
}

/// Haar unitary: QR of a Ginibre matrix with the phases of `diag R` removed.
pub fn haar_unitary(rng: &mut impl Rng, dim: usize) -> CMatrix {
    let qr = gaussian_matrix(rng, dim).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() == 0.0 { c(1.0, 0.0) } else { d / d.norm() };
        for i in 0..dim {
            u[(i, j)] *= phase;
        }
    }
    u
}

/// `U diag(s) V` with singular values spread geometrically over `[1, cond]`.
pub fn conditioned(rng: &mut impl Rng, dim: usize, cond: f64) -> CMatrix {
    let u = haar_unitary(rng, dim);
    let v = haar_unitary(rng, dim);
    let s = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            c(cond.powf(i as f64 / (dim - 1).max(1) as f64), 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    u * s * v
}

pub fn random_ensemble(rng: &mut impl Rng, dim: usize, atoms: usize) -> MatrixEnsemble {
    let w: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    MatrixEnsemble::new((0..atoms).map(|i| (gaussian_matrix(rng, dim), w[i] / total)).collect()).unwrap()
}

/// Origin-fixing jet with coefficient moduli below `scale^{|b|-1}`.
pub fn random_jet(rng: &mut impl Rng, dim: usize, degree: usize, scale: f64) -> Jet {
    let basis = Jet::zero(dim, degree).basis().monomials().to_vec();
    let components: Vec<Vec<(Vec<u32>, Complex64)>> = (0..dim)
        .map(|_| {
            basis
                .iter()
                .filter(|m| m.degree() >= 1)
                .map(|m| {
                    let r: f64 = rng.gen_range(0.0..1.0);
                    let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    let s = scale.powi(m.degree() as i32 - 1);
                    (m.exponents().to_vec(), Complex64::from_polar(r * s, t))
                })
                .collect()
        })
        .collect();
    Jet::from_terms(dim, degree, &components).unwrap()
}

pub fn linear_germs(ensemble: &MatrixEnsemble, degree: usize) -> GermEnsemble {
    GermEnsemble::new(ensemble.atoms().map(|(m, p)| (Jet::linear(m, degree), p)).collect(), 10.0).unwrap()
}
