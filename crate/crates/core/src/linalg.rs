//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Build a complex matrix from real row-major rows.
pub fn real_matrix(rows: &[&[f64]]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| c(rows[i][j], 0.0))
}

pub fn diag(values: &[Complex64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(values))
}

/// Operator 2-norm (largest singular value).
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn singular_values_desc(m: &CMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().singular_values().iter().cloned().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `max |(A^*A - I)_{ij}|`; zero exactly for unitary matrices.
pub fn unitarity_defect(a: &CMatrix) -> f64 {
    let g = a.adjoint() * a;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { C_ONE } else { C_ZERO };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    worst
}

/// Hermitian part `(A + A^*)/2`, used to scrub rounding asymmetry.
pub fn hermitize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).map(|z| z * 0.5)
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitize(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(a.nrows(), a.ncols(), |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

/// `V f(D) V^*` for Hermitian `a = V D V^*`.
pub fn hermitian_fn(a: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(a);
    let d = diag(&values.iter().map(|&v| c(f(v), 0.0)).collect::<Vec<_>>());
    hermitize(&(&vectors * d * vectors.adjoint()))
}

pub fn hermitian_sqrt(a: &CMatrix) -> CMatrix {
    hermitian_fn(a, |v| v.max(0.0).sqrt())
}

pub fn trace_re(a: &CMatrix) -> f64 {
    (0..a.nrows()).map(|i| a[(i, i)].re).sum()
}

pub fn log_abs_det(a: &CMatrix) -> f64 {
    let d = a.clone().determinant().norm();
    if d == 0.0 {
        f64::NEG_INFINITY
    } else {
        d.ln()
    }
}

pub fn vector_norm(z: &[Complex64]) -> f64 {
    z.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_simple_matrices() {
        let a = real_matrix(&[&[3.0, 0.0], &[0.0, -4.0]]);
        assert!((op_norm(&a) - 4.0).abs() < 1e-14);
        assert!((frobenius(&a) - 5.0).abs() < 1e-14);
        assert!((log_abs_det(&a) - 12f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = real_matrix(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let s = hermitian_sqrt(&a);
        assert!(frobenius(&(&s * &s - &a)) < 1e-12);
    }
}
