//! Overflow-free accumulation of long matrix products.
//!
//! The running product is held as `P = U diag(e^s) V^*` where `U` has unit
//! (or zero) columns, `s` are log column scales and `V` is unitary. Each
//! flush multiplies the pending batch into `U`, moves column norms into
//! `s`, and re-orthogonalizes with one-sided Jacobi rotations computed on the
//! scaled columns. Scales are only ever compared through `e^{-(s_p - s_q)}`,
//! so singular values far below the double range stay resolvable.

use num_complex::Complex64;

use crate::linalg::{CMatrix, C_ZERO};

const MAX_SWEEPS: usize = 40;
const ORTHO_TOL: f64 = 1e-15;
/// A batch is flushed once the bound on its log condition number exceeds this.
const MAX_BATCH_LOG_COND: f64 = 9.2;

#[derive(Clone, Debug)]
pub(crate) struct ProductTracker {
    dim: usize,
    u: CMatrix,
    s: Vec<f64>,
    v: CMatrix,
    pending: Option<CMatrix>,
    pending_len: usize,
    pending_log_cond: f64,
    period: usize,
    steps: usize,
    log_det: f64,
}

impl ProductTracker {
    pub(crate) fn new(dim: usize, period: usize) -> Self {
        ProductTracker {
            dim,
            u: CMatrix::identity(dim, dim),
            s: vec![0.0; dim],
            v: CMatrix::identity(dim, dim),
            pending: None,
            pending_len: 0,
            pending_log_cond: 0.0,
            period: period.max(1),
            steps: 0,
            log_det: 0.0,
        }
    }

    /// Left-multiply the product by `m`, whose `log|det|` is supplied.
    pub(crate) fn push(&mut self, m: &CMatrix, log_abs_det: f64) {
        self.pending = Some(match self.pending.take() {
            None => m.clone(),
            Some(b) => m * b,
        });
        self.pending_len += 1;
        self.steps += 1;
        self.log_det += log_abs_det;
        // cond(m) <= |m|_F^d / |det m|
        self.pending_log_cond += self.dim as f64 * m.norm().ln() - log_abs_det;
        if self.pending_len >= self.period || !(self.pending_log_cond <= MAX_BATCH_LOG_COND) {
            self.flush();
        }
    }

    pub(crate) fn steps(&self) -> usize {
        self.steps
    }

    pub(crate) fn log_abs_det(&self) -> f64 {
        self.log_det
    }

    pub(crate) fn flush(&mut self) {
        let Some(b) = self.pending.take() else {
            return;
        };
        self.pending_len = 0;
        self.pending_log_cond = 0.0;
        self.u = b * &self.u;
        for j in 0..self.dim {
            self.renormalize(j);
        }
        self.orthogonalize();
    }

    fn renormalize(&mut self, j: usize) {
        let norm = self.u.column(j).norm();
        if self.s[j] == f64::NEG_INFINITY || norm == 0.0 {
            self.s[j] = f64::NEG_INFINITY;
            self.u.column_mut(j).fill(C_ZERO);
            return;
        }
        self.u.column_mut(j).unscale_mut(norm);
        self.s[j] += norm.ln();
    }

    fn orthogonalize(&mut self) {
        for _ in 0..MAX_SWEEPS {
            let mut worst = 0.0f64;
            for a in 0..self.dim {
                for b in a + 1..self.dim {
                    worst = worst.max(self.rotate(a, b));
                }
            }
            if worst < ORTHO_TOL {
                break;
            }
        }
    }

    /// One Jacobi rotation on columns `a, b`; returns `|<u_a, u_b>|` before it.
    fn rotate(&mut self, a: usize, b: usize) -> f64 {
        let (p, q) = if self.s[a] >= self.s[b] { (a, b) } else { (b, a) };
        if self.s[q] == f64::NEG_INFINITY {
            return 0.0;
        }
        let gamma = self.u.column(p).dotc(&self.u.column(q));
        let g = gamma.norm();
        if g < ORTHO_TOL || g == 0.0 {
            return g;
        }
        let e = gamma / g;
        let delta = self.s[p] - self.s[q];
        let big_e = (-delta).exp();
        let aa = (1.0 - big_e * big_e) / (2.0 * g);
        let u = -1.0 / (aa + (big_e * big_e + aa * aa).sqrt());
        let t = u * big_e;
        let cs = 1.0 / (1.0 + t * t).sqrt();
        let sn = cs * t;

        let wp = self.u.column(p).into_owned();
        let wq_tilde = self.u.column(q).map(|z| z * e.conj());
        let new_p = &wp * Complex64::from(cs) - &wq_tilde * Complex64::from(sn * big_e);
        let new_q_tilde = (&wp * Complex64::from(u) + &wq_tilde) * Complex64::from(cs);
        self.u.set_column(p, &new_p);
        self.u.set_column(q, &new_q_tilde.map(|z| z * e));
        self.renormalize(p);
        self.renormalize(q);

        let vp = self.v.column(p).into_owned();
        let vq = self.v.column(q).into_owned();
        let new_vp = &vp * Complex64::from(cs) - &vq * (e.conj() * sn);
        let new_vq = &vp * (e * sn) + &vq * Complex64::from(cs);
        self.v.set_column(p, &new_vp);
        self.v.set_column(q, &new_vq);
        g
    }

    /// Log singular values in nonincreasing order, with matching right
    /// singular vectors as the columns of the returned matrix.
    pub(crate) fn decomposition(&mut self) -> (Vec<f64>, CMatrix) {
        self.flush();
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by(|&i, &j| self.s[j].total_cmp(&self.s[i]));
        let s = order.iter().map(|&i| self.s[i]).collect();
        let v = CMatrix::from_fn(self.dim, self.dim, |r, k| self.v[(r, order[k])]);
        (s, v)
    }

    pub(crate) fn log_norm(&mut self) -> f64 {
        self.flush();
        self.s.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The product itself; only meaningful while it is representable.
    #[cfg(test)]
    pub(crate) fn matrix(&mut self) -> CMatrix {
        self.flush();
        let scaled = CMatrix::from_fn(self.dim, self.dim, |r, k| self.u[(r, k)] * self.s[k].exp());
        scaled * self.v.adjoint()
    }
}
