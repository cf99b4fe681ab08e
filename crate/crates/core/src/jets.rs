//! Truncated multivariate complex power series.
//!
//! A [`Jet`] of dimension `m` and truncation degree `D` is a map
//! `C^m -> C^m` whose components are polynomials of total degree at most `D`.
//! It stands in for a holomorphic germ: composition is the germ composition
//! followed by dropping every monomial of degree above `D`.
//!
//! Coefficients are stored densely over a shared [`MonomialBasis`] in graded
//! lexicographic order (degree ascending, then exponents lexicographically
//! descending, so `1, z, w, z^2, zw, w^2, ...`). A canonical layout makes
//! coefficient-wise comparisons meaningful.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{CMatrix, C_ONE, C_ZERO};

pub const DEFAULT_DEGREE: usize = 8;

#[derive(Debug, Error)]
pub enum JetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("truncation degree mismatch: {left} vs {right}")]
    DegreeMismatch { left: usize, right: usize },
    #[error("inner map of a composition must fix the origin")]
    NotOriginFixing,
    #[error("monomial {exponents:?} has degree {degree} above the truncation degree {max}")]
    DegreeAboveTruncation { exponents: Vec<u32>, degree: usize, max: usize },
    #[error("duplicate monomial {exponents:?} in component {component}")]
    DuplicateMonomial { component: usize, exponents: Vec<u32> },
    #[error("malformed monomial: {0}")]
    Malformed(String),
    #[error("invalid jet text: {0}")]
    Syntax(#[from] serde_json::Error),
}

/// Exponent vector of a monomial `z_1^{e_1} ... z_m^{e_m}`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut e = vec![0; dim];
        e[axis] = 1;
        MultiIndex(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

const NO_INDEX: u32 = u32::MAX;

/// All monomials of degree `<= D` in `m` variables, with a truncated
/// multiplication table. Shared between jets through an `Arc`.
pub struct MonomialBasis {
    dim: usize,
    degree: usize,
    monomials: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    /// `degree_end[d]` = number of monomials of degree `<= d`.
    degree_end: Vec<usize>,
    /// `product[i * len + j]` = index of monomial `i * j`, or `NO_INDEX`.
    product: Vec<u32>,
    /// For each non-constant monomial: (index of monomial / z_j, j).
    predecessor: Vec<(usize, usize)>,
}

impl MonomialBasis {
    fn build(dim: usize, degree: usize) -> Self {
        let mut monomials = Vec::new();
        let mut degree_end = Vec::with_capacity(degree + 1);
        for d in 0..=degree {
            let mut current = vec![0u32; dim];
            push_compositions(d as u32, 0, &mut current, &mut monomials);
            degree_end.push(monomials.len());
        }
        let lookup: HashMap<MultiIndex, usize> =
            monomials.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let len = monomials.len();
        let mut product = vec![NO_INDEX; len * len];
        for i in 0..len {
            for j in 0..len {
                if monomials[i].degree() + monomials[j].degree() > degree {
                    continue;
                }
                let sum: Vec<u32> = monomials[i]
                    .0
                    .iter()
                    .zip(&monomials[j].0)
                    .map(|(a, b)| a + b)
                    .collect();
                product[i * len + j] = lookup[&MultiIndex(sum)] as u32;
            }
        }
        let predecessor = monomials
            .iter()
            .map(|m| match m.0.iter().position(|&e| e > 0) {
                None => (0, 0),
                Some(j) => {
                    let mut e = m.0.clone();
                    e[j] -= 1;
                    (lookup[&MultiIndex(e)], j)
                }
            })
            .collect();
        MonomialBasis { dim, degree, monomials, lookup, degree_end, product, predecessor }
    }

    /// Cached basis for `(dim, degree)`.
    pub fn shared(dim: usize, degree: usize) -> Arc<MonomialBasis> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<MonomialBasis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("basis cache poisoned");
        guard
            .entry((dim, degree))
            .or_insert_with(|| Arc::new(MonomialBasis::build(dim, degree)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    pub fn index_of(&self, m: &MultiIndex) -> Option<usize> {
        self.lookup.get(m).copied()
    }

    /// Truncated product of two dense coefficient vectors.
    fn mul(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let len = self.len();
        let mut out = vec![C_ZERO; len];
        for (i, &ai) in a.iter().enumerate() {
            if ai == C_ZERO {
                continue;
            }
            let di = self.monomials[i].degree();
            let end = self.degree_end[self.degree - di];
            let row = &self.product[i * len..i * len + end];
            for (j, &k) in row.iter().enumerate() {
                let bj = b[j];
                if bj != C_ZERO {
                    out[k as usize] += ai * bj;
                }
            }
        }
        out
    }
}

/// Monomials of total degree `remaining` over the coordinates `pos..`,
/// emitted in lexicographically descending order.
fn push_compositions(remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    let dim = current.len();
    if pos + 1 == dim {
        current[pos] = remaining;
        out.push(MultiIndex(current.clone()));
        current[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        push_compositions(remaining - e, pos + 1, current, out);
    }
    current[pos] = 0;
}

/// A truncated polynomial self-map of `C^m`.
#[derive(Clone)]
pub struct Jet {
    basis: Arc<MonomialBasis>,
    coeffs: Vec<Vec<Complex64>>,
    /// Nonzero terms per component, used for evaluation.
    terms: Vec<Vec<(usize, Complex64)>>,
    /// Number of basis monomials needed to evaluate (covers the highest
    /// degree with a nonzero coefficient).
    eval_len: usize,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for comp in &self.terms {
            let named: Vec<_> = comp
                .iter()
                .map(|&(i, c)| (self.basis.monomials[i].clone(), c))
                .collect();
            list.entry(&named);
        }
        list.finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.dim() == other.dim() && self.degree() == other.degree() && self.coeffs == other.coeffs
    }
}

impl Jet {
    fn from_dense(basis: Arc<MonomialBasis>, coeffs: Vec<Vec<Complex64>>) -> Jet {
        let terms: Vec<Vec<(usize, Complex64)>> = coeffs
            .iter()
            .map(|comp| {
                comp.iter()
                    .enumerate()
                    .filter(|(_, c)| **c != C_ZERO)
                    .map(|(i, &c)| (i, c))
                    .collect()
            })
            .collect();
        let top = terms
            .iter()
            .flat_map(|t| t.iter().map(|&(i, _)| basis.monomials[i].degree()))
            .max()
            .unwrap_or(0);
        let eval_len = basis.degree_end[top];
        Jet { basis, coeffs, terms, eval_len }
    }

    pub fn zero(dim: usize, degree: usize) -> Jet {
        let basis = MonomialBasis::shared(dim, degree);
        let coeffs = vec![vec![C_ZERO; basis.len()]; dim];
        Jet::from_dense(basis, coeffs)
    }

    pub fn identity(dim: usize, degree: usize) -> Jet {
        Jet::linear(&CMatrix::identity(dim, dim), degree)
    }

    /// The linear map `z -> A z`.
    pub fn linear(a: &CMatrix, degree: usize) -> Jet {
        let dim = a.nrows();
        let basis = MonomialBasis::shared(dim, degree);
        let mut coeffs = vec![vec![C_ZERO; basis.len()]; dim];
        for (i, comp) in coeffs.iter_mut().enumerate() {
            for j in 0..dim {
                comp[1 + j] = a[(i, j)];
            }
        }
        Jet::from_dense(basis, coeffs)
    }

    /// Build from sparse terms, one list of `(exponents, coefficient)` per
    /// component. Duplicates and monomials above the truncation degree are
    /// rejected.
    pub fn from_terms(
        dim: usize,
        degree: usize,
        components: &[Vec<(Vec<u32>, Complex64)>],
    ) -> Result<Jet, JetError> {
        if components.len() != dim {
            return Err(JetError::DimensionMismatch { expected: dim, got: components.len() });
        }
        let basis = MonomialBasis::shared(dim, degree);
        let mut coeffs = vec![vec![C_ZERO; basis.len()]; dim];
        for (ci, comp) in components.iter().enumerate() {
            let mut seen = vec![false; basis.len()];
            for (exps, value) in comp {
                if exps.len() != dim {
                    return Err(JetError::Malformed(format!(
                        "exponent vector {exps:?} has length {} in dimension {dim}",
                        exps.len()
                    )));
                }
                let mi = MultiIndex(exps.clone());
                let d = mi.degree();
                if d > degree {
                    return Err(JetError::DegreeAboveTruncation { exponents: exps.clone(), degree: d, max: degree });
                }
                let idx = basis.lookup[&mi];
                if seen[idx] {
                    return Err(JetError::DuplicateMonomial { component: ci, exponents: exps.clone() });
                }
                seen[idx] = true;
                coeffs[ci][idx] = *value;
            }
        }
        Ok(Jet::from_dense(basis, coeffs))
    }

    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    /// Coefficient of `z^exponents` in component `component` (zero when the
    /// monomial lies above the truncation degree).
    pub fn coeff(&self, component: usize, exponents: &[u32]) -> Complex64 {
        match self.basis.lookup.get(&MultiIndex(exponents.to_vec())) {
            Some(&i) => self.coeffs[component][i],
            None => C_ZERO,
        }
    }

    /// Dense coefficients of one component in basis order.
    pub fn component(&self, component: usize) -> &[Complex64] {
        &self.coeffs[component]
    }

    /// Nonzero terms of one component.
    pub fn terms(&self, component: usize) -> impl Iterator<Item = (&MultiIndex, Complex64)> + '_ {
        self.terms[component]
            .iter()
            .map(move |&(i, c)| (&self.basis.monomials[i], c))
    }

    /// Germs fix the origin; jets with a constant term are representable for
    /// affine test data but cannot be used as the inner map of a composition.
    pub fn fixes_origin(&self) -> bool {
        self.coeffs.iter().all(|comp| comp[0] == C_ZERO)
    }

    /// `df(0)`: entry `(i, j)` is the coefficient of `z_j` in component `i`.
    pub fn linear_part(&self) -> CMatrix {
        let m = self.dim();
        CMatrix::from_fn(m, m, |i, j| self.coeffs[i][1 + j])
    }

    /// Sum over degrees `>= 2` of coefficient moduli, per component and degree:
    /// `bounds[i][k] = sum_{|b| = k} |c_{i,b}|`. Bounds `|N_i(z)|` by
    /// `sum_k bounds[i][k] ||z||^k`.
    pub fn degree_moduli(&self) -> Vec<Vec<f64>> {
        let d = self.degree();
        self.coeffs
            .iter()
            .map(|comp| {
                let mut by_degree = vec![0.0; d + 1];
                for (i, cf) in comp.iter().enumerate() {
                    by_degree[self.basis.monomials[i].degree()] += cf.norm();
                }
                by_degree
            })
            .collect()
    }

    fn check_compatible(&self, other: &Jet) -> Result<(), JetError> {
        if self.dim() != other.dim() {
            return Err(JetError::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        if self.degree() != other.degree() {
            return Err(JetError::DegreeMismatch { left: self.degree(), right: other.degree() });
        }
        Ok(())
    }

    /// `self ∘ inner`, truncated at the common degree.
    pub fn compose(&self, inner: &Jet) -> Result<Jet, JetError> {
        self.check_compatible(inner)?;
        if !inner.fixes_origin() {
            return Err(JetError::NotOriginFixing);
        }
        let basis = &self.basis;
        let len = basis.len();
        // powers[a] = inner^a (the monomial a evaluated on the inner map)
        let mut powers: Vec<Vec<Complex64>> = Vec::with_capacity(len);
        let mut one = vec![C_ZERO; len];
        one[0] = C_ONE;
        powers.push(one);
        for a in 1..len {
            let (prev, axis) = basis.predecessor[a];
            let p = basis.mul(&powers[prev], &inner.coeffs[axis]);
            powers.push(p);
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|comp| {
                let mut out = vec![C_ZERO; len];
                for (a, &ca) in comp.iter().enumerate() {
                    if ca == C_ZERO {
                        continue;
                    }
                    for (o, &p) in out.iter_mut().zip(&powers[a]) {
                        *o += ca * p;
                    }
                }
                out
            })
            .collect();
        Ok(Jet::from_dense(self.basis.clone(), coeffs))
    }

    /// `n`-fold self-composition; `n = 0` gives the identity.
    pub fn iterate(&self, n: usize) -> Result<Jet, JetError> {
        if !self.fixes_origin() {
            return Err(JetError::NotOriginFixing);
        }
        let mut acc = Jet::identity(self.dim(), self.degree());
        for _ in 0..n {
            acc = self.compose(&acc)?;
        }
        Ok(acc)
    }

    pub fn evaluate(&self, z: &[Complex64]) -> Result<Vec<Complex64>, JetError> {
        if z.len() != self.dim() {
            return Err(JetError::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        let mut out = vec![C_ZERO; self.dim()];
        self.evaluate_into(z, &mut out);
        Ok(out)
    }

    /// Evaluation without the dimension check; `z` and `out` must both have
    /// length `dim`.
    pub fn evaluate_into(&self, z: &[Complex64], out: &mut [Complex64]) {
        const STACK: usize = 64;
        let n = self.eval_len;
        let mut stack = [C_ZERO; STACK];
        let mut heap;
        let mono: &mut [Complex64] = if n <= STACK {
            &mut stack[..n]
        } else {
            heap = vec![C_ZERO; n];
            &mut heap
        };
        mono[0] = C_ONE;
        for a in 1..n {
            let (prev, axis) = self.basis.predecessor[a];
            mono[a] = mono[prev] * z[axis];
        }
        for (o, terms) in out.iter_mut().zip(&self.terms) {
            let mut acc = C_ZERO;
            for &(i, cf) in terms {
                acc += cf * mono[i];
            }
            *o = acc;
        }
    }

    /// Largest coefficient difference relative to the larger coefficient
    /// scale of the two jets.
    pub fn relative_distance(&self, other: &Jet) -> f64 {
        let scale = self
            .coeffs
            .iter()
            .chain(&other.coeffs)
            .flatten()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let diff = self
            .coeffs
            .iter()
            .flatten()
            .zip(other.coeffs.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        diff / scale
    }

    pub fn to_record(&self) -> JetRecord {
        JetRecord(
            self.terms
                .iter()
                .map(|comp| {
                    comp.iter()
                        .map(|&(i, c)| TermRecord {
                            exponents: self.basis.monomials[i].0.iter().map(|&e| e as i64).collect(),
                            coeff: [c.re, c.im],
                        })
                        .collect()
                })
                .collect(),
        )
    }

    pub fn from_record(record: &JetRecord, degree: usize) -> Result<Jet, JetError> {
        let dim = record.0.len();
        if dim == 0 {
            return Err(JetError::Malformed("a map needs at least one component".into()));
        }
        let mut components = Vec::with_capacity(dim);
        for comp in &record.0 {
            let mut terms = Vec::with_capacity(comp.len());
            for t in comp {
                let exps = t
                    .exponents
                    .iter()
                    .map(|&e| {
                        u32::try_from(e).map_err(|_| JetError::Malformed(format!("exponent {e} is not a nonnegative integer")))
                    })
                    .collect::<Result<Vec<u32>, _>>()?;
                terms.push((exps, Complex64::new(t.coeff[0], t.coeff[1])));
            }
            components.push(terms);
        }
        Jet::from_terms(dim, degree, &components)
    }
}

/// Serialized form of a polynomial map: one list of terms per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JetRecord(pub Vec<Vec<TermRecord>>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub exponents: Vec<i64>,
    pub coeff: [f64; 2],
}

/// Parse the JSON map schema
/// `[[{"exponents": [e1, ..., em], "coeff": [re, im]}, ...], ...]`.
pub fn jet_parse(text: &str, degree: usize) -> Result<Jet, JetError> {
    let record: JetRecord = serde_json::from_str(text)?;
    Jet::from_record(&record, degree)
}

pub fn jet_to_string(jet: &Jet) -> String {
    serde_json::to_string(&jet.to_record()).expect("jet records always serialize")
}
