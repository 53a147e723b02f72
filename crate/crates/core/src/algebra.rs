//! Multi-index bookkeeping, sparse polynomials on a monomial support,
//! truncated moment sequences and the Riesz pairing between them, and
//! moments of finitely atomic measures.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Euclidean distance under which two extracted atoms are merged.
pub const ATOM_DEDUP_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("monomial {0} not contained in the support")]
    UnsupportedMonomial(String),
}

/// Exponent vector of a monomial, `x^a = x_1^{a_1} ... x_n^{a_n}`.
///
/// Ordering is graded lexicographic: first by total degree, then within a
/// degree block so that e.g. in two variables `x1^2 < x1*x2 < x2^2`. This
/// order fixes the row/column layout of every moment matrix in the crate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// Unit vector `e_i`, i.e. the monomial `x_i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    /// Total degree `|a|`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.n(), other.n());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `true` if every exponent is even.
    pub fn is_even(&self) -> bool {
        self.0.iter().all(|e| e % 2 == 0)
    }

    /// Monomial value `u^a`.
    pub fn eval<T: Real>(&self, point: &[T]) -> T {
        let mut v = T::one();
        for (e, x) in self.0.iter().zip(point) {
            if *e > 0 {
                v *= x.powi(*e as i32);
            }
        }
        v
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            // within a degree block the larger leading exponent comes first
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// An ordered, duplicate-free set of multi-indices in graded lex order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Support {
    n: usize,
    indices: Vec<MultiIndex>,
    #[serde(skip)]
    lookup: HashMap<MultiIndex, usize>,
}

impl Support {
    /// Builds a support from arbitrary indices; sorts and deduplicates.
    pub fn new(n: usize, mut indices: Vec<MultiIndex>) -> Self {
        indices.sort();
        indices.dedup();
        let lookup = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        Support { n, indices, lookup }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.indices.iter()
    }

    /// Position of a multi-index in the graded-lex ordering, if present.
    pub fn position(&self, a: &MultiIndex) -> Option<usize> {
        self.lookup.get(a).copied()
    }

    pub fn contains(&self, a: &MultiIndex) -> bool {
        self.lookup.contains_key(a)
    }

    /// `deg(A)`: the maximum total degree over the members.
    pub fn degree(&self) -> u32 {
        self.indices.iter().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn is_subset_of(&self, other: &Support) -> bool {
        self.indices.iter().all(|a| other.contains(a))
    }

    /// Union of two supports over the same number of variables.
    pub fn union(&self, other: &Support) -> Support {
        assert_eq!(self.n, other.n);
        let mut idx = self.indices.clone();
        idx.extend(other.indices.iter().cloned());
        Support::new(self.n, idx)
    }

    /// Support extended by the zero index (the constant monomial).
    pub fn with_constant(&self) -> Support {
        if self.contains(&MultiIndex::zeros(self.n)) {
            self.clone()
        } else {
            let mut idx = self.indices.clone();
            idx.push(MultiIndex::zeros(self.n));
            Support::new(self.n, idx)
        }
    }
}

fn push_compositions(n: usize, d: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() + 1 == n {
        prefix.push(d);
        out.push(MultiIndex(prefix.clone()));
        prefix.pop();
        return;
    }
    // largest leading exponent first, matching the graded-lex order
    for e in (0..=d).rev() {
        prefix.push(e);
        push_compositions(n, d - e, prefix, out);
        prefix.pop();
    }
}

/// All multi-indices with `|a| <= d` in graded lex order; `C(n+d, d)` of them.
pub fn basis(n: usize, d: u32) -> Support {
    assert!(n >= 1, "dimension must be positive");
    let mut indices = Vec::new();
    for deg in 0..=d {
        push_compositions(n, deg, &mut Vec::new(), &mut indices);
    }
    let lookup = indices
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), i))
        .collect();
    Support { n, indices, lookup }
}

/// All multi-indices with `|a| = d` in graded lex order; `C(n+d-1, d)` of them.
pub fn homogeneous_basis(n: usize, d: u32) -> Support {
    assert!(n >= 1, "dimension must be positive");
    let mut indices = Vec::new();
    push_compositions(n, d, &mut Vec::new(), &mut indices);
    let lookup = indices
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), i))
        .collect();
    Support { n, indices, lookup }
}

/// A sparse polynomial with real coefficients; only nonzero terms are stored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Poly<T: Real> {
    n: usize,
    terms: BTreeMap<MultiIndex, T>,
}

impl<T: Real> Poly<T> {
    pub fn zero(n: usize) -> Self {
        Poly { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: T) -> Self {
        let mut p = Poly::zero(n);
        p.add_term(MultiIndex::zeros(n), c);
        p
    }

    /// The variable `x_i` (zero-based).
    pub fn var(n: usize, i: usize) -> Self {
        let mut p = Poly::zero(n);
        p.add_term(MultiIndex::unit(n, i), T::one());
        p
    }

    pub fn monomial(a: MultiIndex, c: T) -> Self {
        let n = a.n();
        let mut p = Poly::zero(n);
        p.add_term(a, c);
        p
    }

    pub fn from_terms(n: usize, terms: &[(Vec<u32>, T)]) -> Self {
        let mut p = Poly::zero(n);
        for (e, c) in terms {
            assert_eq!(e.len(), n, "exponent vector length mismatch");
            p.add_term(MultiIndex::new(e.clone()), *c);
        }
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn coeff(&self, a: &MultiIndex) -> T {
        self.terms.get(a).copied().unwrap_or_else(T::zero)
    }

    /// Iterates terms in graded lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &T)> {
        self.terms.iter()
    }

    /// Adds `c * x^a`, dropping the term if the result cancels to zero.
    pub fn add_term(&mut self, a: MultiIndex, c: T) {
        assert_eq!(a.n(), self.n, "exponent vector length mismatch");
        let entry = self.terms.entry(a.clone()).or_insert_with(T::zero);
        *entry += c;
        if *entry == T::zero() {
            self.terms.remove(&a);
        }
    }

    pub fn add(&self, other: &Poly<T>) -> Poly<T> {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(a.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Poly<T>) -> Poly<T> {
        self.add(&other.scale(-T::one()))
    }

    pub fn scale(&self, c: T) -> Poly<T> {
        if c == T::zero() {
            return Poly::zero(self.n);
        }
        Poly {
            n: self.n,
            terms: self.terms.iter().map(|(a, v)| (a.clone(), *v * c)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly<T>) -> Poly<T> {
        assert_eq!(self.n, other.n);
        let mut out = Poly::zero(self.n);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_term(a.add(b), *ca * *cb);
            }
        }
        out
    }

    /// Multiplies by the monomial `x^a`.
    pub fn shift(&self, a: &MultiIndex) -> Poly<T> {
        Poly {
            n: self.n,
            terms: self.terms.iter().map(|(b, c)| (b.add(a), *c)).collect(),
        }
    }

    /// Value at a point by direct monomial evaluation.
    pub fn eval(&self, point: &[T]) -> Result<T, AlgebraError> {
        if point.len() != self.n {
            return Err(AlgebraError::DimensionMismatch { expected: self.n, got: point.len() });
        }
        Ok(self.terms.iter().map(|(a, c)| *c * a.eval(point)).sum())
    }

    /// The support set of the stored (nonzero) terms.
    pub fn support(&self) -> Support {
        Support::new(self.n, self.terms.keys().cloned().collect())
    }

    /// 2-norm of the coefficient vector. A utility only; no algorithm in this
    /// crate is anchored to it.
    pub fn norm2(&self) -> T {
        self.terms.values().map(|c| *c * *c).sum::<T>().sqrt()
    }

    /// Largest coefficient magnitude.
    pub fn norm_inf(&self) -> T {
        self.terms
            .values()
            .fold(T::zero(), |m, c| if c.abs() > m { c.abs() } else { m })
    }
}

/// An A-truncated moment sequence: one real value per support index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tms<T: Real> {
    support: Support,
    values: Vec<T>,
}

impl<T: Real> Tms<T> {
    pub fn new(support: Support, values: Vec<T>) -> Self {
        assert_eq!(support.len(), values.len(), "values must match the support");
        Tms { support, values }
    }

    pub fn zeros(support: Support) -> Self {
        let values = vec![T::zero(); support.len()];
        Tms { support, values }
    }

    pub fn n(&self) -> usize {
        self.support.n()
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn get(&self, a: &MultiIndex) -> Option<T> {
        self.support.position(a).map(|i| self.values[i])
    }

    pub fn set(&mut self, a: &MultiIndex, v: T) -> Result<(), AlgebraError> {
        match self.support.position(a) {
            Some(i) => {
                self.values[i] = v;
                Ok(())
            }
            None => Err(AlgebraError::UnsupportedMonomial(a.to_string())),
        }
    }

    pub fn norm_inf(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }

    /// The subvector indexed by `a_set`, which must be contained in the support.
    pub fn restrict(&self, a_set: &Support) -> Result<Tms<T>, AlgebraError> {
        let mut values = Vec::with_capacity(a_set.len());
        for a in a_set.iter() {
            match self.support.position(a) {
                Some(i) => values.push(self.values[i]),
                None => return Err(AlgebraError::UnsupportedMonomial(a.to_string())),
            }
        }
        Ok(Tms { support: a_set.clone(), values })
    }

    /// Linear combination `a*self + b*other`; supports must agree.
    pub fn lin_comb(&self, a: T, other: &Tms<T>, b: T) -> Tms<T> {
        assert_eq!(self.support, other.support);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * *x + b * *y)
            .collect();
        Tms { support: self.support.clone(), values }
    }
}

/// Riesz pairing `<p, y> = sum_a p_a y_a`.
///
/// Defined only when every term of `p` lies in the support of `y`.
pub fn riesz_pairing<T: Real>(p: &Poly<T>, y: &Tms<T>) -> Result<T, AlgebraError> {
    let mut acc = T::zero();
    for (a, c) in p.terms() {
        match y.get(a) {
            Some(v) => acc += *c * v,
            None => return Err(AlgebraError::UnsupportedMonomial(a.to_string())),
        }
    }
    Ok(acc)
}

/// A finitely atomic measure `sum_i w_i * delta_{u_i}` with positive weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicMeasure<T: Real> {
    n: usize,
    atoms: Vec<Vec<T>>,
    weights: Vec<T>,
}

impl<T: Real> AtomicMeasure<T> {
    /// Builds a measure, merging atoms closer than [`ATOM_DEDUP_TOL`]
    /// (weights add) and dropping nonpositive-weight atoms.
    pub fn new(n: usize, atoms: Vec<Vec<T>>, weights: Vec<T>) -> Self {
        assert_eq!(atoms.len(), weights.len());
        let tol = T::from_f64_c(ATOM_DEDUP_TOL);
        let mut out_atoms: Vec<Vec<T>> = Vec::new();
        let mut out_weights: Vec<T> = Vec::new();
        for (u, w) in atoms.into_iter().zip(weights) {
            assert_eq!(u.len(), n, "atom dimension mismatch");
            if w <= T::zero() {
                continue;
            }
            let mut merged = false;
            for (v, wv) in out_atoms.iter().zip(out_weights.iter_mut()) {
                let d2: T = u.iter().zip(v).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
                if d2.sqrt() <= tol {
                    *wv += w;
                    merged = true;
                    break;
                }
            }
            if !merged {
                out_atoms.push(u);
                out_weights.push(w);
            }
        }
        AtomicMeasure { n, atoms: out_atoms, weights: out_weights }
    }

    /// The zero measure (no atoms).
    pub fn empty(n: usize) -> Self {
        AtomicMeasure { n, atoms: Vec::new(), weights: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[Vec<T>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn total_mass(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Scales all weights by `c > 0`.
    pub fn scale(&self, c: T) -> AtomicMeasure<T> {
        AtomicMeasure {
            n: self.n,
            atoms: self.atoms.clone(),
            weights: self.weights.iter().map(|w| *w * c).collect(),
        }
    }

    /// The moment vector `y_a = sum_i w_i u_i^a` over the given support.
    pub fn moments(&self, a_set: &Support) -> Result<Tms<T>, AlgebraError> {
        if a_set.n() != self.n {
            return Err(AlgebraError::DimensionMismatch { expected: self.n, got: a_set.n() });
        }
        let mut values = vec![T::zero(); a_set.len()];
        for (u, w) in self.atoms.iter().zip(&self.weights) {
            for (i, alpha) in a_set.iter().enumerate() {
                values[i] += *w * alpha.eval(u);
            }
        }
        Ok(Tms::new(a_set.clone(), values))
    }
}

/// Moments of an atomic measure over a support; see [`AtomicMeasure::moments`].
pub fn tms_from_atoms<T: Real>(
    mu: &AtomicMeasure<T>,
    a_set: &Support,
) -> Result<Tms<T>, AlgebraError> {
    mu.moments(a_set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn basis_graded_lex_order_and_count() {
        let b = basis(2, 2);
        let want: Vec<MultiIndex> = [
            [0u32, 0],
            [1, 0],
            [0, 1],
            [2, 0],
            [1, 1],
            [0, 2],
        ]
        .iter()
        .map(|e| mi(e))
        .collect();
        assert_eq!(b.indices(), &want[..]);
        assert_eq!(basis(1, 3).len(), 4);
        assert_eq!(basis(3, 6).len(), 84);
    }

    #[test]
    fn homogeneous_basis_counts() {
        assert_eq!(homogeneous_basis(3, 6).len(), 28);
        let h22 = homogeneous_basis(2, 2);
        let want: Vec<MultiIndex> = [[2u32, 0], [1, 1], [0, 2]].iter().map(|e| mi(e)).collect();
        assert_eq!(h22.indices(), &want[..]);
        assert_eq!(homogeneous_basis(5, 2).len(), 15);
    }

    #[test]
    fn homogeneous_blocks_are_contiguous_in_basis() {
        let b = basis(3, 4);
        for k in 0..=4u32 {
            let h = homogeneous_basis(3, k);
            let start = b.position(&h.indices()[0]).unwrap();
            for (j, a) in h.iter().enumerate() {
                assert_eq!(b.position(a), Some(start + j));
            }
        }
    }

    #[test]
    fn riesz_pairing_examples() {
        // p = x1*x2 against y with y_(1,1) = 3
        let b = basis(2, 2);
        let mut y = Tms::<f64>::zeros(b);
        y.set(&mi(&[1, 1]), 3.0).unwrap();
        let p = Poly::from_terms(2, &[(vec![1, 1], 1.0)]);
        assert_eq!(riesz_pairing(&p, &y).unwrap(), 3.0);

        // zero polynomial pairs to zero
        let z = Poly::<f64>::zero(2);
        assert_eq!(riesz_pairing(&z, &y).unwrap(), 0.0);

        // term outside the support is an error
        let q = Poly::from_terms(2, &[(vec![2, 1], 1.0)]);
        assert!(matches!(
            riesz_pairing(&q, &y),
            Err(AlgebraError::UnsupportedMonomial(_))
        ));
    }

    #[test]
    fn riesz_pairing_sphere_single_atom() {
        // a1 = x1^2 x2^4 + x2^2 x3^4 + x3^2 x1^4 paired with the moments of
        // 9*delta_u, u = (1,1,1)/sqrt(3): direct evaluation gives
        // 9 * 3 * (1/sqrt(3))^6 = 1.
        let s = 1.0 / 3f64.sqrt();
        let mu = AtomicMeasure::new(3, vec![vec![s, s, s]], vec![9.0]);
        let y = mu.moments(&homogeneous_basis(3, 6)).unwrap();
        let a1 = Poly::from_terms(
            3,
            &[
                (vec![2, 4, 0], 1.0),
                (vec![0, 2, 4], 1.0),
                (vec![4, 0, 2], 1.0),
            ],
        );
        assert!((riesz_pairing(&a1, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poly_eval_examples() {
        let circle = Poly::from_terms(
            2,
            &[(vec![2, 0], 1.0), (vec![0, 2], 1.0), (vec![0, 0], -1.0)],
        );
        assert_eq!(circle.eval(&[1.0, 0.0]).unwrap(), 0.0);

        // Motzkin form vanishes at (1,1,1)
        let motzkin = Poly::from_terms(
            3,
            &[
                (vec![4, 2, 0], 1.0),
                (vec![2, 4, 0], 1.0),
                (vec![2, 2, 2], -3.0),
                (vec![0, 0, 6], 1.0),
            ],
        );
        assert_eq!(motzkin.eval(&[1.0, 1.0, 1.0]).unwrap(), 0.0);

        let xy = Poly::from_terms(2, &[(vec![1, 1], 1.0)]);
        assert_eq!(xy.eval(&[2.0, 3.0]).unwrap(), 6.0);
        assert!(xy.eval(&[1.0]).is_err());
    }

    #[test]
    fn tms_from_atoms_examples() {
        // point mass at the origin
        let mu = AtomicMeasure::new(2, vec![vec![0.0, 0.0]], vec![1.0]);
        let y = mu.moments(&basis(2, 2)).unwrap();
        assert_eq!(y.values(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

        // two-atom measure from the cube feasibility example
        let mu = AtomicMeasure::<f64>::new(
            3,
            vec![vec![0.0, 1.0, -1.0], vec![1.0, 1.0, 1.0]],
            vec![0.5, 1.0 / 6.0],
        );
        let y = mu.moments(&basis(3, 6)).unwrap();
        let a1 = Poly::from_terms(
            3,
            &[(vec![1, 1, 0], 1.0), (vec![0, 1, 1], 1.0), (vec![1, 0, 1], 1.0)],
        );
        let a2 = Poly::from_terms(
            3,
            &[(vec![2, 2, 0], 1.0), (vec![0, 2, 2], 1.0), (vec![2, 0, 2], 1.0)],
        );
        let a3 = Poly::from_terms(
            3,
            &[(vec![3, 2, 0], 1.0), (vec![0, 3, 2], 1.0), (vec![2, 0, 3], 1.0)],
        );
        assert!((riesz_pairing(&a1, &y).unwrap() - 0.0).abs() < 1e-12);
        assert!((riesz_pairing(&a2, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((riesz_pairing(&a3, &y).unwrap() - 1.0).abs() < 1e-12);

        // four-atom sphere measure: pairings from the sphere optimization example
        let s = 1.0 / 3f64.sqrt();
        let w = 27.0 / 4.0;
        let mu = AtomicMeasure::new(
            3,
            vec![
                vec![s, s, s],
                vec![-s, s, s],
                vec![s, -s, s],
                vec![s, s, -s],
            ],
            vec![w, w, w, w],
        );
        let y = mu.moments(&homogeneous_basis(3, 6)).unwrap();
        let m222 = Poly::from_terms(3, &[(vec![2, 2, 2], 1.0)]);
        let a422 = Poly::from_terms(
            3,
            &[(vec![4, 2, 0], 1.0), (vec![0, 4, 2], 1.0), (vec![2, 0, 4], 1.0)],
        );
        assert!((riesz_pairing(&m222, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((riesz_pairing(&a422, &y).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn restrict_examples() {
        let b4 = basis(2, 4);
        let mu = AtomicMeasure::<f64>::new(2, vec![vec![0.3, -0.7]], vec![2.0]);
        let z = mu.moments(&b4).unwrap();

        // identity restriction
        assert_eq!(z.restrict(&b4).unwrap(), z);

        // restriction to a lower-degree basis picks the leading block
        let b2 = basis(2, 2);
        let r = z.restrict(&b2).unwrap();
        assert_eq!(r.values(), &z.values()[..6]);

        // restrict/moments commute
        let h = homogeneous_basis(2, 4);
        let lhs = z.restrict(&h).unwrap();
        let rhs = mu.moments(&h).unwrap();
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert!((a - b).abs() < 1e-14);
        }

        // restriction outside the support errors
        assert!(z.restrict(&basis(2, 5)).is_err());
    }

    #[test]
    fn atom_dedup_merges_weights() {
        let mu = AtomicMeasure::<f64>::new(
            1,
            vec![vec![0.5], vec![0.5 + 1e-12], vec![1.0]],
            vec![1.0, 2.0, 3.0],
        );
        assert_eq!(mu.num_atoms(), 2);
        assert!((mu.weights()[0] - 3.0).abs() < 1e-14);
    }
}
