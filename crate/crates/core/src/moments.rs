//! Moment matrices `M_k(z)` and localizing matrices `L_q^(k)(z)`, both as
//! numeric matrices read off a concrete moment sequence and as symbolic
//! linear operators on moment entries for SDP constraint generation.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{basis, AlgebraError, MultiIndex, Poly, Support, Tms};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum MomentError {
    #[error("relaxation order too small: need 2k >= {needed}, got 2k = {got}")]
    OrderTooSmall { needed: u32, got: u32 },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// A compact semialgebraic set `K = {x : h(x) = 0, g(x) >= 0}`.
///
/// `ball_radius`, when set, is a radius `rho` with `K` contained in the
/// closed ball `B(0, rho)`; membership routines need it to enforce
/// compactness of their relaxations.
#[derive(Debug, Clone, Serialize)]
pub struct SemialgSet<T: Real> {
    n: usize,
    h: Vec<Poly<T>>,
    g: Vec<Poly<T>>,
    ball_radius: Option<T>,
}

impl<T: Real> SemialgSet<T> {
    pub fn new(n: usize, h: Vec<Poly<T>>, g: Vec<Poly<T>>) -> Self {
        for p in h.iter().chain(&g) {
            assert_eq!(p.n(), n, "defining polynomial has wrong dimension");
        }
        SemialgSet { n, h, g, ball_radius: None }
    }

    pub fn with_ball_radius(mut self, rho: T) -> Self {
        assert!(rho > T::zero(), "ball radius must be positive");
        self.ball_radius = Some(rho);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn equalities(&self) -> &[Poly<T>] {
        &self.h
    }

    pub fn inequalities(&self) -> &[Poly<T>] {
        &self.g
    }

    pub fn ball_radius(&self) -> Option<T> {
        self.ball_radius
    }

    /// Adds an inequality constraint `q(x) >= 0`.
    pub fn with_inequality(mut self, q: Poly<T>) -> Self {
        assert_eq!(q.n(), self.n);
        self.g.push(q);
        self
    }

    /// `d_K = max{1, ceil(deg h_i / 2), ceil(deg g_j / 2)}`.
    pub fn d_k(&self) -> u32 {
        self.h
            .iter()
            .chain(&self.g)
            .map(|p| p.degree().div_ceil(2))
            .chain(std::iter::once(1))
            .max()
            .unwrap()
    }

    /// The set with `rho^2 - |x|^2 >= 0` appended; used by membership checks.
    /// Returns `None` when no ball radius is known.
    pub fn with_ball_constraint(&self) -> Option<SemialgSet<T>> {
        let rho = self.ball_radius?;
        let mut ball = Poly::constant(self.n, rho * rho);
        for i in 0..self.n {
            ball.add_term(MultiIndex::unit(self.n, i).add(&MultiIndex::unit(self.n, i)), -T::one());
        }
        let mut out = self.clone();
        out.g.push(ball);
        Some(out)
    }

    /// Pointwise check that `u` satisfies the description up to `tol`.
    pub fn contains_point(&self, u: &[T], tol: T) -> bool {
        self.h.iter().all(|p| p.eval(u).map(|v| v.abs() <= tol).unwrap_or(false))
            && self.g.iter().all(|p| p.eval(u).map(|v| v >= -tol).unwrap_or(false))
    }
}

/// Row/column support of the order-`k` localizing matrix of `q`:
/// all indices with `|a| <= k - ceil(deg q / 2)`.
fn localizing_row_support<T: Real>(n: usize, q: &Poly<T>, k: u32) -> Result<Support, MomentError> {
    let dq = q.degree();
    if 2 * k < dq {
        return Err(MomentError::OrderTooSmall { needed: dq, got: 2 * k });
    }
    Ok(basis(n, k - dq.div_ceil(2)))
}

/// The localizing matrix as a symbolic linear operator on moment entries.
///
/// Cell `(a, b)` of the matrix it produces is `sum_g q_g * z_{g+a+b}`;
/// the `entry_map` stores, per upper-triangle cell, the merged list of
/// `(target index, coefficient)` pairs. Entries with the same target are
/// combined at build time.
#[derive(Debug, Clone)]
pub struct LocalizingOperator<T: Real> {
    q: Poly<T>,
    k: u32,
    row_support: Support,
    // upper triangle, cell (r, c) with r <= c at position c*(c+1)/2 + r
    entry_map: Vec<Vec<(MultiIndex, T)>>,
}

impl<T: Real> LocalizingOperator<T> {
    pub fn q(&self) -> &Poly<T> {
        &self.q
    }

    pub fn order(&self) -> u32 {
        self.k
    }

    pub fn row_support(&self) -> &Support {
        &self.row_support
    }

    pub fn size(&self) -> usize {
        self.row_support.len()
    }

    fn cell_index(r: usize, c: usize) -> usize {
        debug_assert!(r <= c);
        c * (c + 1) / 2 + r
    }

    /// The merged `(target, coefficient)` list of cell `(r, c)`.
    pub fn cell(&self, r: usize, c: usize) -> &[(MultiIndex, T)] {
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        &self.entry_map[Self::cell_index(r, c)]
    }

    /// Applies the operator to a concrete moment sequence.
    pub fn apply(&self, z: &Tms<T>) -> Result<DMatrix<T>, MomentError> {
        let s = self.size();
        let mut m = DMatrix::zeros(s, s);
        for c in 0..s {
            for r in 0..=c {
                let mut v = T::zero();
                for (target, coeff) in self.cell(r, c) {
                    match z.get(target) {
                        Some(zv) => v += *coeff * zv,
                        None => {
                            return Err(AlgebraError::UnsupportedMonomial(target.to_string()).into())
                        }
                    }
                }
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
        Ok(m)
    }
}

/// Builds the symbolic order-`k` localizing operator of `q`.
///
/// `ambient` must contain every target index `g+a+b`; passing
/// `basis(n, 2k)` is always sufficient.
pub fn localizing_operator<T: Real>(
    q: &Poly<T>,
    k: u32,
    ambient: &Support,
) -> Result<LocalizingOperator<T>, MomentError> {
    let n = q.n();
    let rows = localizing_row_support(n, q, k)?;
    let s = rows.len();
    let mut entry_map = Vec::with_capacity(s * (s + 1) / 2);
    for c in 0..s {
        for r in 0..=c {
            let ab = rows.indices()[r].add(&rows.indices()[c]);
            let mut cell: Vec<(MultiIndex, T)> = Vec::with_capacity(q.num_terms());
            for (gamma, coeff) in q.terms() {
                let target = gamma.add(&ab);
                debug_assert!(
                    ambient.contains(&target),
                    "ambient support must cover localizing targets"
                );
                match cell.iter_mut().find(|(t, _)| *t == target) {
                    Some((_, c0)) => *c0 += *coeff,
                    None => cell.push((target, *coeff)),
                }
            }
            cell.retain(|(_, c0)| *c0 != T::zero());
            entry_map.push(cell);
        }
    }
    Ok(LocalizingOperator { q: q.clone(), k, row_support: rows, entry_map })
}

/// The order-`k` localizing matrix of `q` generated by `z`:
/// cell `(a, b)` equals `sum_g q_g z_{g+a+b}`.
pub fn localizing_matrix<T: Real>(
    q: &Poly<T>,
    k: u32,
    z: &Tms<T>,
) -> Result<DMatrix<T>, MomentError> {
    let n = q.n();
    let rows = localizing_row_support(n, q, k)?;
    let s = rows.len();
    let mut m = DMatrix::zeros(s, s);
    for c in 0..s {
        for r in 0..=c {
            let ab = rows.indices()[r].add(&rows.indices()[c]);
            let mut v = T::zero();
            for (gamma, coeff) in q.terms() {
                let target = gamma.add(&ab);
                match z.get(&target) {
                    Some(zv) => v += *coeff * zv,
                    None => {
                        return Err(AlgebraError::UnsupportedMonomial(target.to_string()).into())
                    }
                }
            }
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
    Ok(m)
}

/// The order-`k` moment matrix `M_k(z)`, i.e. the localizing matrix of `q = 1`.
pub fn moment_matrix<T: Real>(k: u32, z: &Tms<T>) -> Result<DMatrix<T>, MomentError> {
    let one = Poly::constant(z.n(), T::one());
    localizing_matrix(&one, k, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AtomicMeasure;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn poly(n: usize, terms: &[(&[u32], f64)]) -> Poly<f64> {
        Poly::from_terms(
            n,
            &terms.iter().map(|(e, c)| (e.to_vec(), *c)).collect::<Vec<_>>(),
        )
    }

    #[test]
    fn moment_matrix_layout_n2_k1() {
        // M_1(z) = [[z00, z10, z01], [z10, z20, z11], [z01, z11, z02]]
        let b = basis(2, 2);
        let values: Vec<f64> = (1..=6).map(|v| v as f64).collect();
        let z = Tms::new(b, values);
        let m = moment_matrix(1, &z).unwrap();
        let want = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0],
        );
        assert_eq!(m, want);
    }

    #[test]
    fn moment_matrix_point_mass_and_zero() {
        let mu = AtomicMeasure::<f64>::new(2, vec![vec![1.0, 1.0]], vec![1.0]);
        let z = mu.moments(&basis(2, 2)).unwrap();
        let m = moment_matrix(1, &z).unwrap();
        assert!(m.iter().all(|v| (v - 1.0).abs() < 1e-14));

        let z0 = Tms::<f64>::zeros(basis(2, 2));
        assert!(moment_matrix(1, &z0).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn moment_matrix_rank_matches_atom_count() {
        let mut rng = StdRng::seed_from_u64(7);
        let atoms: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mu = AtomicMeasure::new(2, atoms, vec![1.0, 1.5]);
        let z = mu.moments(&basis(2, 4)).unwrap();
        let m = moment_matrix(2, &z).unwrap();
        let svd = m.svd(false, false);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|s| **s > 1e-9 * smax).count();
        assert_eq!(rank, 2);
    }

    #[test]
    fn localizing_matrix_ball_at_origin() {
        // q = 1 - x1^2 - x2^2 at the moments of delta_(0,0): the 1x1 matrix [1]
        let q = poly(2, &[(&[0, 0], 1.0), (&[2, 0], -1.0), (&[0, 2], -1.0)]);
        let mu = AtomicMeasure::new(2, vec![vec![0.0, 0.0]], vec![1.0]);
        let z = mu.moments(&basis(2, 2)).unwrap();
        let m = localizing_matrix(&q, 1, &z).unwrap();
        assert_eq!(m.nrows(), 1);
        assert!((m[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn localizing_matrix_circle_equality_vanishes() {
        // q = x1^2 + x2^2 - 1 annihilates the moments of measures on the circle
        let q = poly(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0), (&[0, 0], -1.0)]);
        let mu = AtomicMeasure::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5]);
        let z = mu.moments(&basis(2, 4)).unwrap();
        let m = localizing_matrix(&q, 2, &z).unwrap();
        assert!(m.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn order_too_small_rejected() {
        let q = poly(1, &[(&[3], 1.0)]);
        let z = Tms::<f64>::zeros(basis(1, 2));
        assert!(matches!(
            localizing_matrix(&q, 1, &z),
            Err(MomentError::OrderTooSmall { .. })
        ));
    }

    #[test]
    fn operator_matches_direct_summation() {
        let mut rng = StdRng::seed_from_u64(11);
        let b4 = basis(2, 4);
        for _ in 0..20 {
            // random quadratic q and random z
            let q = Poly::from_terms(
                2,
                &basis(2, 2)
                    .iter()
                    .map(|a| (a.0.clone(), rng.gen_range(-1.0..1.0)))
                    .collect::<Vec<_>>(),
            );
            let z = Tms::new(
                b4.clone(),
                (0..b4.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            );
            let op = localizing_operator(&q, 2, &b4).unwrap();
            let direct = localizing_matrix(&q, 2, &z).unwrap();
            let applied = op.apply(&z).unwrap();
            assert!((&direct - &applied).amax() < 1e-13);
        }
    }

    #[test]
    fn operator_shape_univariate() {
        // q = 1, k = 1, n = 1: 2x2 cells targeting z0, z1, z1, z2
        let one = Poly::constant(1, 1.0);
        let op = localizing_operator(&one, 1, &basis(1, 2)).unwrap();
        assert_eq!(op.size(), 2);
        assert_eq!(op.cell(0, 0), &[(MultiIndex::new(vec![0]), 1.0)]);
        assert_eq!(op.cell(0, 1), &[(MultiIndex::new(vec![1]), 1.0)]);
        assert_eq!(op.cell(1, 1), &[(MultiIndex::new(vec![2]), 1.0)]);
    }

    #[test]
    fn operator_simplex_equality_vanishes() {
        // h = x1 + x2 - 1 applied to moments of delta_(0.3, 0.7)
        let h = poly(2, &[(&[1, 0], 1.0), (&[0, 1], 1.0), (&[0, 0], -1.0)]);
        let mu = AtomicMeasure::new(2, vec![vec![0.3, 0.7]], vec![1.0]);
        let z = mu.moments(&basis(2, 2)).unwrap();
        let op = localizing_operator(&h, 1, &basis(2, 2)).unwrap();
        let m = op.apply(&z).unwrap();
        assert!(m.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn d_k_examples() {
        let circle = SemialgSet::new(
            2,
            vec![poly(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0), (&[0, 0], -1.0)])],
            vec![],
        );
        assert_eq!(circle.d_k(), 1);

        let simplex5 = SemialgSet::new(
            5,
            vec![Poly::from_terms(
                5,
                &(0..5)
                    .map(|i| {
                        let mut e = vec![0u32; 5];
                        e[i] = 1;
                        (e, 1.0)
                    })
                    .chain(std::iter::once((vec![0; 5], -1.0)))
                    .collect::<Vec<_>>(),
            )],
            (0..5).map(|i| Poly::var(5, i)).collect(),
        );
        assert_eq!(simplex5.d_k(), 1);

        let cube = SemialgSet::new(
            3,
            vec![],
            (0..3)
                .map(|i| {
                    let mut e = vec![0u32; 3];
                    e[i] = 2;
                    poly(3, &[(&[0, 0, 0], 1.0), (&e, -1.0)])
                })
                .collect(),
        );
        assert_eq!(cube.d_k(), 1);
    }

    #[test]
    fn quadratic_form_identity() {
        // p^T L_q^(k)(z) p = <q p^2, z> for deg(q p^2) <= 2k
        let mut rng = StdRng::seed_from_u64(23);
        let b6 = basis(2, 6);
        for _ in 0..25 {
            let q = Poly::from_terms(
                2,
                &basis(2, 2)
                    .iter()
                    .map(|a| (a.0.clone(), rng.gen_range(-1.0..1.0)))
                    .collect::<Vec<_>>(),
            );
            let z = Tms::new(
                b6.clone(),
                (0..b6.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            );
            let k = 3u32;
            let m = localizing_matrix(&q, k, &z).unwrap();
            let rows = m.nrows();
            let row_support = basis(2, k - q.degree().div_ceil(2));
            assert_eq!(row_support.len(), rows);
            // random p supported on the rows
            let pcoef: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = Poly::from_terms(
                2,
                &row_support
                    .iter()
                    .zip(&pcoef)
                    .map(|(a, c)| (a.0.clone(), *c))
                    .collect::<Vec<_>>(),
            );
            let pv = nalgebra::DVector::from_vec(pcoef);
            let quad = (pv.transpose() * &m * &pv)[(0, 0)];
            let qp2 = q.mul(&p).mul(&p);
            let pair = crate::algebra::riesz_pairing(&qp2, &z).unwrap();
            let scale = 1.0 + quad.abs().max(pair.abs());
            assert!(
                (quad - pair).abs() <= 1e-10 * scale,
                "identity violated: {quad} vs {pair}"
            );
        }
    }
}
