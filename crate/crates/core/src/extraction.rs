//! Numeric rank, the flatness test, and recovery of the finitely atomic
//! representing measure of a flat truncated moment sequence.
//!
//! A moment vector `z` on `basis(n, 2k)` is *flat* when its localizing
//! matrices vanish on the equalities, are PSD on the inequalities, and the
//! moment-matrix rank has stabilized: `rank M_{k-d_K}(z) = rank M_k(z)`.
//! A flat vector admits a unique representing measure with `rank M_k(z)`
//! atoms, recovered here by simultaneous triangularization of the
//! multiplication (shift) operators read off a column basis of the moment
//! matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{basis, AlgebraError, AtomicMeasure, MultiIndex, Tms};
use crate::moments::{localizing_matrix, moment_matrix, MomentError, SemialgSet};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("truncation order {got} below d_K = {d_k}")]
    OrderTooSmall { got: u32, d_k: u32 },
    #[error("moment sequence must cover basis(n, 2k); got degree {0}")]
    BadSupport(u32),
    #[error("extraction failed: {0}")]
    ExtractionFailure(String),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Count of singular values at least `tol * max(sigma_max, 1)`.
pub fn numeric_rank<T: Real>(m: &DMatrix<T>, tol: T) -> usize {
    assert!(tol > T::zero());
    if m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(T::zero(), |a, b| a.max(*b));
    let thresh = tol * smax.max(T::one());
    sv.iter().filter(|s| **s >= thresh).count()
}

/// Rank plus a borderline flag: borderline when some singular value falls
/// within a factor of ten of the rank threshold.
fn rank_with_borderline<T: Real>(m: &DMatrix<T>, tol: T) -> (usize, bool) {
    if m.nrows() == 0 {
        return (0, false);
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(T::zero(), |a, b| a.max(*b));
    let thresh = tol * smax.max(T::one());
    let ten = T::from_f64_c(10.0);
    let rank = sv.iter().filter(|s| **s >= thresh).count();
    let borderline = sv.iter().any(|s| *s > thresh / ten && *s < thresh * ten);
    (rank, borderline)
}

/// Rank history of the nested moment matrices of one sequence.
#[derive(Debug, Clone, Serialize)]
pub struct RankProfile<T: Real> {
    /// Top truncation order k (the sequence covers degree 2k).
    pub order: u32,
    /// `rank M_t(z)` for `t = 0..=k`.
    pub ranks: Vec<usize>,
    pub tol: T,
    /// Set to `k` when the sequence passed the full flatness test at `k`.
    pub flat_at: Option<u32>,
    /// Rank at the top order.
    pub rank: usize,
}

impl<T: Real> RankProfile<T> {
    pub fn is_flat(&self) -> bool {
        self.flat_at.is_some()
    }
}

fn top_order<T: Real>(z: &Tms<T>) -> Result<u32, ExtractionError> {
    let deg = z.support().degree();
    if deg % 2 != 0 || z.support().len() != basis(z.n(), deg).len() {
        return Err(ExtractionError::BadSupport(deg));
    }
    Ok(deg / 2)
}

/// Full flatness test of `z` on `basis(n, 2k)` against `K`: localizing
/// matrices vanish on equalities and are PSD on inequalities (within
/// `tol * (1 + |z|_inf)`), and `rank M_{k-d_K} = rank M_k` away from the
/// rank-tolerance borderline.
pub fn is_flat<T: Real>(
    z: &Tms<T>,
    set: &SemialgSet<T>,
    tol: T,
) -> Result<RankProfile<T>, ExtractionError> {
    let k = top_order(z)?;
    let d_k = set.d_k();
    if k < d_k {
        return Err(ExtractionError::OrderTooSmall { got: k, d_k });
    }
    let scale = T::one() + z.norm_inf();
    let mut conditions_ok = true;

    for h in set.equalities() {
        if h.degree() > 2 * k {
            conditions_ok = false;
            break;
        }
        let m = localizing_matrix(h, k, z)?;
        let worst = m.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        if worst > tol * scale {
            conditions_ok = false;
            break;
        }
    }
    if conditions_ok {
        for g in set.inequalities() {
            if g.degree() > 2 * k {
                conditions_ok = false;
                break;
            }
            let m = localizing_matrix(g, k, z)?;
            if m.nrows() > 0 {
                let eig = m.symmetric_eigen();
                let lmin = eig.eigenvalues.iter().fold(T::zero(), |a, b| a.min(*b));
                if lmin < -tol * scale {
                    conditions_ok = false;
                    break;
                }
            }
        }
    }

    let mut ranks = Vec::with_capacity(k as usize + 1);
    let mut borderline_any = false;
    for t in 0..=k {
        let m = moment_matrix(t, z)?;
        let (r, borderline) = rank_with_borderline(&m, tol);
        if t == k || t == k - d_k {
            borderline_any |= borderline;
        }
        ranks.push(r);
    }
    // the top moment matrix must itself be PSD (multiplier 1)
    if conditions_ok {
        let m = moment_matrix(k, z)?;
        let eig = m.symmetric_eigen();
        let lmin = eig.eigenvalues.iter().fold(T::zero(), |a, b| a.min(*b));
        if lmin < -tol * scale {
            conditions_ok = false;
        }
    }

    let rank_top = ranks[k as usize];
    let rank_low = ranks[(k - d_k) as usize];
    let flat = conditions_ok && !borderline_any && rank_low == rank_top;
    Ok(RankProfile {
        order: k,
        ranks,
        tol,
        flat_at: if flat { Some(k) } else { None },
        rank: rank_top,
    })
}

/// Scans truncations `z|_{2t}` for `t` in `t_lo..=t_hi` and returns the
/// first flat one together with its profile.
pub fn find_flat_truncation<T: Real>(
    z: &Tms<T>,
    set: &SemialgSet<T>,
    t_lo: u32,
    t_hi: u32,
    tol: T,
) -> Option<(Tms<T>, RankProfile<T>)> {
    let n = z.n();
    for t in t_lo..=t_hi {
        let sub = basis(n, 2 * t);
        let zt = match z.restrict(&sub) {
            Ok(v) => v,
            Err(_) => return None,
        };
        if let Ok(profile) = is_flat(&zt, set, tol) {
            if profile.is_flat() {
                return Some((zt, profile));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy)]
pub struct ExtractOptions<T: Real> {
    /// Rank tolerance relative to the largest singular value.
    pub rank_tol: T,
    /// Relative tolerance on the moment match of the recovered measure.
    pub moment_tol: T,
    /// Pointwise tolerance for atom membership in `K`.
    pub feas_tol: T,
    /// Seed for the random shift-combination tie-break.
    pub seed: u64,
}

impl<T: Real> Default for ExtractOptions<T> {
    fn default() -> Self {
        ExtractOptions {
            rank_tol: T::from_f64_c(1e-6),
            moment_tol: T::from_f64_c(1e-6),
            feas_tol: T::from_f64_c(1e-6),
            seed: 0,
        }
    }
}

/// Lawson-Hanson nonnegative least squares: `argmin |a x - b|` with `x >= 0`.
fn nnls<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> DVector<T> {
    let n = a.ncols();
    let mut x = DVector::<T>::zeros(n);
    let mut passive: Vec<usize> = Vec::new();
    let tol = T::from_f64_c(1e-12)
        * (T::one() + a.iter().fold(T::zero(), |m, v| m.max(v.abs())))
        * (T::one() + b.iter().fold(T::zero(), |m, v| m.max(v.abs())));

    let solve_passive = |passive: &[usize]| -> DVector<T> {
        let sub = DMatrix::from_fn(a.nrows(), passive.len(), |r, c| a[(r, passive[c])]);
        let svd = sub.svd(true, true);
        svd.solve(b, T::from_f64_c(1e-12)).expect("svd solve")
    };

    for _ in 0..(4 * n.max(1)) {
        let resid = b - a * &x;
        let w = a.transpose() * resid;
        let mut best: Option<(usize, T)> = None;
        for i in 0..n {
            if passive.contains(&i) {
                continue;
            }
            if best.map(|(_, bw)| w[i] > bw).unwrap_or(w[i] > tol) {
                best = Some((i, w[i]));
            }
        }
        let Some((enter, _)) = best else { break };
        passive.push(enter);

        loop {
            let z = solve_passive(&passive);
            if z.iter().all(|v| *v > T::zero()) {
                for (ci, &i) in passive.iter().enumerate() {
                    x[i] = z[ci];
                }
                break;
            }
            // step toward z until a passive variable hits zero
            let mut alpha = T::one();
            for (ci, &i) in passive.iter().enumerate() {
                if z[ci] <= T::zero() {
                    let denom = x[i] - z[ci];
                    if denom > T::zero() {
                        alpha = alpha.min(x[i] / denom);
                    }
                }
            }
            for (ci, &i) in passive.iter().enumerate() {
                let step = alpha * (z[ci] - x[i]);
                x[i] += step;
            }
            let eps = T::from_f64_c(1e-14);
            passive.retain(|&i| {
                if x[i] <= eps {
                    x[i] = T::zero();
                    false
                } else {
                    true
                }
            });
            if passive.is_empty() {
                break;
            }
        }
    }
    x
}

/// Recovers the finitely atomic representing measure of a flat sequence.
///
/// `z` must cover `basis(n, 2k)` and be flat for `set` at the given rank
/// tolerance (callers normally locate a flat truncation first via
/// [`find_flat_truncation`]). Errors with `ExtractionFailure` when the
/// eigenvalue clustering, the weight fit, or atom feasibility degrades;
/// that signals borderline flatness and callers should raise the order.
pub fn extract_atoms<T: Real>(
    z: &Tms<T>,
    set: &SemialgSet<T>,
    opts: &ExtractOptions<T>,
) -> Result<AtomicMeasure<T>, ExtractionError> {
    let n = z.n();
    let k = top_order(z)?;
    let d_k = set.d_k();
    if k < d_k {
        return Err(ExtractionError::OrderTooSmall { got: k, d_k });
    }
    let mk = moment_matrix(k, z)?;
    let (rank, _) = rank_with_borderline(&mk, opts.rank_tol);
    if rank == 0 {
        return Ok(AtomicMeasure::empty(n));
    }

    // factor M_k = V V' with V of width rank
    let eig = mk.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap_or(std::cmp::Ordering::Equal)
    });
    let rows_all = basis(n, k);
    let nfull = rows_all.len();
    let mut v = DMatrix::<T>::zeros(nfull, rank);
    for (c, &ei) in order.iter().take(rank).enumerate() {
        let ev = eig.eigenvalues[ei].max(T::zero()).sqrt();
        for r in 0..nfull {
            v[(r, c)] = eig.eigenvectors[(r, ei)] * ev;
        }
    }

    // greedy pivoted selection of a well-conditioned row basis among the
    // rows of degree <= k - 1 (flatness guarantees they reach full rank)
    let nlow = basis(n, k - 1).len();
    let mut q: Vec<DVector<T>> = Vec::with_capacity(rank);
    let mut selected: Vec<usize> = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut best: Option<(usize, T, DVector<T>)> = None;
        for r in 0..nlow {
            if selected.contains(&r) {
                continue;
            }
            let mut resid: DVector<T> = v.row(r).transpose();
            for qv in &q {
                let proj = qv.dot(&resid);
                resid -= qv * proj;
            }
            let norm = resid.norm();
            if best.as_ref().map(|(_, bn, _)| norm > *bn).unwrap_or(true) {
                best = Some((r, norm, resid));
            }
        }
        let (r, norm, resid) = best.ok_or_else(|| {
            ExtractionError::ExtractionFailure("not enough low-degree rows".into())
        })?;
        if norm <= T::from_f64_c(1e-10) * (T::one() + v.amax()) {
            return Err(ExtractionError::ExtractionFailure(
                "rank collapse while selecting a row basis (borderline flatness)".into(),
            ));
        }
        q.push(resid / norm);
        selected.push(r);
    }

    // express every row in the selected basis: u = v * v_b^{-1}
    let vb = DMatrix::from_fn(rank, rank, |r, c| v[(selected[r], c)]);
    let lu = vb.transpose().lu();
    let mut u = DMatrix::<T>::zeros(nfull, rank);
    for r in 0..nfull {
        let rhs: DVector<T> = v.row(r).transpose();
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| ExtractionError::ExtractionFailure("singular row basis".into()))?;
        u.set_row(r, &sol.transpose());
    }

    // shift operators: column l of N_i holds the coordinates of
    // x_i * x^{beta_l} in the selected basis
    let mut shifts: Vec<DMatrix<T>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut ni = DMatrix::<T>::zeros(rank, rank);
        for (l, &bidx) in selected.iter().enumerate() {
            let beta = &rows_all.indices()[bidx];
            let shifted = beta.add(&MultiIndex::unit(n, i));
            let ridx = rows_all.position(&shifted).expect("degree <= k");
            for j in 0..rank {
                ni[(j, l)] = u[(ridx, j)];
            }
        }
        shifts.push(ni);
    }

    // random convex combination breaks eigenvalue ties
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let xi: Vec<T> = (0..n).map(|_| T::from_f64_c(rng.gen_range(0.2..1.0))).collect();
    let total: T = xi.iter().copied().sum();
    let mut comb = DMatrix::<T>::zeros(rank, rank);
    for (x, ni) in xi.iter().zip(&shifts) {
        comb += ni * (*x / total);
    }

    let schur = comb.schur();
    let (qmat, tmat) = schur.unpack();
    // a 2x2 diagonal block means complex eigenvalues: clustering failure
    let tscale = T::one() + tmat.amax();
    for i in 0..rank.saturating_sub(1) {
        if tmat[(i + 1, i)].abs() > T::from_f64_c(1e-6) * tscale {
            return Err(ExtractionError::ExtractionFailure(
                "complex eigenvalue cluster in shift combination".into(),
            ));
        }
    }

    // atoms from the joint triangularization
    let mut atoms: Vec<Vec<T>> = Vec::with_capacity(rank);
    for j in 0..rank {
        let qj = qmat.column(j);
        let mut point = Vec::with_capacity(n);
        for ni in &shifts {
            point.push((qj.transpose() * ni * qj)[(0, 0)]);
        }
        atoms.push(point);
    }

    // weights by nonnegative least squares on all covered moments
    let rows = z.support().len();
    let vander =
        DMatrix::from_fn(rows, atoms.len(), |r, c| z.support().indices()[r].eval(&atoms[c]));
    let bvec = DVector::from_column_slice(z.values());
    let weights = nnls(&vander, &bvec);
    let resid = (&vander * &weights - &bvec).amax();
    let scale = T::one() + z.norm_inf();
    if resid > opts.moment_tol * scale {
        return Err(ExtractionError::ExtractionFailure(format!(
            "weight fit residual {:?} exceeds tolerance",
            resid.to_f64()
        )));
    }

    let measure = AtomicMeasure::new(n, atoms.clone(), weights.iter().copied().collect());
    for atom in measure.atoms() {
        if !set.contains_point(atom, opts.feas_tol) {
            return Err(ExtractionError::ExtractionFailure(
                "extracted atom violates the set description".into(),
            ));
        }
    }
    Ok(measure)
}

/// Report of checking a measure against a moment sequence and a set.
#[derive(Debug, Clone, Serialize)]
pub struct MeasureReport<T: Real> {
    pub pass: bool,
    /// `|moments(mu) - y|_inf / (1 + |y|_inf)`.
    pub moment_error: T,
    pub support_ok: bool,
    pub details: Vec<String>,
}

/// Checks that the measure reproduces `y` within `tol` (relative) and that
/// every atom lies in `K` within `tol`. Report-only.
pub fn verify_measure<T: Real>(
    mu: &AtomicMeasure<T>,
    y: &Tms<T>,
    set: &SemialgSet<T>,
    tol: T,
) -> MeasureReport<T> {
    let mut details = Vec::new();
    let moments = match mu.moments(y.support()) {
        Ok(m) => m,
        Err(e) => {
            return MeasureReport {
                pass: false,
                moment_error: T::max_value().unwrap(),
                support_ok: false,
                details: vec![format!("moment evaluation failed: {e}")],
            }
        }
    };
    let scale = T::one() + y.norm_inf();
    let mut err = T::zero();
    for (a, b) in moments.values().iter().zip(y.values()) {
        err = err.max((*a - *b).abs());
    }
    let moment_error = err / scale;
    if moment_error > tol {
        details.push(format!("moment mismatch {:?}", moment_error.to_f64()));
    }
    let mut support_ok = true;
    for atom in mu.atoms() {
        if !set.contains_point(atom, tol) {
            support_ok = false;
            details.push(format!(
                "atom outside K: {:?}",
                atom.iter().map(|v| v.to_f64()).collect::<Vec<_>>()
            ));
        }
    }
    MeasureReport { pass: moment_error <= tol && support_ok, moment_error, support_ok, details }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Poly;
    use rand::rngs::StdRng;

    fn cube(n: usize) -> SemialgSet<f64> {
        let g = (0..n)
            .map(|i| {
                let mut e = vec![0u32; n];
                e[i] = 2;
                Poly::from_terms(n, &[(vec![0; n], 1.0), (e, -1.0)])
            })
            .collect();
        SemialgSet::new(n, vec![], g).with_ball_radius((n as f64).sqrt())
    }

    #[test]
    fn numeric_rank_basics() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(numeric_rank(&id, 1e-6), 3);
        let zero = DMatrix::<f64>::zeros(4, 4);
        assert_eq!(numeric_rank(&zero, 1e-6), 0);

        // rank-2 moment matrix of two random atoms
        let mut rng = StdRng::seed_from_u64(3);
        let atoms: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mu = AtomicMeasure::new(2, atoms, vec![1.0, 0.7]);
        let z = mu.moments(&basis(2, 4)).unwrap();
        let m = moment_matrix(2, &z).unwrap();
        assert_eq!(numeric_rank(&m, 1e-6), 2);
    }

    #[test]
    fn flatness_of_cube_example_measure() {
        // z from the two-atom measure used in the cube feasibility example
        let mu = AtomicMeasure::<f64>::new(
            3,
            vec![vec![0.0, 1.0, -1.0], vec![1.0, 1.0, 1.0]],
            vec![0.5, 1.0 / 6.0],
        );
        let z = mu.moments(&basis(3, 6)).unwrap();
        let profile = is_flat(&z, &cube(3), 1e-6).unwrap();
        assert!(profile.is_flat());
        assert_eq!(profile.rank, 2);
    }

    #[test]
    fn zero_sequence_is_flat_with_rank_zero() {
        let z = Tms::<f64>::zeros(basis(2, 4));
        let profile = is_flat(&z, &cube(2), 1e-6).unwrap();
        assert!(profile.is_flat());
        assert_eq!(profile.rank, 0);
        let mu = extract_atoms(&z, &cube(2), &ExtractOptions::default()).unwrap();
        assert_eq!(mu.num_atoms(), 0);
    }

    #[test]
    fn dense_circle_cloud_is_not_flat() {
        // 50 atoms on the unit circle, truncated at degree 4 with d_K = 1:
        // rank M_1 = 3 < rank M_2 = 5
        let circle = SemialgSet::new(
            2,
            vec![Poly::from_terms(
                2,
                &[(vec![2, 0], 1.0), (vec![0, 2], 1.0), (vec![0, 0], -1.0)],
            )],
            vec![],
        )
        .with_ball_radius(1.0);
        let atoms: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * (i as f64) / 50.0 + 0.1;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let mu = AtomicMeasure::new(2, atoms, vec![0.02; 50]);
        let z = mu.moments(&basis(2, 4)).unwrap();
        let profile = is_flat(&z, &circle, 1e-6).unwrap();
        assert!(!profile.is_flat());
        assert_eq!(profile.ranks[1], 3);
        assert_eq!(profile.ranks[2], 5);
    }

    #[test]
    fn extract_single_atom_univariate() {
        let set = SemialgSet::new(1, vec![], vec![]).with_ball_radius(2.0);
        let mu = AtomicMeasure::<f64>::new(1, vec![vec![0.5]], vec![1.0]);
        let z = mu.moments(&basis(1, 4)).unwrap();
        let got = extract_atoms(&z, &set, &ExtractOptions::default()).unwrap();
        assert_eq!(got.num_atoms(), 1);
        assert!((got.atoms()[0][0] - 0.5).abs() < 1e-9);
        assert!((got.weights()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn extract_four_sign_pattern_atoms() {
        // the four-atom measure on (+-1, +-1, +-1)/sqrt(3), one flip each
        let s = 1.0 / 3f64.sqrt();
        let w = 27.0 / 4.0;
        let pts =
            [vec![s, s, s], vec![-s, s, s], vec![s, -s, s], vec![s, s, -s]];
        let sphere = SemialgSet::new(
            3,
            vec![Poly::from_terms(
                3,
                &[
                    (vec![2, 0, 0], 1.0),
                    (vec![0, 2, 0], 1.0),
                    (vec![0, 0, 2], 1.0),
                    (vec![0, 0, 0], -1.0),
                ],
            )],
            vec![],
        )
        .with_ball_radius(1.0);
        let mu = AtomicMeasure::new(3, pts.to_vec(), vec![w; 4]);
        let z = mu.moments(&basis(3, 6)).unwrap();
        let profile = is_flat(&z, &sphere, 1e-6).unwrap();
        assert!(profile.is_flat(), "profile: {:?}", profile.ranks);
        let got = extract_atoms(&z, &sphere, &ExtractOptions::default()).unwrap();
        assert_eq!(got.num_atoms(), 4);
        for p in &pts {
            let found = got.atoms().iter().zip(got.weights()).find(|(a, _)| {
                a.iter().zip(p).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() < 1e-6
            });
            let (_, wt) = found.expect("atom recovered");
            assert!((wt - w).abs() < 1e-6);
        }
        let report = verify_measure(&got, &z, &sphere, 1e-6);
        assert!(report.pass, "{:?}", report.details);
    }

    #[test]
    fn verify_measure_flags_perturbed_weight() {
        let mu = AtomicMeasure::<f64>::new(2, vec![vec![0.3, 0.4]], vec![1.0]);
        let y = mu.moments(&basis(2, 4)).unwrap();
        let set = cube(2);
        assert!(verify_measure(&mu, &y, &set, 1e-6).pass);
        let bad = AtomicMeasure::new(2, vec![vec![0.3, 0.4]], vec![1.1]);
        assert!(!verify_measure(&bad, &y, &set, 1e-6).pass);
    }

    #[test]
    fn roundtrip_random_measures_on_cube() {
        let mut rng = StdRng::seed_from_u64(42);
        let set = cube(2);
        for trial in 0..10usize {
            let r = 1 + (trial % 4);
            // atoms separated by at least 0.1
            let mut atoms: Vec<Vec<f64>> = Vec::new();
            while atoms.len() < r {
                let cand: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.95..0.95)).collect();
                if atoms.iter().all(|a| {
                    a.iter().zip(&cand).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() > 0.1
                }) {
                    atoms.push(cand);
                }
            }
            let weights: Vec<f64> = (0..r).map(|_| rng.gen_range(0.5..2.0)).collect();
            let mu = AtomicMeasure::new(2, atoms, weights);
            let k = 3u32;
            let z = mu.moments(&basis(2, 2 * k)).unwrap();
            let profile = is_flat(&z, &set, 1e-6).unwrap();
            assert!(profile.is_flat(), "trial {trial}: ranks {:?}", profile.ranks);
            let got = extract_atoms(&z, &set, &ExtractOptions::default()).unwrap();
            assert_eq!(got.num_atoms(), mu.num_atoms(), "trial {trial}");
            for (a, w) in mu.atoms().iter().zip(mu.weights()) {
                let found = got.atoms().iter().zip(got.weights()).find(|(b, _)| {
                    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
                        < 1e-6
                });
                let (_, wt) =
                    found.unwrap_or_else(|| panic!("trial {trial}: atom {a:?} missing"));
                assert!((wt - w).abs() < 1e-6);
            }
        }
    }
}
