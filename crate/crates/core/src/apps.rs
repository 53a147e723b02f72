//! Problem adapters: copositive / completely positive matrix cones over the
//! standard simplex, CP matrix completion, and sums of even powers of
//! linear forms over the unit sphere, including the matrix/form to
//! moment-sequence encodings.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{homogeneous_basis, AtomicMeasure, MultiIndex, Poly, Support, Tms};
use crate::feascert::{find_feasible_moment, FeasCertError, FeasCertOptions, MomentFeasibility};
use crate::hierarchy::MomentLp;
use crate::linopt::{
    reformulate_span_problem, solve_moment_lp, LinOptError, LinOptKind, LinOptOptions,
    LinOptOutcome,
};
use crate::membership::{check_moment_membership, MembershipError, MembershipOptions, MomentMembership};
use crate::moments::SemialgSet;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum AppsError {
    #[error("SOEP forms must be homogeneous of the same even degree")]
    BadForm,
    #[error(transparent)]
    LinOpt(#[from] LinOptError),
    #[error(transparent)]
    FeasCert(#[from] FeasCertError),
    #[error(transparent)]
    Membership(#[from] MembershipError),
}

/// The standard simplex `x >= 0, x_1 + ... + x_n = 1`.
pub fn simplex_set<T: Real>(n: usize) -> SemialgSet<T> {
    let mut h = Poly::constant(n, -T::one());
    for i in 0..n {
        h.add_term(MultiIndex::unit(n, i), T::one());
    }
    let g = (0..n).map(|i| Poly::var(n, i)).collect();
    SemialgSet::new(n, vec![h], g).with_ball_radius(T::one())
}

/// The unit sphere `|x|^2 = 1`.
pub fn sphere_set<T: Real>(n: usize) -> SemialgSet<T> {
    let mut h = Poly::constant(n, -T::one());
    for i in 0..n {
        h.add_term(MultiIndex(vec![0; n]).add(&MultiIndex::unit(n, i)).add(&MultiIndex::unit(n, i)), T::one());
    }
    SemialgSet::new(n, vec![h], vec![]).with_ball_radius(T::one())
}

/// The cube `[-1, 1]^n` via `1 - x_i^2 >= 0`.
pub fn cube_set<T: Real>(n: usize) -> SemialgSet<T> {
    let g = (0..n)
        .map(|i| {
            let mut p = Poly::constant(n, T::one());
            let mut e = vec![0u32; n];
            e[i] = 2;
            p.add_term(MultiIndex::new(e), -T::one());
            p
        })
        .collect();
    SemialgSet::new(n, vec![], g).with_ball_radius(T::from_usize(n).unwrap().sqrt())
}

/// The unit ball `1 - |x|^2 >= 0`.
pub fn ball_set<T: Real>(n: usize) -> SemialgSet<T> {
    let mut p = Poly::constant(n, T::one());
    for i in 0..n {
        let mut e = vec![0u32; n];
        e[i] = 2;
        p.add_term(MultiIndex::new(e), -T::one());
    }
    SemialgSet::new(n, vec![], vec![p]).with_ball_radius(T::one())
}

/// Identifies a symmetric matrix with its degree-two moment sequence:
/// `y_{e_i + e_j} = C_ij`.
pub fn matrix_to_tms<T: Real>(c: &DMatrix<T>) -> Tms<T> {
    let n = c.nrows();
    assert_eq!(c.ncols(), n, "matrix must be square");
    let sup = homogeneous_basis(n, 2);
    let mut values = vec![T::zero(); sup.len()];
    for i in 0..n {
        for j in i..n {
            let alpha = MultiIndex::unit(n, i).add(&MultiIndex::unit(n, j));
            values[sup.position(&alpha).unwrap()] = c[(i, j)];
        }
    }
    Tms::new(sup, values)
}

/// Inverse of [`matrix_to_tms`]; exact roundtrip.
pub fn tms_to_matrix<T: Real>(y: &Tms<T>) -> DMatrix<T> {
    let n = y.n();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let alpha = MultiIndex::unit(n, i).add(&MultiIndex::unit(n, j));
            let v = y.get(&alpha).expect("degree-two support");
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// The quadratic form `x' C x` of a symmetric matrix as a polynomial.
pub fn matrix_form<T: Real>(c: &DMatrix<T>) -> Poly<T> {
    let n = c.nrows();
    let mut p = Poly::zero(n);
    let two = T::from_f64_c(2.0);
    for i in 0..n {
        for j in i..n {
            let alpha = MultiIndex::unit(n, i).add(&MultiIndex::unit(n, j));
            let coeff = if i == j { c[(i, j)] } else { two * c[(i, j)] };
            p.add_term(alpha, coeff);
        }
    }
    p
}

/// A partially specified symmetric matrix: known cells on or above the
/// diagonal; symmetric closure is implied.
#[derive(Debug, Clone, Serialize)]
pub struct PartialSymMatrix<T: Real> {
    pub n: usize,
    pub known: Vec<(usize, usize, T)>,
}

impl<T: Real> PartialSymMatrix<T> {
    pub fn new(n: usize, known: Vec<(usize, usize, T)>) -> Self {
        for (i, j, _) in &known {
            assert!(*i < n && *j < n, "cell out of range");
        }
        let known = known.into_iter().map(|(i, j, v)| if i <= j { (i, j, v) } else { (j, i, v) }).collect();
        PartialSymMatrix { n, known }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CpObjective {
    /// Minimize the trace of the completion.
    MinTrace,
    /// Any completely positive completion.
    Feasibility,
}

#[derive(Debug, Clone, Serialize)]
pub struct CpOutcome<T: Real> {
    pub outcome: LinOptOutcome<T>,
    /// The completed matrix read off the optimal moment vector.
    pub completed: Option<DMatrix<T>>,
    /// Nonnegative factors with `C = sum_k f_k f_k'` (`f_k = sqrt(w_k) u_k`).
    pub factors: Option<Vec<Vec<T>>>,
}

/// Searches for a completely positive completion of `p` over the simplex,
/// optionally of minimum trace. A returned measure on the simplex with
/// atoms `u_k` and weights `w_k` yields the factorization
/// `C = sum_k w_k u_k u_k'`.
pub fn cp_completion<T: Real>(
    p: &PartialSymMatrix<T>,
    objective: CpObjective,
    opts: &LinOptOptions<T>,
) -> Result<CpOutcome<T>, AppsError> {
    let n = p.n;
    let set = simplex_set::<T>(n);
    let support = homogeneous_basis(n, 2);
    let mut constraints = Vec::with_capacity(p.known.len());
    let mut rhs = Vec::with_capacity(p.known.len());
    for (i, j, v) in &p.known {
        let alpha = MultiIndex::unit(n, *i).add(&MultiIndex::unit(n, *j));
        constraints.push(Poly::monomial(alpha, T::one()));
        rhs.push(*v);
    }
    let trace_form = {
        let mut c = Poly::zero(n);
        for i in 0..n {
            let mut e = vec![0u32; n];
            e[i] = 2;
            c.add_term(MultiIndex::new(e), T::one());
        }
        c
    };

    let outcome = match objective {
        CpObjective::MinTrace => {
            let lp = MomentLp::new(support.clone(), constraints, rhs, trace_form, set);
            solve_moment_lp(&lp, opts)?
        }
        CpObjective::Feasibility => {
            let fopts = FeasCertOptions { linopt: *opts, cert_rounds: 4 };
            match find_feasible_moment(&constraints, &rhs, &support, &set, &fopts)? {
                MomentFeasibility::Feasible { outcome, .. } => outcome,
                MomentFeasibility::Infeasible(cert) => {
                    let mut out = LinOptOutcome::<T> {
                        kind: LinOptKind::Infeasible(0),
                        y_star: None,
                        measure: None,
                        lambda_star: None,
                        c_min: None,
                        b_max: None,
                        gap_closed: false,
                        history: Vec::new(),
                        infeasibility_certificate: None,
                        sos_witness: None,
                    };
                    if let crate::feascert::Certificate::MomentInfeasible {
                        lambda,
                        witness,
                        order,
                    } = cert
                    {
                        out.kind = LinOptKind::Infeasible(order);
                        out.infeasibility_certificate = Some((lambda, witness));
                    }
                    return Ok(CpOutcome { outcome: out, completed: None, factors: None });
                }
                MomentFeasibility::Inconclusive { .. } => {
                    let out = LinOptOutcome::<T> {
                        kind: LinOptKind::OrderLimit,
                        y_star: None,
                        measure: None,
                        lambda_star: None,
                        c_min: None,
                        b_max: None,
                        gap_closed: false,
                        history: Vec::new(),
                        infeasibility_certificate: None,
                        sos_witness: None,
                    };
                    return Ok(CpOutcome { outcome: out, completed: None, factors: None });
                }
            }
        }
    };

    let mut completed = None;
    let mut factors = None;
    if let Some(measure) = &outcome.measure {
        let y2 = measure.moments(&support).expect("dimension");
        completed = Some(tms_to_matrix(&y2));
        factors = Some(
            measure
                .atoms()
                .iter()
                .zip(measure.weights())
                .map(|(u, w)| {
                    let s = w.sqrt();
                    u.iter().map(|v| *v * s).collect()
                })
                .collect(),
        );
    } else if let Some(y) = &outcome.y_star {
        if let Ok(y2) = y.restrict(&support) {
            completed = Some(tms_to_matrix(&y2));
        }
    }
    Ok(CpOutcome { outcome, completed, factors })
}

#[derive(Debug, Clone, Serialize)]
pub struct CopositivityOutcome<T: Real> {
    pub outcome: LinOptOutcome<T>,
    /// `l'lambda*` when the search concluded.
    pub margin: Option<T>,
    /// The margin is unbounded above along a certified multiplier ray.
    pub unbounded: bool,
}

/// Maximizes `l'lambda` subject to `form(B) - sum_k lambda_k form(D_k)`
/// copositive, via the moment program over the simplex. An infeasible
/// moment system certifies an improving ray, i.e. an unbounded margin.
pub fn copositivity_margin<T: Real>(
    b_mat: &DMatrix<T>,
    directions: &[DMatrix<T>],
    ell: &[T],
    opts: &LinOptOptions<T>,
) -> Result<CopositivityOutcome<T>, AppsError> {
    assert_eq!(directions.len(), ell.len());
    let n = b_mat.nrows();
    let set = simplex_set::<T>(n);
    let support = homogeneous_basis(n, 2);
    let c = matrix_form(b_mat);
    let a: Vec<Poly<T>> = directions.iter().map(matrix_form).collect();
    let lp = MomentLp::new(support, a, ell.to_vec(), c, set);
    let outcome = solve_moment_lp(&lp, opts)?;
    let margin = outcome.b_max;
    let unbounded = matches!(outcome.kind, LinOptKind::Infeasible(_));
    Ok(CopositivityOutcome { outcome, margin, unbounded })
}

/// A homogeneous form of even degree, identified with the moment sequence
/// `f_check_a = f_a / multinomial(d; a)`.
#[derive(Debug, Clone, Serialize)]
pub struct SoepForm<T: Real> {
    pub n: usize,
    pub d: u32,
    pub poly: Poly<T>,
}

impl<T: Real> SoepForm<T> {
    pub fn new(poly: Poly<T>) -> Result<Self, AppsError> {
        let d = poly.degree();
        if d == 0 || d % 2 != 0 || !poly.terms().all(|(a, _)| a.degree() == d) {
            return Err(AppsError::BadForm);
        }
        Ok(SoepForm { n: poly.n(), d, poly })
    }

    /// `d! / (a_1! ... a_n!)`.
    fn multinomial(d: u32, alpha: &MultiIndex) -> u64 {
        let mut numer: u64 = 1;
        for v in 2..=u64::from(d) {
            numer *= v;
        }
        let mut denom: u64 = 1;
        for e in &alpha.0 {
            for v in 2..=u64::from(*e) {
                denom *= v;
            }
        }
        numer / denom
    }

    /// The moment-sequence identification of the form.
    pub fn to_tms(&self) -> Tms<T> {
        let sup = homogeneous_basis(self.n, self.d);
        let mut values = vec![T::zero(); sup.len()];
        for (alpha, coeff) in self.poly.terms() {
            let m = T::from_u64(Self::multinomial(self.d, alpha)).unwrap();
            values[sup.position(alpha).unwrap()] = *coeff / m;
        }
        Tms::new(sup, values)
    }

    /// Rebuilds the form from its moment-sequence identification.
    pub fn from_tms(y: &Tms<T>) -> Result<Self, AppsError> {
        let d = y.support().degree();
        if d == 0 || d % 2 != 0 {
            return Err(AppsError::BadForm);
        }
        let mut poly = Poly::zero(y.n());
        for (alpha, v) in y.support().iter().zip(y.values()) {
            if alpha.degree() != d {
                return Err(AppsError::BadForm);
            }
            let m = T::from_u64(Self::multinomial(d, alpha)).unwrap();
            poly.add_term(alpha.clone(), *v * m);
        }
        Ok(SoepForm { n: y.n(), d, poly })
    }
}

/// One summand `(sum_i coeffs_i x_i)^d` of a power decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct PowerTerm<T: Real> {
    pub coeffs: Vec<T>,
    pub degree: u32,
}

impl<T: Real> PowerTerm<T> {
    /// Expands `(c . x)^d` into a polynomial.
    pub fn expand(&self) -> Poly<T> {
        let n = self.coeffs.len();
        let mut lin = Poly::zero(n);
        for (i, c) in self.coeffs.iter().enumerate() {
            lin.add_term(MultiIndex::unit(n, i), *c);
        }
        let mut out = Poly::constant(n, T::one());
        for _ in 0..self.degree {
            out = out.mul(&lin);
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SoepOutcome<T: Real> {
    pub outcome: LinOptOutcome<T>,
    pub lambda: Option<Vec<T>>,
    /// Even-power decomposition of `f - sum_k lambda_k lin_k`.
    pub decomposition: Option<Vec<PowerTerm<T>>>,
}

fn measure_to_powers<T: Real>(measure: &AtomicMeasure<T>, d: u32) -> Vec<PowerTerm<T>> {
    measure
        .atoms()
        .iter()
        .zip(measure.weights())
        .map(|(u, w)| {
            let scale = w.powf(T::one() / T::from_u32(d).unwrap());
            let mut coeffs: Vec<T> = u.iter().map(|v| *v * scale).collect();
            // (-L)^d = L^d for even d: report the representative whose first
            // nonzero coordinate is positive
            if let Some(first) = coeffs.iter().find(|v| v.abs() > T::from_f64_c(1e-12)) {
                if *first < T::zero() {
                    for v in coeffs.iter_mut() {
                        *v = -*v;
                    }
                }
            }
            PowerTerm { coeffs, degree: d }
        })
        .collect()
}

/// Maximizes `l'lambda` subject to `f - sum_k lambda_k lin_k` being a sum
/// of even powers of linear forms, and converts the certifying measure on
/// the sphere into an explicit power decomposition.
///
/// With no directions the call reduces to a membership check of `f` itself.
pub fn soep_check<T: Real>(
    f: &SoepForm<T>,
    lin: &[SoepForm<T>],
    ell: &[T],
    opts: &LinOptOptions<T>,
) -> Result<SoepOutcome<T>, AppsError> {
    for l in lin {
        if l.n != f.n || l.d != f.d {
            return Err(AppsError::BadForm);
        }
    }
    let set = sphere_set::<T>(f.n);
    let z0 = f.to_tms();

    if lin.is_empty() {
        let mopts = MembershipOptions {
            max_rounds: opts.membership_rounds,
            seed: opts.seed,
            tol_rank: opts.tol_rank,
            tol_verify: opts.tol_verify,
            solver: opts.solver,
        };
        let verdict = check_moment_membership(&z0, &set, &mopts)?;
        let mut out = SoepOutcome { 
            outcome: LinOptOutcome {
                kind: LinOptKind::OrderLimit,
                y_star: None,
                measure: None,
                lambda_star: Some(vec![]),
                c_min: None,
                b_max: None,
                gap_closed: false,
                history: Vec::new(),
                infeasibility_certificate: None,
                sos_witness: None,
            },
            lambda: Some(vec![]),
            decomposition: None,
        };
        if let MomentMembership::Member { measure, .. } = verdict {
            out.decomposition = Some(measure_to_powers(&measure, f.d));
            out.outcome.kind = LinOptKind::Optimal;
            out.outcome.measure = Some(measure);
            out.outcome.y_star = Some(z0);
        } else if let MomentMembership::NotMember { order, .. } = verdict {
            out.outcome.kind = LinOptKind::Infeasible(order);
        }
        return Ok(out);
    }

    let directions: Vec<Tms<T>> = lin.iter().map(SoepForm::to_tms).collect();
    let (lp, recover) = reformulate_span_problem(&z0, &directions, ell, &set)?;
    let outcome = solve_moment_lp(&lp, opts)?;
    let mut lambda = None;
    let mut decomposition = None;
    if let (LinOptKind::Optimal, Some(y)) = (outcome.kind, &outcome.y_star) {
        lambda = Some(recover.lambda(y));
        if let Some(measure) = &outcome.measure {
            decomposition = Some(measure_to_powers(measure, f.d));
        }
    }
    Ok(SoepOutcome { outcome, lambda, decomposition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::riesz_pairing;

    #[test]
    fn preset_sets_match_expected_shapes() {
        let simplex = simplex_set::<f64>(6);
        assert_eq!(simplex.equalities().len(), 1);
        assert_eq!(simplex.inequalities().len(), 6);
        assert_eq!(simplex.d_k(), 1);

        let sphere = sphere_set::<f64>(3);
        assert_eq!(sphere.equalities().len(), 1);
        assert_eq!(sphere.equalities()[0].degree(), 2);
        assert!(sphere.inequalities().is_empty());

        let cube = cube_set::<f64>(3);
        assert_eq!(cube.inequalities().len(), 3);
        assert!((cube.ball_radius().unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(ball_set::<f64>(2).inequalities().len(), 1);
    }

    #[test]
    fn matrix_tms_roundtrip() {
        let id = DMatrix::<f64>::identity(2, 2);
        let y = matrix_to_tms(&id);
        assert_eq!(y.values(), &[1.0, 0.0, 1.0]);
        assert_eq!(tms_to_matrix(&y), id);

        let u = DMatrix::<f64>::from_row_slice(2, 1, &[1.0, 2.0]);
        let c = &u * u.transpose();
        let y = matrix_to_tms(&c);
        assert_eq!(y.values(), &[1.0, 2.0, 4.0]);
        assert_eq!(tms_to_matrix(&y), c);
    }

    #[test]
    fn rank_one_matrix_is_completable() {
        // fully known C = u u' with u >= 0 on the simplex scale
        let u = DMatrix::<f64>::from_row_slice(3, 1, &[0.5, 0.3, 0.2]);
        let c = &u * u.transpose();
        let mut known = Vec::new();
        for i in 0..3 {
            for j in i..3 {
                known.push((i, j, c[(i, j)]));
            }
        }
        let pm = PartialSymMatrix::new(3, known);
        let out = cp_completion(&pm, CpObjective::Feasibility, &LinOptOptions::default()).unwrap();
        assert_eq!(out.outcome.kind, LinOptKind::Optimal);
        let completed = out.completed.unwrap();
        assert!((&completed - &c).amax() < 1e-6);
        let factors = out.factors.unwrap();
        let mut rebuilt = DMatrix::<f64>::zeros(3, 3);
        for f in &factors {
            let fv = DMatrix::from_column_slice(3, 1, f);
            rebuilt += &fv * fv.transpose();
            assert!(f.iter().all(|v| *v >= -1e-8));
        }
        assert!((&rebuilt - &c).amax() < 1e-6);
    }

    #[test]
    fn psd_obstruction_makes_completion_infeasible() {
        // C12 = 1 with C11 = C22 = 0 violates the moment-matrix inequality
        let pm = PartialSymMatrix::new(2, vec![(0, 0, 0.0), (1, 1, 0.0), (0, 1, 1.0)]);
        let out = cp_completion(&pm, CpObjective::Feasibility, &LinOptOptions::default()).unwrap();
        assert!(matches!(out.outcome.kind, LinOptKind::Infeasible(_)));
    }

    #[test]
    fn horn_like_margin_is_two() {
        // c = x1^2 + x2^2, a1 = x1 x2 on the simplex: the margin is 2 since
        // c - 2 x1 x2 = (x1 - x2)^2 (oracle: grid search over the simplex)
        let b = DMatrix::<f64>::identity(2, 2);
        let dir = DMatrix::<f64>::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        let out =
            copositivity_margin(&b, &[dir], &[1.0], &LinOptOptions::default()).unwrap();
        assert!(!out.unbounded);
        assert!((out.margin.unwrap() - 2.0).abs() < 1e-5, "margin {:?}", out.margin);
    }

    #[test]
    fn zero_direction_margin_unbounded() {
        let b = DMatrix::<f64>::identity(2, 2);
        let dir = DMatrix::<f64>::zeros(2, 2);
        let out =
            copositivity_margin(&b, &[dir], &[1.0], &LinOptOptions::default()).unwrap();
        assert!(out.unbounded);
    }

    #[test]
    fn soep_tms_identification_is_exact() {
        // (x1^2 + x2^2 + x3^2)^3 has the documented moment identification
        let mut sq = Poly::<f64>::zero(3);
        for i in 0..3 {
            let mut e = vec![0u32; 3];
            e[i] = 2;
            sq.add_term(MultiIndex::new(e), 1.0);
        }
        let cube = sq.mul(&sq).mul(&sq);
        let form = SoepForm::new(cube).unwrap();
        let y = form.to_tms();
        assert!((y.get(&MultiIndex::new(vec![6, 0, 0])).unwrap() - 1.0).abs() < 1e-15);
        assert!((y.get(&MultiIndex::new(vec![4, 2, 0])).unwrap() - 0.2).abs() < 1e-15);
        assert!((y.get(&MultiIndex::new(vec![2, 2, 2])).unwrap() - 1.0 / 15.0).abs() < 1e-15);
        let back = SoepForm::from_tms(&y).unwrap();
        assert!(form.poly.sub(&back.poly).norm_inf() < 1e-12);
    }

    #[test]
    fn single_power_form_recovered() {
        // f = (0.8 x1 + 0.6 x2)^6 is one even power; the measure is one atom
        let term = PowerTerm { coeffs: vec![0.8, 0.6], degree: 6 };
        let f = SoepForm::new(term.expand()).unwrap();
        let out = soep_check(&f, &[], &[], &LinOptOptions::default()).unwrap();
        assert_eq!(out.outcome.kind, LinOptKind::Optimal);
        let decomp = out.decomposition.unwrap();
        assert_eq!(decomp.len(), 1);
        let rebuilt = decomp[0].expand();
        assert!(
            f.poly.sub(&rebuilt).norm_inf() < 1e-6,
            "rebuilt power mismatch: {:?}",
            f.poly.sub(&rebuilt)
        );
        // consistency of the moment pairing on a spot check
        let y = f.to_tms();
        let probe = Poly::from_terms(2, &[(vec![3, 3], 1.0)]);
        let direct = riesz_pairing(&probe, &y).unwrap();
        assert!((direct - 0.8f64.powi(3) * 0.6f64.powi(3)).abs() < 1e-12);
    }
}
