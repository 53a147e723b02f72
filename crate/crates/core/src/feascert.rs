//! Feasibility search and infeasibility certificates for linear moment
//! systems and their multiplier-side duals, plus the K-fullness test.
//!
//! Moment side: does some `y in R_A(K)` satisfy `<a_i, y> = b_i`? A
//! feasible point comes with a verifying atomic measure; infeasibility is
//! certified by multipliers with `b'lambda < 0` whose combination
//! `sum lambda_i a_i` carries a weighted-SOS certificate on `K`.
//!
//! Multiplier side: does some `lambda` make `c - sum lambda_i a_i`
//! certifiably nonnegative on `K`? Infeasibility is certified by a moment
//! vector `y in R_A(K)` with `<c, y> = -1` and `<a_i, y> = 0`, delivered
//! with its representing measure. Absence of such a witness within the
//! order budget yields `Inconclusive`, never a feasibility claim: witnesses
//! of this shape need not exist for every infeasible instance.

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{riesz_pairing, AtomicMeasure, MultiIndex, Poly, Support, Tms};
use crate::hierarchy::{sos_membership, HierarchyError, SosMembership, SosWitness};
use crate::linopt::{solve_moment_lp, LinOptError, LinOptKind, LinOptOptions, LinOptOutcome};
use crate::membership::MembershipError;
use crate::moments::SemialgSet;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum FeasCertError {
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    LinOpt(#[from] LinOptError),
    #[error(transparent)]
    Membership(#[from] MembershipError),
}

/// A verified certificate produced by the searches in this module.
#[derive(Debug, Clone, Serialize)]
pub enum Certificate<T: Real> {
    /// `b'lambda < 0` and `sum_i lambda_i a_i` lies in the order-k truncated
    /// quadratic module plus ideal (re-verified coefficientwise).
    MomentInfeasible { lambda: Vec<T>, witness: SosWitness<T>, order: u32 },
    /// `y` with `<c, y> = -1`, `<a_i, y> = 0`, carrying a representing
    /// measure on `K`.
    DualInfeasible { y_witness: Tms<T>, measure: AtomicMeasure<T>, order: u32 },
    /// Coefficients over `A` whose combination minus one is certified
    /// nonnegative on `K`.
    KFullWitness { lambda: Tms<T>, witness: SosWitness<T>, order: u32 },
}

#[derive(Debug, Clone, Serialize)]
pub enum MomentFeasibility<T: Real> {
    /// A feasible point restricted to the original support, with its measure.
    Feasible { y: Tms<T>, measure: AtomicMeasure<T>, outcome: LinOptOutcome<T> },
    Infeasible(Certificate<T>),
    Inconclusive { diagnostics: Vec<String> },
}

#[derive(Debug, Clone, Serialize)]
pub enum DualFeasibility<T: Real> {
    Feasible { lambda: Vec<T>, witness: SosWitness<T>, order: u32 },
    Infeasible(Certificate<T>),
    Inconclusive { diagnostics: Vec<String> },
}

#[derive(Debug, Clone, Serialize)]
pub enum KFullness<T: Real> {
    Full { lambda: Tms<T>, witness: SosWitness<T>, order: u32 },
    NotFull(Certificate<T>),
    Inconclusive { diagnostics: Vec<String> },
}

#[derive(Debug, Clone, Copy)]
pub struct FeasCertOptions<T: Real> {
    pub linopt: LinOptOptions<T>,
    /// Extra orders scanned by the certificate searches.
    pub cert_rounds: u32,
}

impl<T: Real> Default for FeasCertOptions<T> {
    fn default() -> Self {
        FeasCertOptions {
            linopt: LinOptOptions { deep_membership: true, ..LinOptOptions::default() },
            cert_rounds: 4,
        }
    }
}

/// The default strictly positive objective used by the feasibility search:
/// the even monomials of `A` plus one. Positive on every `K` since each
/// even monomial is nonnegative everywhere.
pub fn positive_objective<T: Real>(support: &Support) -> Poly<T> {
    let n = support.n();
    let mut c = Poly::constant(n, T::one());
    for alpha in support.iter() {
        if alpha.is_even() {
            c.add_term(alpha.clone(), T::one());
        }
    }
    c
}

/// Searches for `y in R_A(K)` with `<a_i, y> = b_i`.
///
/// The support is augmented by the constant monomial when absent, a
/// strictly positive objective makes the multiplier side interior, and the
/// hierarchy loop runs with membership stopping. An infeasible relaxation
/// triggers the multiplier-certificate search.
pub fn find_feasible_moment<T: Real>(
    a: &[Poly<T>],
    b: &[T],
    support: &Support,
    set: &SemialgSet<T>,
    opts: &FeasCertOptions<T>,
) -> Result<MomentFeasibility<T>, FeasCertError> {
    let augmented = support.with_constant();
    let c = positive_objective::<T>(&augmented);
    let lp = crate::hierarchy::MomentLp::new(
        augmented,
        a.to_vec(),
        b.to_vec(),
        c,
        set.clone(),
    );
    let outcome = solve_moment_lp(&lp, &opts.linopt)?;
    match outcome.kind {
        LinOptKind::Optimal => {
            let y_full = outcome.y_star.clone().expect("optimal");
            let measure = outcome.measure.clone().expect("optimal");
            let y = y_full.restrict(support).expect("A inside augmented support");
            Ok(MomentFeasibility::Feasible { y, measure, outcome })
        }
        LinOptKind::Infeasible(order) => {
            // the relaxation ray often is the certificate already
            if let Some((lambda, witness)) = outcome.infeasibility_certificate {
                return Ok(MomentFeasibility::Infeasible(Certificate::MomentInfeasible {
                    lambda,
                    witness,
                    order,
                }));
            }
            match certify_moment_infeasible(a, b, set, opts)? {
                Some(cert) => Ok(MomentFeasibility::Infeasible(cert)),
                None => Ok(MomentFeasibility::Inconclusive {
                    diagnostics: vec![format!(
                        "relaxation infeasible at order {order} but no certificate verified"
                    )],
                }),
            }
        }
        LinOptKind::OrderLimit => Ok(MomentFeasibility::Inconclusive {
            diagnostics: outcome
                .history
                .iter()
                .filter_map(|r| r.note.clone().map(|n| format!("order {}: {n}", r.order)))
                .collect(),
        }),
    }
}

/// Searches, for increasing order, for multipliers with `b'lambda = -1` and
/// `sum_i lambda_i a_i` in the truncated module of `K`.
///
/// The normalization makes the conic condition `b'lambda < 0` a bounded
/// feasibility program: writing `lambda = lambda_0 + N eta` with
/// `b'lambda_0 = -1` and `N` spanning the nullspace of `b'` turns the
/// search into an SOS membership program in `eta`.
pub fn certify_moment_infeasible<T: Real>(
    a: &[Poly<T>],
    b: &[T],
    set: &SemialgSet<T>,
    opts: &FeasCertOptions<T>,
) -> Result<Option<Certificate<T>>, FeasCertError> {
    let m = a.len();
    let bnorm2: T = b.iter().map(|v| *v * *v).sum();
    if m == 0 || bnorm2 == T::zero() {
        // b'lambda < 0 is impossible
        return Ok(None);
    }
    let n = set.n();
    // lambda_0 = -b / (b'b)
    let lambda0: Vec<T> = b.iter().map(|v| -*v / bnorm2).collect();
    let mut f = Poly::zero(n);
    for (l, ai) in lambda0.iter().zip(a) {
        f = f.add(&ai.scale(*l));
    }
    // orthonormal basis of the nullspace of b'
    let bvec = nalgebra::DVector::from_column_slice(b);
    let bunit = &bvec / bvec.norm();
    let mut nullbasis: Vec<nalgebra::DVector<T>> = Vec::with_capacity(m - 1);
    for i in 0..m {
        if nullbasis.len() == m - 1 {
            break;
        }
        let mut v = nalgebra::DVector::<T>::zeros(m);
        v[i] = T::one();
        let proj = bunit.dot(&v);
        v -= &bunit * proj;
        for q in &nullbasis {
            let p = q.dot(&v);
            v -= q * p;
        }
        let norm = v.norm();
        if norm > T::from_f64_c(1e-10) {
            nullbasis.push(v / norm);
        }
    }
    // lin_j = -sum_i N_ij a_i  (so that f - sum_j eta_j lin_j = sum lambda_i a_i)
    let lin: Vec<Poly<T>> = nullbasis
        .iter()
        .map(|col| {
            let mut p = Poly::zero(n);
            for (i, ai) in a.iter().enumerate() {
                p = p.add(&ai.scale(-col[i]));
            }
            p
        })
        .collect();

    let k0 = a
        .iter()
        .map(|p| p.degree().div_ceil(2))
        .max()
        .unwrap_or(1)
        .max(set.d_k());
    for k in k0..=k0 + opts.cert_rounds {
        match sos_membership(&f, &lin, set, k, &opts.linopt.solver)? {
            SosMembership::Feasible { lambda: eta, witness } => {
                let mut lambda = lambda0.clone();
                for (e, col) in eta.iter().zip(&nullbasis) {
                    for i in 0..m {
                        lambda[i] += *e * col[i];
                    }
                }
                return Ok(Some(Certificate::MomentInfeasible { lambda, witness, order: k }));
            }
            _ => continue,
        }
    }
    Ok(None)
}

/// Searches for multipliers `lambda` with `c - sum_i lambda_i a_i`
/// certified nonnegative on `K`; after the order budget, attempts the
/// moment-side infeasibility witness.
pub fn find_feasible_dual<T: Real>(
    c: &Poly<T>,
    a: &[Poly<T>],
    set: &SemialgSet<T>,
    opts: &FeasCertOptions<T>,
) -> Result<DualFeasibility<T>, FeasCertError> {
    let k0 = a
        .iter()
        .chain(std::iter::once(c))
        .map(|p| p.degree().div_ceil(2))
        .max()
        .unwrap_or(1)
        .max(set.d_k());
    let mut diagnostics = Vec::new();
    for k in k0..=k0 + opts.cert_rounds {
        match sos_membership(c, a, set, k, &opts.linopt.solver)? {
            SosMembership::Feasible { lambda, witness } => {
                return Ok(DualFeasibility::Feasible { lambda, witness, order: k })
            }
            SosMembership::InfeasibleAtOrder { .. } => {
                diagnostics.push(format!("order {k}: no certified multiplier"));
            }
            SosMembership::Inconclusive { status } => {
                diagnostics.push(format!("order {k}: relaxation status {status:?}"));
            }
        }
    }
    match certify_dual_infeasible(c, a, set, opts)? {
        Some(cert) => Ok(DualFeasibility::Infeasible(cert)),
        None => Ok(DualFeasibility::Inconclusive { diagnostics }),
    }
}

/// Searches for `y in R_A(K)` with `<c, y> = -1` and `<a_i, y> = 0`; a
/// verifying measure makes `y` a certificate that no multiplier vector is
/// feasible.
pub fn certify_dual_infeasible<T: Real>(
    c: &Poly<T>,
    a: &[Poly<T>],
    set: &SemialgSet<T>,
    opts: &FeasCertOptions<T>,
) -> Result<Option<Certificate<T>>, FeasCertError> {
    let mut support = c.support();
    for p in a {
        support = support.union(&p.support());
    }
    let mut sys: Vec<Poly<T>> = Vec::with_capacity(a.len() + 1);
    let mut rhs: Vec<T> = Vec::with_capacity(a.len() + 1);
    sys.push(c.clone());
    rhs.push(-T::one());
    for p in a {
        sys.push(p.clone());
        rhs.push(T::zero());
    }
    match find_feasible_moment(&sys, &rhs, &support, set, opts)? {
        MomentFeasibility::Feasible { y, measure, outcome } => {
            let order = outcome.history.last().map(|r| r.order).unwrap_or(0);
            // linear identity holds to machine precision on the measure
            let moments = measure.moments(&support).expect("dimension");
            let cv = riesz_pairing(c, &moments).expect("supported");
            if (cv + T::one()).abs() > opts.linopt.tol_verify * T::from_f64_c(10.0) {
                return Ok(None);
            }
            Ok(Some(Certificate::DualInfeasible { y_witness: y, measure, order }))
        }
        _ => Ok(None),
    }
}

/// Checks whether the span of `x^a, a in A` contains a polynomial strictly
/// positive on `K`, by searching for coefficients whose combination minus
/// one is certified nonnegative; non-fullness is certified by a separating
/// moment vector with mass one annihilating the span.
pub fn k_fullness<T: Real>(
    support: &Support,
    set: &SemialgSet<T>,
    opts: &FeasCertOptions<T>,
) -> Result<KFullness<T>, FeasCertError> {
    let n = set.n();
    let c = Poly::constant(n, -T::one());
    let a: Vec<Poly<T>> = support
        .iter()
        .map(|alpha| Poly::monomial(alpha.clone(), -T::one()))
        .collect();
    match find_feasible_dual(&c, &a, set, opts)? {
        DualFeasibility::Feasible { lambda, witness, order } => {
            let coeffs = Tms::new(support.clone(), lambda);
            Ok(KFullness::Full { lambda: coeffs, witness, order })
        }
        DualFeasibility::Infeasible(cert) => Ok(KFullness::NotFull(cert)),
        DualFeasibility::Inconclusive { diagnostics } => {
            Ok(KFullness::Inconclusive { diagnostics })
        }
    }
}

/// Convenience: the support member `x^a` as a readable string, used by
/// reports.
pub fn monomial_name(alpha: &MultiIndex) -> String {
    let mut parts = Vec::new();
    for (i, e) in alpha.0.iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(format!("x{}", i + 1)),
            _ => parts.push(format!("x{}^{e}", i + 1)),
        }
    }
    if parts.is_empty() {
        "1".to_string()
    } else {
        parts.join("*")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::basis;

    fn poly(n: usize, terms: &[(&[u32], f64)]) -> Poly<f64> {
        Poly::from_terms(
            n,
            &terms.iter().map(|(e, c)| (e.to_vec(), *c)).collect::<Vec<_>>(),
        )
    }

    fn circle() -> SemialgSet<f64> {
        SemialgSet::new(
            2,
            vec![poly(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0), (&[0, 0], -1.0)])],
            vec![],
        )
        .with_ball_radius(1.0)
    }

    fn interval() -> SemialgSet<f64> {
        // K = [-1, 1] via g = 1 - x^2
        SemialgSet::new(1, vec![], vec![poly(1, &[(&[0], 1.0), (&[2], -1.0)])])
            .with_ball_radius(1.0)
    }

    #[test]
    fn zero_rhs_is_feasible_with_zero_measure() {
        let a = vec![poly(2, &[(&[1, 1], 1.0)])];
        let out = find_feasible_moment(
            &a,
            &[0.0],
            &basis(2, 2),
            &circle(),
            &FeasCertOptions::default(),
        )
        .unwrap();
        match out {
            MomentFeasibility::Feasible { y, measure, .. } => {
                assert!(y.norm_inf() < 1e-6);
                assert_eq!(measure.num_atoms(), 0);
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn trivial_normalized_certificate() {
        // a = (1), b = (-1): lambda = (1) gives b'lambda = -1 with 1 SOS
        let a = vec![Poly::constant(2, 1.0)];
        let cert = certify_moment_infeasible(&a, &[-1.0], &circle(), &FeasCertOptions::default())
            .unwrap()
            .expect("certificate");
        match cert {
            Certificate::MomentInfeasible { lambda, witness, .. } => {
                assert!((lambda[0] - 1.0).abs() < 1e-8);
                let mut combo = Poly::zero(2);
                for (l, ai) in lambda.iter().zip(&a) {
                    combo = combo.add(&ai.scale(*l));
                }
                crate::hierarchy::verify_sos_identity(&combo, &witness, 1e-6).unwrap();
            }
            other => panic!("unexpected certificate {other:?}"),
        }
    }

    #[test]
    fn dual_feasible_for_interior_polynomial() {
        // c = 1 + x1^2 is already a sum of squares
        let c = poly(2, &[(&[0, 0], 1.0), (&[2, 0], 1.0)]);
        let out = find_feasible_dual(&c, &[], &circle(), &FeasCertOptions::default()).unwrap();
        assert!(matches!(out, DualFeasibility::Feasible { .. }));
    }

    #[test]
    fn dual_certificate_none_for_positive_constant() {
        // c = 1 on a compact set: no mass-one vector can pair to -1
        let c = Poly::constant(2, 1.0);
        let cert =
            certify_dual_infeasible(&c, &[], &circle(), &FeasCertOptions::default()).unwrap();
        assert!(cert.is_none());
    }

    #[test]
    fn cauchy_schwarz_case_is_inconclusive() {
        // c(lambda) = x1 x2 - lambda x1^2 on the circle is never nonnegative,
        // yet no moment witness of the certificate shape exists
        let c = poly(2, &[(&[1, 1], 1.0)]);
        let a = vec![poly(2, &[(&[2, 0], 1.0)])];
        let opts = FeasCertOptions {
            cert_rounds: 2,
            linopt: LinOptOptions {
                max_order: 4,
                deep_membership: true,
                ..LinOptOptions::default()
            },
        };
        let out = find_feasible_dual(&c, &a, &circle(), &opts).unwrap();
        assert!(
            matches!(out, DualFeasibility::Inconclusive { .. }),
            "expected inconclusive, got {out:?}"
        );
    }

    #[test]
    fn constant_support_is_always_full() {
        let sup = basis(2, 0);
        let out = k_fullness(&sup, &circle(), &FeasCertOptions::default()).unwrap();
        match out {
            KFullness::Full { lambda, witness, .. } => {
                // lambda * 1 - 1 must be certified nonnegative
                let mut combo = Poly::zero(2);
                for (alpha, v) in sup.iter().zip(lambda.values()) {
                    combo.add_term(alpha.clone(), *v);
                }
                combo.add_term(MultiIndex::zeros(2), -1.0);
                crate::hierarchy::verify_sos_identity(&combo, &witness, 1e-6).unwrap();
            }
            other => panic!("expected full, got {other:?}"),
        }
    }

    #[test]
    fn single_odd_monomial_is_not_full_on_interval() {
        // A = {x} on [-1, 1]: no lambda x - 1 >= 0; the witness is the
        // symmetric two-point measure with mass one and zero mean
        let sup = crate::algebra::Support::new(1, vec![MultiIndex::new(vec![1])]);
        let out = k_fullness(&sup, &interval(), &FeasCertOptions::default()).unwrap();
        match out {
            KFullness::NotFull(Certificate::DualInfeasible { measure, .. }) => {
                let moments = measure.moments(&basis(1, 1)).unwrap();
                assert!((moments.values()[0] - 1.0).abs() < 1e-6);
                assert!(moments.values()[1].abs() < 1e-6);
            }
            other => panic!("expected not-full, got {other:?}"),
        }
    }
}
