//! Membership checks for the moment cone (does a partial moment sequence
//! admit a representing measure on K?) and for the cone of polynomials
//! nonnegative on K.
//!
//! The moment-side check minimizes a generic (seeded random) SOS objective
//! over all extensions of the candidate sequence inside the relaxation cone
//! of increasing order; flat truncations of optima yield verified measures,
//! while an infeasible relaxation certifies non-membership. The polynomial
//! side runs the Lasserre lower-bound hierarchy, harvesting minimizers from
//! flat moment-side optima to certify non-membership by a point evaluation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{basis, riesz_pairing, AtomicMeasure, Poly, Tms};
use crate::extraction::{extract_atoms, find_flat_truncation, verify_measure, ExtractOptions};
use crate::hierarchy::{
    build_relaxation, lasserre_lower_bound, HierarchyError, MomentLp, RelaxStatus, SosWitness,
};
use crate::moments::SemialgSet;
use crate::scalar::Real;
use crate::sdp::SolverOptions;

#[derive(Debug, Error)]
pub enum MembershipError {
    #[error("a ball radius on K is required for membership checks")]
    BallRadiusRequired,
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

#[derive(Debug, Clone, Copy)]
pub struct MembershipOptions<T: Real> {
    /// Extra relaxation rounds beyond the starting order.
    pub max_rounds: u32,
    pub seed: u64,
    pub tol_rank: T,
    /// Tolerance for verifying recovered measures and harvested points.
    pub tol_verify: T,
    pub solver: SolverOptions<T>,
}

impl<T: Real> Default for MembershipOptions<T> {
    fn default() -> Self {
        MembershipOptions {
            max_rounds: 6,
            seed: 0,
            tol_rank: T::from_f64_c(1e-6),
            tol_verify: T::from_f64_c(1e-6),
            solver: SolverOptions::default(),
        }
    }
}

/// Verdict of the moment-cone membership check.
#[derive(Debug, Clone, Serialize)]
pub enum MomentMembership<T: Real> {
    /// A representing measure was recovered and re-verified against `y`.
    Member { measure: AtomicMeasure<T>, order: u32 },
    /// The order-k relaxation of the extension problem is infeasible, with a
    /// verified separating combination `p = sum lambda_a x^a` in the
    /// truncated module and `<p, y> < 0`.
    NotMember { order: u32, separating: Poly<T>, witness: SosWitness<T> },
    Inconclusive { max_order: u32, diagnostics: Vec<String> },
}

/// A generic SOS objective `v' (U'U) v` over the degree-`half` monomial
/// vector, with `U` drawn from a seeded generator.
pub fn random_sos_objective<T: Real>(n: usize, half: u32, seed: u64) -> Poly<T> {
    let sup = basis(n, half);
    let s = sup.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<Vec<f64>> =
        (0..s).map(|_| (0..s).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut p = Poly::zero(n);
    for a in 0..s {
        for b in 0..s {
            // (U'U)[a,b] = sum_r U[r,a] U[r,b]
            let mut acc = 0.0;
            for row in u.iter() {
                acc += row[a] * row[b];
            }
            p.add_term(sup.indices()[a].add(&sup.indices()[b]), T::from_f64_c(acc));
        }
    }
    p
}

/// Decides membership of the `A`-truncated sequence `y` in the cone of
/// sequences admitting a representing measure on `K`.
///
/// `K` must carry a ball radius; the relaxations append the ball constraint
/// so the searched extensions stay compactly supported.
pub fn check_moment_membership<T: Real>(
    y: &Tms<T>,
    set: &SemialgSet<T>,
    opts: &MembershipOptions<T>,
) -> Result<MomentMembership<T>, MembershipError> {
    let ball_set = set.with_ball_constraint().ok_or(MembershipError::BallRadiusRequired)?;
    let n = set.n();
    let deg_a = y.support().degree();
    // smallest even degree strictly above deg(A)
    let d = 2 * (deg_a + 1).div_ceil(2).max(ball_set.d_k());
    let k0 = (d / 2).max(ball_set.d_k());
    let objective = random_sos_objective::<T>(n, d / 2, opts.seed);

    let constraints: Vec<Poly<T>> = y
        .support()
        .iter()
        .map(|a| Poly::monomial(a.clone(), T::one()))
        .collect();
    let lp = MomentLp::new(
        basis(n, d),
        constraints,
        y.values().to_vec(),
        objective,
        ball_set.clone(),
    );

    let mut diagnostics = Vec::new();
    let t_lo = ball_set.d_k().max(1);
    for k in k0..=k0 + opts.max_rounds {
        let relax = build_relaxation(&lp, k)?;
        let res = relax.solve(&lp, &opts.solver)?;
        match res.status {
            RelaxStatus::MomentInfeasible => {
                let (lambda, witness) = res.infeasibility_multipliers.expect("ray decoded");
                let mut separating = Poly::zero(n);
                for (l, a) in lambda.iter().zip(y.support().iter()) {
                    separating.add_term(a.clone(), *l);
                }
                // soundness: the combination pairs negatively with y and
                // itself sits in the truncated module
                let pairing = riesz_pairing(&separating, y).expect("supported");
                match crate::hierarchy::verify_sos_identity(&separating, &witness, opts.tol_verify) {
                    Ok(_) if pairing < T::zero() => {
                        return Ok(MomentMembership::NotMember { order: k, separating, witness })
                    }
                    _ => {
                        diagnostics.push(format!(
                            "order {k}: infeasibility ray failed re-verification"
                        ));
                    }
                }
            }
            RelaxStatus::Optimal | RelaxStatus::NearOptimal => {
                let w = res.w_star.as_ref().expect("optimal");
                let mut t = t_lo;
                while t <= k {
                    match find_flat_truncation(w, &ball_set, t, k, opts.tol_rank) {
                        Some((zt, profile)) => {
                            let flat_t = profile.order;
                            let extract_opts = ExtractOptions {
                                rank_tol: opts.tol_rank,
                                moment_tol: opts.tol_verify,
                                feas_tol: opts.tol_verify,
                                seed: opts.seed,
                            };
                            match extract_atoms(&zt, &ball_set, &extract_opts) {
                                Ok(measure) => {
                                    let report = verify_measure(&measure, y, set, opts.tol_verify);
                                    if report.pass {
                                        return Ok(MomentMembership::Member { measure, order: k });
                                    }
                                    diagnostics.push(format!(
                                        "order {k}: flat truncation at t={flat_t} did not reproduce y"
                                    ));
                                }
                                Err(e) => {
                                    diagnostics.push(format!("order {k}, t={flat_t}: {e}"));
                                }
                            }
                            t = flat_t + 1;
                        }
                        None => break,
                    }
                }
            }
            other => {
                diagnostics.push(format!("order {k}: relaxation status {other:?}"));
            }
        }
    }
    Ok(MomentMembership::Inconclusive { max_order: k0 + opts.max_rounds, diagnostics })
}

/// Verdict of the nonnegative-polynomial membership check.
#[derive(Debug, Clone, Serialize)]
pub enum PolyMembership<T: Real> {
    /// `f - bound` has a weighted-SOS certificate with `bound >= -tol`.
    Member { order: u32, bound: T, witness: SosWitness<T> },
    /// A point of `K` with a certified negative value of `f`.
    NotMember { point: Vec<T>, value: T, order: u32 },
    Inconclusive { max_order: u32, best_bound: Option<T> },
}

/// Decides membership of `f` in the cone of polynomials nonnegative on `K`
/// by running the lower-bound hierarchy and harvesting minimizers from flat
/// moment-side optima.
pub fn check_poly_membership<T: Real>(
    f: &Poly<T>,
    set: &SemialgSet<T>,
    opts: &MembershipOptions<T>,
) -> Result<PolyMembership<T>, MembershipError> {
    let k0 = f.degree().div_ceil(2).max(set.d_k());
    let mut best_bound: Option<T> = None;
    for k in k0..=k0 + opts.max_rounds {
        let bound = lasserre_lower_bound(f, set, k, &opts.solver)?;
        if let Some(v) = bound.value {
            best_bound = Some(best_bound.map(|b: T| b.max(v)).unwrap_or(v));
            if v >= -opts.tol_verify {
                let witness = bound.witness.expect("optimal bound carries witness");
                return Ok(PolyMembership::Member { order: k, bound: v, witness });
            }
            // look for a genuine minimizer certifying f < 0 somewhere on K
            if let Some(w) = &bound.w_star {
                if let Some((zt, _)) =
                    find_flat_truncation(w, set, set.d_k().max(1), k, opts.tol_rank)
                {
                    let extract_opts = ExtractOptions {
                        rank_tol: opts.tol_rank,
                        moment_tol: opts.tol_verify,
                        feas_tol: opts.tol_verify,
                        seed: opts.seed,
                    };
                    if let Ok(measure) = extract_atoms(&zt, set, &extract_opts) {
                        for atom in measure.atoms() {
                            let fv = f.eval(atom).expect("dimension");
                            if fv < -opts.tol_verify && set.contains_point(atom, opts.tol_verify) {
                                return Ok(PolyMembership::NotMember {
                                    point: atom.clone(),
                                    value: fv,
                                    order: k,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(PolyMembership::Inconclusive { max_order: k0 + opts.max_rounds, best_bound })
}
