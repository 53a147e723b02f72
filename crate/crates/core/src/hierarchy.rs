//! Order-k relaxations of linear optimization over the moment cone, their
//! weighted-sum-of-squares duals, standalone Lasserre lower bounds, and
//! SOS membership programs.
//!
//! A linear moment program
//!
//! ```text
//!   min <c, y>  s.t.  <a_i, y> = b_i,  y in R_A(K)
//! ```
//!
//! is relaxed at order k by replacing `R_A(K)` with the projection onto
//! `R^A` of the moment vectors `w` on `basis(n, 2k)` whose localizing
//! matrices are PSD (inequalities) resp. zero (equalities). The dual
//! program maximizes `b'lambda` over multipliers with
//! `c - sum_i lambda_i a_i` in the truncated quadratic module plus ideal.
//!
//! Both sides ride on a single conic program: the SOS side is the SDP
//! primal (free multipliers plus Gram blocks), the moment vector is the SDP
//! dual variable. One solve yields `w*`, `lambda*`, the Gram witnesses and
//! both optimal values; an infeasibility ray on either side decodes into
//! the corresponding certificate data.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{basis, riesz_pairing, AlgebraError, Poly, Support, Tms};
use crate::moments::SemialgSet;
use crate::scalar::Real;
use crate::sdp::{solve, LinearExpr, SdpError, SdpProblem, SdpSolution, SdpStatus, SolverOptions};

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("relaxation order too small: need 2k >= {needed}, got 2k = {got}")]
    OrderTooSmall { needed: u32, got: u32 },
    #[error("constraint/objective polynomial not supported in A")]
    UnsupportedPolynomial,
    #[error("failed to decode multipliers: witness residual {residual} exceeds {tol}")]
    DecodeFailure { residual: f64, tol: f64 },
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Linear optimization data over the moment cone on support `A`.
#[derive(Debug, Clone, Serialize)]
pub struct MomentLp<T: Real> {
    pub support: Support,
    pub constraints: Vec<Poly<T>>,
    pub rhs: Vec<T>,
    pub objective: Poly<T>,
    pub set: SemialgSet<T>,
}

impl<T: Real> MomentLp<T> {
    pub fn new(
        support: Support,
        constraints: Vec<Poly<T>>,
        rhs: Vec<T>,
        objective: Poly<T>,
        set: SemialgSet<T>,
    ) -> Self {
        assert_eq!(constraints.len(), rhs.len(), "one rhs per constraint");
        for p in constraints.iter().chain(std::iter::once(&objective)) {
            assert!(
                p.terms().all(|(a, _)| support.contains(a)),
                "constraint/objective must be supported in A"
            );
        }
        MomentLp { support, constraints, rhs, objective, set }
    }

    /// Smallest admissible relaxation order: `max(ceil(deg A / 2), d_K)`.
    pub fn min_order(&self) -> u32 {
        self.support.degree().div_ceil(2).max(self.set.d_k())
    }
}

/// A weighted-SOS certificate: Gram matrices per multiplier polynomial plus
/// ideal coefficients, representing
/// `sum_j g_j * (v_j' G_j v_j) + sum_i h_i * phi_i`.
#[derive(Debug, Clone, Serialize)]
pub struct SosWitness<T: Real> {
    /// `(multiplier polynomial, monomial basis of the Gram rows, Gram matrix)`
    pub gram: Vec<(Poly<T>, Support, DMatrix<T>)>,
    /// `(equality polynomial h_i, coefficient polynomial phi_i)`
    pub ideal: Vec<(Poly<T>, Poly<T>)>,
}

impl<T: Real> SosWitness<T> {
    /// Expands the certificate back into a polynomial.
    pub fn expand(&self) -> Poly<T> {
        let n = self
            .gram
            .iter()
            .map(|(g, _, _)| g.n())
            .chain(self.ideal.iter().map(|(h, _)| h.n()))
            .next()
            .unwrap_or(1);
        let mut out = Poly::zero(n);
        let two = T::from_f64_c(2.0);
        for (g, sup, gram) in &self.gram {
            let mut quad = Poly::zero(n);
            for (ci, ca) in sup.iter().enumerate() {
                for (ri, ra) in sup.iter().enumerate().take(ci + 1) {
                    let v = gram[(ri, ci)];
                    if v == T::zero() {
                        continue;
                    }
                    let w = if ri == ci { v } else { two * v };
                    quad.add_term(ra.add(ca), w);
                }
            }
            out = out.add(&g.mul(&quad));
        }
        for (h, phi) in &self.ideal {
            out = out.add(&h.mul(phi));
        }
        out
    }

    /// Smallest eigenvalue over all Gram blocks.
    pub fn min_gram_eigenvalue(&self) -> T {
        let mut min = T::zero();
        for (_, _, gram) in &self.gram {
            if gram.nrows() == 0 {
                continue;
            }
            let eig = gram.clone().symmetric_eigen();
            for v in eig.eigenvalues.iter() {
                if *v < min {
                    min = *v;
                }
            }
        }
        min
    }
}

/// Checks that a witness reproduces `target` coefficientwise and that its
/// Gram blocks are PSD up to `tol`; returns the coefficient residual.
pub fn verify_sos_identity<T: Real>(
    target: &Poly<T>,
    witness: &SosWitness<T>,
    tol: T,
) -> Result<T, HierarchyError> {
    let diff = target.sub(&witness.expand());
    let residual = diff.norm_inf() / (T::one() + target.norm_inf());
    let eig_ok = witness.min_gram_eigenvalue() >= -tol;
    if residual <= tol && eig_ok {
        Ok(residual)
    } else {
        Err(HierarchyError::DecodeFailure {
            residual: residual.to_f64().unwrap_or(f64::NAN),
            tol: tol.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// An assembled order-k relaxation with its decode layout.
#[derive(Debug, Clone)]
pub struct Relaxation<T: Real> {
    pub order: u32,
    pub problem: SdpProblem<T>,
    rows: Support,
    n_lp: usize,
    ideal_cols: Vec<(usize, Support)>,
    ideal_polys: Vec<Poly<T>>,
    gram_blocks: Vec<Support>,
    multipliers: Vec<Poly<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RelaxStatus {
    Optimal,
    NearOptimal,
    /// The moment side is infeasible; a multiplier ray certifies it.
    MomentInfeasible,
    /// The SOS side is infeasible at this order; a separating moment vector
    /// in the relaxation cone certifies it.
    SosInfeasible,
    Unknown,
}

/// Decoded primal/dual data of a solved relaxation.
#[derive(Debug, Clone, Serialize)]
pub struct RelaxationResult<T: Real> {
    pub order: u32,
    pub status: RelaxStatus,
    /// Restriction of `w_star` to the problem support `A`.
    pub y_star: Option<Tms<T>>,
    /// Full moment vector on `basis(n, 2k)`.
    pub w_star: Option<Tms<T>>,
    pub lambda_star: Option<Vec<T>>,
    /// Moment-side optimal value `<c, y*>`.
    pub c_k: Option<T>,
    /// SOS-side optimal value `b'lambda*`.
    pub b_k: Option<T>,
    /// For `MomentInfeasible`: `lambda` with `b'lambda < 0` whose combination
    /// `sum_i lambda_i a_i` lies in the truncated quadratic module + ideal.
    pub infeasibility_multipliers: Option<(Vec<T>, SosWitness<T>)>,
    /// For `SosInfeasible`: a relaxation-cone vector `w` with
    /// `<a_i, w> = 0` and `<c, w> < 0`.
    pub separating_tms: Option<Tms<T>>,
    #[serde(skip)]
    pub sdp: Option<SdpSolution<T>>,
}

/// Assembles the order-k relaxation of `lp` as a conic program.
///
/// Refused (rather than defaulted to all of `R^A`) when `2k < deg(A)`, and
/// refused when the order cannot accommodate a constraint polynomial of `K`.
pub fn build_relaxation<T: Real>(lp: &MomentLp<T>, k: u32) -> Result<Relaxation<T>, HierarchyError> {
    let n = lp.set.n();
    let dega = lp.support.degree();
    if 2 * k < dega {
        return Err(HierarchyError::OrderTooSmall { needed: dega, got: 2 * k });
    }
    for p in lp.set.equalities().iter().chain(lp.set.inequalities()) {
        if 2 * k < p.degree() {
            return Err(HierarchyError::OrderTooSmall { needed: p.degree(), got: 2 * k });
        }
    }
    let rows = basis(n, 2 * k);
    if !lp.support.is_subset_of(&rows) {
        return Err(HierarchyError::UnsupportedPolynomial);
    }

    let mut row_exprs: Vec<LinearExpr<T>> = (0..rows.len()).map(|_| LinearExpr::new()).collect();

    // lambda columns, one per moment constraint
    let n_lp = lp.constraints.len();
    for (i, a) in lp.constraints.iter().enumerate() {
        for (alpha, coeff) in a.terms() {
            let r = rows.position(alpha).expect("A inside basis(2k)");
            row_exprs[r].push_free(i, *coeff);
        }
    }

    // ideal columns: one per h_i and multiplier monomial delta with
    // deg(h_i x^delta) <= 2k
    let mut ideal_cols = Vec::new();
    let mut col = n_lp;
    for h in lp.set.equalities() {
        let mult = basis(n, 2 * k - h.degree());
        for (d, delta) in mult.iter().enumerate() {
            for (eta, coeff) in h.terms() {
                let r = rows.position(&eta.add(delta)).expect("ideal target in basis(2k)");
                row_exprs[r].push_free(col + d, *coeff);
            }
        }
        ideal_cols.push((col, mult.clone()));
        col += mult.len();
    }

    // Gram blocks: g_0 = 1, then each inequality of K
    let mut multipliers: Vec<Poly<T>> = Vec::with_capacity(1 + lp.set.inequalities().len());
    multipliers.push(Poly::constant(n, T::one()));
    multipliers.extend(lp.set.inequalities().iter().cloned());
    let mut gram_blocks = Vec::with_capacity(multipliers.len());
    let mut block_sizes = Vec::with_capacity(multipliers.len());
    for g in &multipliers {
        let sup = basis(n, k - g.degree().div_ceil(2));
        block_sizes.push(sup.len());
        gram_blocks.push(sup);
    }
    for (j, (g, sup)) in multipliers.iter().zip(&gram_blocks).enumerate() {
        for (ci, ca) in sup.iter().enumerate() {
            for (ri, ra) in sup.iter().enumerate().take(ci + 1) {
                let ab = ra.add(ca);
                for (eta, coeff) in g.terms() {
                    let r = rows.position(&eta.add(&ab)).expect("gram target in basis(2k)");
                    row_exprs[r].push_entry(j, ri, ci, *coeff);
                }
            }
        }
    }

    let mut problem = SdpProblem::new(col, block_sizes);
    let mut obj = LinearExpr::new();
    for (i, b) in lp.rhs.iter().enumerate() {
        obj.push_free(i, -*b);
    }
    problem.set_objective(obj);
    for (r, expr) in row_exprs.into_iter().enumerate() {
        problem.add_constraint(expr, lp.objective.coeff(&rows.indices()[r]));
    }

    Ok(Relaxation {
        order: k,
        problem,
        rows,
        n_lp,
        ideal_cols,
        ideal_polys: lp.set.equalities().to_vec(),
        gram_blocks,
        multipliers,
    })
}

impl<T: Real> Relaxation<T> {
    /// Monomial support indexing the SDP constraint rows, `basis(n, 2k)`.
    pub fn row_support(&self) -> &Support {
        &self.rows
    }

    /// Moment vector encoded in the SDP dual variables.
    pub fn moment_vector(&self, sol: &SdpSolution<T>) -> Tms<T> {
        let values: Vec<T> = sol.dual_y.iter().map(|v| -*v).collect();
        Tms::new(self.rows.clone(), values)
    }

    /// Multipliers and weighted-SOS witness encoded in the SDP primal.
    pub fn witness(&self, sol: &SdpSolution<T>) -> (Vec<T>, SosWitness<T>) {
        let lambda: Vec<T> = sol.primal[..self.n_lp].to_vec();
        let gram = self
            .multipliers
            .iter()
            .zip(&self.gram_blocks)
            .enumerate()
            .map(|(j, (g, sup))| (g.clone(), sup.clone(), sol.primal_block(&self.problem, j)))
            .collect();
        let n = self.rows.n();
        let ideal = self
            .ideal_cols
            .iter()
            .zip(&self.ideal_polys)
            .map(|((col, mult), h)| {
                let mut phi = Poly::zero(n);
                for (d, delta) in mult.iter().enumerate() {
                    phi.add_term(delta.clone(), sol.primal[col + d]);
                }
                (h.clone(), phi)
            })
            .collect();
        (lambda, SosWitness { gram, ideal })
    }

    /// Solves and decodes the relaxation.
    pub fn solve(
        &self,
        lp: &MomentLp<T>,
        opts: &SolverOptions<T>,
    ) -> Result<RelaxationResult<T>, HierarchyError> {
        let sdp = solve(&self.problem, opts)?;
        Ok(self.decode(lp, sdp))
    }

    pub fn decode(&self, lp: &MomentLp<T>, sdp: SdpSolution<T>) -> RelaxationResult<T> {
        let mut result = RelaxationResult {
            order: self.order,
            status: RelaxStatus::Unknown,
            y_star: None,
            w_star: None,
            lambda_star: None,
            c_k: None,
            b_k: None,
            infeasibility_multipliers: None,
            separating_tms: None,
            sdp: None,
        };
        match sdp.status {
            SdpStatus::Optimal | SdpStatus::NearOptimal => {
                result.status = if sdp.status == SdpStatus::Optimal {
                    RelaxStatus::Optimal
                } else {
                    RelaxStatus::NearOptimal
                };
                let w = self.moment_vector(&sdp);
                let y = w.restrict(&lp.support).expect("A inside rows");
                let c_k = riesz_pairing(&lp.objective, &y).expect("objective supported");
                let (lambda, _) = self.witness(&sdp);
                let b_k: T = lp.rhs.iter().zip(&lambda).map(|(b, l)| *b * *l).sum();
                result.w_star = Some(w);
                result.y_star = Some(y);
                result.lambda_star = Some(lambda);
                result.c_k = Some(c_k);
                result.b_k = Some(b_k);
            }
            SdpStatus::DualInfeasible => {
                // improving SOS-side ray: with lambda = -lambda_ray it gives
                // b'lambda < 0 and sum_i lambda_i a_i in Q_k(g) + I_2k(h)
                result.status = RelaxStatus::MomentInfeasible;
                let (lambda_ray, witness) = self.witness(&sdp);
                let lambda: Vec<T> = lambda_ray.iter().map(|v| -*v).collect();
                result.infeasibility_multipliers = Some((lambda, witness));
            }
            SdpStatus::PrimalInfeasible => {
                result.status = RelaxStatus::SosInfeasible;
                result.separating_tms = Some(self.moment_vector(&sdp));
            }
            SdpStatus::Unknown => {
                result.status = RelaxStatus::Unknown;
            }
        }
        result.sdp = Some(sdp);
        result
    }
}

/// Recovers `lambda` and the weighted-SOS witness from a solved relaxation
/// and re-verifies that they reproduce `c(lambda)` coefficientwise.
pub fn recover_dual_multipliers<T: Real>(
    lp: &MomentLp<T>,
    relax: &Relaxation<T>,
    sol: &SdpSolution<T>,
) -> Result<(Vec<T>, SosWitness<T>), HierarchyError> {
    let (lambda, witness) = relax.witness(sol);
    let mut target = lp.objective.clone();
    for (l, a) in lambda.iter().zip(&lp.constraints) {
        target = target.sub(&a.scale(*l));
    }
    verify_sos_identity(&target, &witness, T::from_f64_c(1e-6))?;
    Ok((lambda, witness))
}

/// Result of one order of the Lasserre lower-bound hierarchy.
#[derive(Debug, Clone)]
pub struct LasserreBound<T: Real> {
    pub order: u32,
    /// `f_k = max gamma` with `f - gamma` in the module; `None` means the
    /// SOS program is infeasible at this order (value is minus infinity).
    pub value: Option<T>,
    pub witness: Option<SosWitness<T>>,
    /// Moment-side optimum on `basis(n, 2k)` (normalized to mass one),
    /// usable for minimizer extraction.
    pub w_star: Option<Tms<T>>,
    pub status: RelaxStatus,
}

/// Builds the internal moment program whose SOS dual is the Lasserre bound
/// `f_k = max gamma s.t. f - gamma in I_2k(h) + Q_k(g)`.
pub fn lasserre_lp<T: Real>(f: &Poly<T>, set: &SemialgSet<T>) -> MomentLp<T> {
    let n = set.n();
    let support = f.support().with_constant();
    MomentLp::new(
        support,
        vec![Poly::constant(n, T::one())],
        vec![T::one()],
        f.clone(),
        set.clone(),
    )
}

/// `f_k = max gamma` such that `f - gamma` lies in the order-k truncated
/// quadratic module plus ideal of `K`. The moment side of the same solve is
/// `min <f, w>` over the relaxation cone with mass one.
pub fn lasserre_lower_bound<T: Real>(
    f: &Poly<T>,
    set: &SemialgSet<T>,
    k: u32,
    opts: &SolverOptions<T>,
) -> Result<LasserreBound<T>, HierarchyError> {
    let lp = lasserre_lp(f, set);
    let relax = build_relaxation(&lp, k)?;
    let res = relax.solve(&lp, opts)?;
    let mut out = LasserreBound {
        order: k,
        value: None,
        witness: None,
        w_star: res.w_star.clone(),
        status: res.status,
    };
    match res.status {
        RelaxStatus::Optimal | RelaxStatus::NearOptimal => {
            // the bound is the SOS-side value b_k = gamma*; the witness
            // expands to f - gamma*
            out.value = res.b_k;
            if let Some(sdp) = &res.sdp {
                let (_, witness) = relax.witness(sdp);
                out.witness = Some(witness);
            }
        }
        RelaxStatus::SosInfeasible => {
            // f_k = -infinity at this order
            out.value = None;
        }
        _ => {}
    }
    Ok(out)
}

/// Outcome of the SOS membership program
/// `find lambda: f - sum_i lambda_i lin_i in Q_k(g) + I_2k(h)`.
#[derive(Debug, Clone)]
pub enum SosMembership<T: Real> {
    Feasible { lambda: Vec<T>, witness: SosWitness<T> },
    /// Infeasible at this order, with a separating vector from the
    /// relaxation cone: `<lin_i, w> = 0` and `<f, w> < 0`.
    InfeasibleAtOrder { separating: Tms<T> },
    Inconclusive { status: RelaxStatus },
}

/// Solves the order-k SOS membership feasibility program. A `Feasible`
/// answer is always re-verified coefficientwise before being returned.
pub fn sos_membership<T: Real>(
    f: &Poly<T>,
    lin: &[Poly<T>],
    set: &SemialgSet<T>,
    k: u32,
    opts: &SolverOptions<T>,
) -> Result<SosMembership<T>, HierarchyError> {
    let mut support = f.support();
    for p in lin {
        support = support.union(&p.support());
    }
    let lp = MomentLp::new(
        support,
        lin.to_vec(),
        vec![T::zero(); lin.len()],
        f.clone(),
        set.clone(),
    );
    let relax = build_relaxation(&lp, k)?;
    let res = relax.solve(&lp, opts)?;
    match res.status {
        RelaxStatus::Optimal | RelaxStatus::NearOptimal => {
            let sdp = res.sdp.as_ref().expect("solved");
            match recover_dual_multipliers(&lp, &relax, sdp) {
                Ok((lambda, witness)) => Ok(SosMembership::Feasible { lambda, witness }),
                Err(HierarchyError::DecodeFailure { .. }) => {
                    Ok(SosMembership::Inconclusive { status: res.status })
                }
                Err(e) => Err(e),
            }
        }
        RelaxStatus::SosInfeasible => Ok(SosMembership::InfeasibleAtOrder {
            separating: res.separating_tms.expect("ray decoded"),
        }),
        s => Ok(SosMembership::Inconclusive { status: s }),
    }
}
