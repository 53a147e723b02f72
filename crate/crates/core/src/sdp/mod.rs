//! A self-contained dense primal-dual interior-point solver for semidefinite
//! programs with block-diagonal PSD cones, free variables and linear equality
//! constraints.
//!
//! Problems are stated in the conic standard form
//!
//! ```text
//!   minimize    <c, x>
//!   subject to  A x = b,   x in R^f x S+^{n_1} x ... x S+^{n_B}
//! ```
//!
//! with the dual `max b'y  s.t.  c - A'y in {0}^f x S+^{n_1} x ...`.
//! Infeasibility is detected through a homogeneous self-dual embedding, so
//! primal/dual infeasibility emerges as ray convergence rather than as a
//! solver failure.

mod solver;
#[cfg(test)]
mod tests;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::Real;

pub use solver::solve;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("inconsistent problem dimensions: {0}")]
    BadProblem(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

/// Square-root of two, used by the scaled vectorization.
fn sqrt2<T: Real>() -> T {
    (T::one() + T::one()).sqrt()
}

/// Length of the scaled vectorization of a symmetric `s x s` matrix.
pub fn svec_len(s: usize) -> usize {
    s * (s + 1) / 2
}

/// Position of cell `(r, c)`, `r <= c`, within an svec block.
pub fn svec_index(r: usize, c: usize) -> usize {
    debug_assert!(r <= c);
    c * (c + 1) / 2 + r
}

/// Scaled vectorization: off-diagonal entries multiplied by sqrt(2) so that
/// `<X, Y> = svec(X) . svec(Y)`.
pub fn mat_to_svec<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    let s = m.nrows();
    let mut v = vec![T::zero(); svec_len(s)];
    let rt2 = sqrt2::<T>();
    for c in 0..s {
        for r in 0..=c {
            v[svec_index(r, c)] = if r == c { m[(r, c)] } else { m[(r, c)] * rt2 };
        }
    }
    v
}

pub fn svec_to_mat<T: Real>(v: &[T], s: usize) -> DMatrix<T> {
    let mut m = DMatrix::zeros(s, s);
    let rt2 = sqrt2::<T>();
    for c in 0..s {
        for r in 0..=c {
            let x = v[svec_index(r, c)];
            if r == c {
                m[(r, c)] = x;
            } else {
                m[(r, c)] = x / rt2;
                m[(c, r)] = x / rt2;
            }
        }
    }
    m
}

/// A sparse linear functional over the problem variables
/// `(u_1..u_f, X_1, ..., X_B)`.
///
/// Block entries are given on upper-triangle cells and denote the symmetric
/// pairing: an entry `(b, r, c, v)` contributes `v * X_rr` on the diagonal
/// and `v * 2 X_rc` off it, i.e. `<E, X>` for the symmetric `E` with
/// `E_rc = E_cr = v`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LinearExpr<T: Real> {
    pub free: Vec<(usize, T)>,
    pub entries: Vec<(usize, usize, usize, T)>,
}

impl<T: Real> LinearExpr<T> {
    pub fn new() -> Self {
        LinearExpr { free: Vec::new(), entries: Vec::new() }
    }

    pub fn free_term(mut self, j: usize, v: T) -> Self {
        self.push_free(j, v);
        self
    }

    pub fn push_free(&mut self, j: usize, v: T) {
        if v != T::zero() {
            self.free.push((j, v));
        }
    }

    /// Adds `v * <E_rc, X_b>` (symmetrized cell coefficient, see type docs).
    pub fn push_entry(&mut self, block: usize, r: usize, c: usize, v: T) {
        if v != T::zero() {
            let (r, c) = if r <= c { (r, c) } else { (c, r) };
            self.entries.push((block, r, c, v));
        }
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty() && self.entries.is_empty()
    }
}

/// A block-PSD conic program with free variables and equality constraints.
#[derive(Debug, Clone, Serialize)]
pub struct SdpProblem<T: Real> {
    pub free_dim: usize,
    pub blocks: Vec<usize>,
    pub objective: LinearExpr<T>,
    pub constraints: Vec<(LinearExpr<T>, T)>,
}

impl<T: Real> SdpProblem<T> {
    pub fn new(free_dim: usize, blocks: Vec<usize>) -> Self {
        assert!(blocks.iter().all(|s| *s >= 1), "block sizes must be positive");
        SdpProblem { free_dim, blocks, objective: LinearExpr::new(), constraints: Vec::new() }
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Total packed dimension: free variables plus svec'd blocks.
    pub fn packed_dim(&self) -> usize {
        self.free_dim + self.blocks.iter().map(|s| svec_len(*s)).sum::<usize>()
    }

    /// Packed offset of a block's svec range.
    pub fn block_offset(&self, b: usize) -> usize {
        self.free_dim + self.blocks[..b].iter().map(|s| svec_len(*s)).sum::<usize>()
    }

    pub fn set_objective(&mut self, obj: LinearExpr<T>) {
        self.check_expr(&obj);
        self.objective = obj;
    }

    pub fn add_constraint(&mut self, expr: LinearExpr<T>, rhs: T) {
        self.check_expr(&expr);
        self.constraints.push((expr, rhs));
    }

    fn check_expr(&self, e: &LinearExpr<T>) {
        for (j, _) in &e.free {
            assert!(*j < self.free_dim, "free variable index out of range");
        }
        for (b, r, c, _) in &e.entries {
            assert!(*b < self.blocks.len(), "block index out of range");
            assert!(*r <= *c && *c < self.blocks[*b], "cell out of range");
        }
    }

    /// Packs a functional into a dense svec-coordinate vector.
    pub(crate) fn pack_expr(&self, e: &LinearExpr<T>) -> Vec<T> {
        let mut v = vec![T::zero(); self.packed_dim()];
        for (j, val) in &e.free {
            v[*j] += *val;
        }
        let rt2 = sqrt2::<T>();
        for (b, r, c, val) in &e.entries {
            let idx = self.block_offset(*b) + svec_index(*r, *c);
            // <E, X> with E_rc = E_cr = v equals (sqrt2 * v) * svec(X)_rc off-diagonal
            v[idx] += if r == c { *val } else { *val * rt2 };
        }
        v
    }

    /// Functional value at a packed point.
    pub(crate) fn expr_value(&self, e: &LinearExpr<T>, x: &[T]) -> T {
        let mut acc = T::zero();
        for (j, val) in &e.free {
            acc += *val * x[*j];
        }
        let rt2 = sqrt2::<T>();
        for (b, r, c, val) in &e.entries {
            let idx = self.block_offset(*b) + svec_index(*r, *c);
            let coeff = if r == c { *val } else { *val * rt2 };
            acc += coeff * x[idx];
        }
        acc
    }

    /// Serializes in a sparse SDPA-like text layout (see `dump` docs).
    pub fn dump_sdpa(&self) -> String {
        dump_sdpa(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SdpStatus {
    Optimal,
    NearOptimal,
    PrimalInfeasible,
    DualInfeasible,
    Unknown,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Residuals<T: Real> {
    pub primal: T,
    pub dual: T,
    pub gap: T,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T: Real> {
    pub tol_feas: T,
    pub tol_gap: T,
    /// Ray quality required before declaring infeasibility.
    pub tol_infeas: T,
    /// Residual level at which a stalled solve still counts as NearOptimal.
    pub tol_near: T,
    pub max_iterations: usize,
    /// Static regularization added to the Schur diagonal.
    pub static_reg: T,
    /// Fraction of the step to the cone boundary actually taken.
    pub step_fraction: T,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            tol_feas: T::from_f64_c(1e-8),
            tol_gap: T::from_f64_c(1e-8),
            tol_infeas: T::from_f64_c(1e-9),
            tol_near: T::from_f64_c(1e-5),
            max_iterations: 200,
            static_reg: T::from_f64_c(1e-12),
            step_fraction: T::from_f64_c(0.98),
        }
    }
}

/// Primal/dual solution (or certificate ray) of an [`SdpProblem`].
///
/// For `PrimalInfeasible`, `dual_y`/`dual_slack` hold an improving ray with
/// `b'y = 1` and `A'y + s = 0, s in K*`. For `DualInfeasible`, `primal`
/// holds a ray with `c'x = -1`, `A x = 0`, `x in K`.
#[derive(Debug, Clone, Serialize)]
pub struct SdpSolution<T: Real> {
    pub status: SdpStatus,
    /// Packed primal point (free variables, then svec'd blocks).
    pub primal: Vec<T>,
    pub dual_y: Vec<T>,
    /// Packed dual slack; zero on the free coordinates.
    pub dual_slack: Vec<T>,
    pub primal_objective: T,
    pub dual_objective: T,
    pub residuals: Residuals<T>,
    pub iterations: usize,
}

impl<T: Real> SdpSolution<T> {
    /// The `b`-th primal PSD block as a matrix.
    pub fn primal_block(&self, p: &SdpProblem<T>, b: usize) -> DMatrix<T> {
        let s = p.blocks[b];
        let off = p.block_offset(b);
        svec_to_mat(&self.primal[off..off + svec_len(s)], s)
    }

    /// The `b`-th dual slack block as a matrix.
    pub fn dual_block(&self, p: &SdpProblem<T>, b: usize) -> DMatrix<T> {
        let s = p.blocks[b];
        let off = p.block_offset(b);
        svec_to_mat(&self.dual_slack[off..off + svec_len(s)], s)
    }

    pub fn free_values(&self, p: &SdpProblem<T>) -> &[T] {
        &self.primal[..p.free_dim]
    }
}

/// Outcome of re-checking a solution against its problem from scratch.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport<T: Real> {
    pub pass: bool,
    pub worst_violation: T,
    pub details: Vec<String>,
}

fn min_eig<T: Real>(m: &DMatrix<T>) -> T {
    if m.nrows() == 0 {
        return T::zero();
    }
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().fold(eig.eigenvalues[0], |a, b| if *b < a { *b } else { a })
}

/// Recomputes all residuals and ray inequalities of `sol` directly from the
/// problem data, flagging any violation larger than ten times the declared
/// tolerance. Report-only; never fails.
pub fn verify_certificate<T: Real>(
    p: &SdpProblem<T>,
    sol: &SdpSolution<T>,
    opts: &SolverOptions<T>,
) -> VerifyReport<T> {
    let mut details = Vec::new();
    let mut worst = T::zero();
    let mut record = |name: &str, violation: T, limit: T, details: &mut Vec<String>| -> bool {
        let ok = violation <= limit;
        if !ok {
            details.push(format!("{name}: violation {violation:?} exceeds {limit:?}"));
        }
        if violation > worst {
            worst = violation;
        }
        ok
    };

    let ten = T::from_f64_c(10.0);
    let bnorm = p
        .constraints
        .iter()
        .fold(T::zero(), |m, (_, r)| if r.abs() > m { r.abs() } else { m });
    let c_packed = p.pack_expr(&p.objective);
    let cnorm = c_packed.iter().fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m });

    let mut pass = true;
    match sol.status {
        SdpStatus::Optimal | SdpStatus::NearOptimal => {
            let tol = if sol.status == SdpStatus::Optimal { opts.tol_feas } else { opts.tol_near };
            // primal feasibility
            let mut pres = T::zero();
            for (expr, rhs) in &p.constraints {
                let v = (p.expr_value(expr, &sol.primal) - *rhs).abs();
                if v > pres {
                    pres = v;
                }
            }
            pres /= T::one() + bnorm;
            pass &= record("primal feasibility", pres, ten * tol, &mut details);

            // dual feasibility: c - A'y - s = 0 on all coordinates
            let mut rd = c_packed.clone();
            for (i, (expr, _)) in p.constraints.iter().enumerate() {
                let a = p.pack_expr(expr);
                for (rv, av) in rd.iter_mut().zip(&a) {
                    *rv -= *av * sol.dual_y[i];
                }
            }
            for (rv, sv) in rd.iter_mut().zip(&sol.dual_slack) {
                *rv -= *sv;
            }
            let dres = rd.iter().fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
                / (T::one() + cnorm);
            pass &= record("dual feasibility", dres, ten * tol, &mut details);

            // PSD-ness of both sides
            for b in 0..p.blocks.len() {
                let ex = -min_eig(&sol.primal_block(p, b));
                let es = -min_eig(&sol.dual_block(p, b));
                let scale = T::one() + sol.primal_block(p, b).amax();
                pass &= record("primal block psd", ex / scale, ten * tol, &mut details);
                let sscale = T::one() + sol.dual_block(p, b).amax();
                pass &= record("dual block psd", es / sscale, ten * tol, &mut details);
            }

            // objective gap
            let pobj: T = c_packed.iter().zip(&sol.primal).map(|(c, x)| *c * *x).sum();
            let dobj: T = p
                .constraints
                .iter()
                .zip(&sol.dual_y)
                .map(|((_, rhs), y)| *rhs * *y)
                .sum();
            let gap = (pobj - dobj).abs() / (T::one() + pobj.abs().max(dobj.abs()));
            let gtol = if sol.status == SdpStatus::Optimal { opts.tol_gap } else { opts.tol_near };
            pass &= record("duality gap", gap, ten * gtol, &mut details);
        }
        SdpStatus::PrimalInfeasible => {
            // ray is conic: normalize by b'y before checking
            let by: T = p
                .constraints
                .iter()
                .zip(&sol.dual_y)
                .map(|((_, rhs), y)| *rhs * *y)
                .sum();
            if by <= T::zero() {
                details.push("infeasibility ray has b'y <= 0".to_string());
                pass = false;
            } else {
                let mut r = vec![T::zero(); p.packed_dim()];
                for (i, (expr, _)) in p.constraints.iter().enumerate() {
                    let a = p.pack_expr(expr);
                    for (rv, av) in r.iter_mut().zip(&a) {
                        *rv += *av * sol.dual_y[i];
                    }
                }
                for (rv, sv) in r.iter_mut().zip(&sol.dual_slack) {
                    *rv += *sv;
                }
                let res = r.iter().fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
                    / (by * (T::one() + cnorm));
                pass &= record("ray equation A'y + s = 0", res, T::from_f64_c(1e-6), &mut details);
                for b in 0..p.blocks.len() {
                    let m = sol.dual_block(p, b);
                    let scale = by * (T::one() + m.amax());
                    pass &= record(
                        "ray slack psd",
                        -min_eig(&m) / scale,
                        T::from_f64_c(1e-6),
                        &mut details,
                    );
                }
            }
        }
        SdpStatus::DualInfeasible => {
            let cx: T = c_packed.iter().zip(&sol.primal).map(|(c, x)| *c * *x).sum();
            if cx >= T::zero() {
                details.push("improving ray has c'x >= 0".to_string());
                pass = false;
            } else {
                let scale = -cx;
                let mut res = T::zero();
                for (expr, _) in &p.constraints {
                    let v = p.expr_value(expr, &sol.primal).abs();
                    if v > res {
                        res = v;
                    }
                }
                pass &= record(
                    "ray equation A x = 0",
                    res / (scale * (T::one() + bnorm)),
                    T::from_f64_c(1e-6),
                    &mut details,
                );
                for b in 0..p.blocks.len() {
                    let m = sol.primal_block(p, b);
                    let bscale = scale * (T::one() + m.amax());
                    pass &= record(
                        "ray psd",
                        -min_eig(&m) / bscale,
                        T::from_f64_c(1e-6),
                        &mut details,
                    );
                }
            }
        }
        SdpStatus::Unknown => {
            details.push("status Unknown: nothing to verify".to_string());
        }
    }

    VerifyReport { pass, worst_violation: worst, details }
}

/// Writes the problem in a sparse SDPA-like text layout.
///
/// The emitted program is the dual form `max b'y` with slack
/// `F_0 - sum_i y_i F_i` required PSD, which is the SDPA convention up to the
/// sign of the objective (SDPA minimizes `c'y` with `c = -b`). Free equality
/// rows are encoded as a final diagonal block holding each equality twice
/// with opposite signs. Lines:
///
/// ```text
/// m
/// nblocks
/// <block sizes, negative = diagonal>
/// <m objective entries (-b)>
/// <matno> <blkno> <i> <j> <value>     (matno 0 is F_0, 1-based blocks/cells)
/// ```
pub fn dump_sdpa<T: Real>(p: &SdpProblem<T>) -> String {
    use std::fmt::Write;
    let m = p.num_constraints();
    let mut out = String::new();
    let _ = writeln!(out, "\"momentcone sdp dump: dual form, free rows as split diagonal block\"");
    let _ = writeln!(out, "{m}");
    let has_free = p.free_dim > 0;
    let nblocks = p.blocks.len() + usize::from(has_free);
    let _ = writeln!(out, "{nblocks}");
    {
        let mut sizes: Vec<String> = p.blocks.iter().map(|s| s.to_string()).collect();
        if has_free {
            sizes.push(format!("-{}", 2 * p.free_dim));
        }
        let _ = writeln!(out, "{}", sizes.join(" "));
    }
    {
        let rhs: Vec<String> = p
            .constraints
            .iter()
            .map(|(_, r)| format!("{:?}", (-*r).to_f64().unwrap_or(f64::NAN)))
            .collect();
        let _ = writeln!(out, "{}", rhs.join(" "));
    }
    let emit = |mat: usize, expr: &LinearExpr<T>, out: &mut String| {
        for (b, r, c, v) in &expr.entries {
            let _ = writeln!(
                out,
                "{mat} {} {} {} {:?}",
                b + 1,
                r + 1,
                c + 1,
                v.to_f64().unwrap_or(f64::NAN)
            );
        }
        for (j, v) in &expr.free {
            let blk = p.blocks.len() + 1;
            let vf = v.to_f64().unwrap_or(f64::NAN);
            let _ = writeln!(out, "{mat} {blk} {} {} {vf:?}", 2 * j + 1, 2 * j + 1);
            let _ = writeln!(out, "{mat} {blk} {} {} {:?}", 2 * j + 2, 2 * j + 2, -vf);
        }
    };
    emit(0, &p.objective, &mut out);
    for (i, (expr, _)) in p.constraints.iter().enumerate() {
        emit(i + 1, expr, &mut out);
    }
    out
}
