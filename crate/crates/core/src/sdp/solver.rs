//! Homogeneous self-dual interior-point method with Nesterov-Todd scaling
//! and a Mehrotra predictor-corrector, on dense linear algebra.
//!
//! The embedded model tracks `(x, y, s, tau, kappa)` with
//!
//! ```text
//!   A x - b tau          -> 0
//!   A'y + s - c tau      -> 0
//!   c'x - b'y + kappa    -> 0
//! ```
//!
//! and per-block complementarity `X S = mu I`, `tau kappa = mu`. At
//! convergence `tau > 0` yields an optimal pair `(x, y, s)/tau`, while
//! `tau -> 0` with `kappa > 0` yields an infeasibility ray.

use nalgebra::{DMatrix, DVector};

use super::{
    mat_to_svec, svec_len, Residuals, SdpError, SdpProblem, SdpSolution,
    SdpStatus, SolverOptions,
};
use crate::scalar::Real;

/// Sparse row over block cells, kept in natural (non-svec) coefficients:
/// an entry `(r, c, v)` with `r <= c` denotes the symmetric matrix with
/// `E_rc = E_cr = v`, paired with `X` as `trace(E X)`.
struct BlockCells<T> {
    cells: Vec<(usize, usize, T)>,
}

struct PackedRow<T> {
    free: Vec<(usize, T)>,
    blocks: Vec<BlockCells<T>>,
}

struct Packed<T: Real> {
    m: usize,
    free_dim: usize,
    blocks: Vec<usize>,
    rows: Vec<PackedRow<T>>,
    b: Vec<T>,
    c_row: PackedRow<T>,
    bnorm: T,
    cnorm: T,
}

fn pack_row<T: Real>(p: &SdpProblem<T>, e: &super::LinearExpr<T>) -> PackedRow<T> {
    let mut blocks: Vec<BlockCells<T>> =
        p.blocks.iter().map(|_| BlockCells { cells: Vec::new() }).collect();
    for (b, r, c, v) in &e.entries {
        // merge duplicate cells up front
        match blocks[*b].cells.iter_mut().find(|(rr, cc, _)| rr == r && cc == c) {
            Some((_, _, v0)) => *v0 += *v,
            None => blocks[*b].cells.push((*r, *c, *v)),
        }
    }
    let mut free: Vec<(usize, T)> = Vec::new();
    for (j, v) in &e.free {
        match free.iter_mut().find(|(jj, _)| jj == j) {
            Some((_, v0)) => *v0 += *v,
            None => free.push((*j, *v)),
        }
    }
    PackedRow { free, blocks }
}

fn pack<T: Real>(p: &SdpProblem<T>) -> Packed<T> {
    let rows: Vec<PackedRow<T>> = p.constraints.iter().map(|(e, _)| pack_row(p, e)).collect();
    let b: Vec<T> = p.constraints.iter().map(|(_, r)| *r).collect();
    let c_row = pack_row(p, &p.objective);
    let c_packed = p.pack_expr(&p.objective);
    let bnorm = b.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let cnorm = c_packed.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    Packed { m: rows.len(), free_dim: p.free_dim, blocks: p.blocks.clone(), rows, b, c_row, bnorm, cnorm }
}

/// Per-block cone state: current point, NT scaling factors, spectrum.
struct BlockState<T: Real> {
    s: usize,
    x: DMatrix<T>,
    z: DMatrix<T>, // dual slack block
    r: DMatrix<T>,
    rinv: DMatrix<T>,
    lambda: DVector<T>,
    w: DMatrix<T>, // r * r'
}

fn sym<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::from_f64_c(0.5)
}

fn cholesky_with_retry<T: Real>(
    m: &DMatrix<T>,
    what: &str,
) -> Result<nalgebra::Cholesky<T, nalgebra::Dyn>, SdpError> {
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch);
    }
    let n = m.nrows();
    let scale = m.diagonal().amax().max(T::one());
    let mut jitter = T::from_f64_c(1e-14) * scale;
    for _ in 0..4 {
        let mut mm = m.clone();
        for i in 0..n {
            mm[(i, i)] += jitter;
        }
        if let Some(ch) = mm.cholesky() {
            return Ok(ch);
        }
        jitter *= T::from_f64_c(100.0);
    }
    Err(SdpError::NumericalFailure(format!("cholesky breakdown in {what}")))
}

impl<T: Real> BlockState<T> {
    fn new(s: usize, scale_x: T, scale_z: T) -> Self {
        BlockState {
            s,
            x: DMatrix::identity(s, s) * scale_x,
            z: DMatrix::identity(s, s) * scale_z,
            r: DMatrix::identity(s, s),
            rinv: DMatrix::identity(s, s),
            lambda: DVector::from_element(s, scale_x),
            w: DMatrix::identity(s, s),
        }
    }

    /// Recomputes the NT scaling from the current `(x, z)`:
    /// `r^{-1} x r^{-T} = r' z r = diag(lambda)` and `w = r r'`.
    fn update_scaling(&mut self) -> Result<(), SdpError> {
        let lx = cholesky_with_retry(&self.x, "primal block")?;
        let lz = cholesky_with_retry(&self.z, "dual block")?;
        let lxm = lx.l();
        let lzm = lz.l();
        let g = lzm.transpose() * &lxm;
        let svd = g.svd(true, true);
        let u = svd.u.as_ref().expect("svd u");
        let vt = svd.v_t.as_ref().expect("svd v_t");
        let mut lam = svd.singular_values.clone();
        let floor = T::from_f64_c(1e-150);
        for v in lam.iter_mut() {
            if *v < floor {
                *v = floor;
            }
        }
        // r = L_x V diag(lam)^{-1/2},  r^{-1} = diag(lam)^{-1/2} U' L_z'
        let mut v = vt.transpose();
        for (j, l) in lam.iter().enumerate() {
            let sc = T::one() / l.sqrt();
            for i in 0..self.s {
                v[(i, j)] *= sc;
            }
        }
        self.r = &lxm * v;
        let mut ut = u.transpose() * lzm.transpose();
        for (i, l) in lam.iter().enumerate() {
            let sc = T::one() / l.sqrt();
            for j in 0..self.s {
                ut[(i, j)] *= sc;
            }
        }
        self.rinv = ut;
        self.w = &self.r * self.r.transpose();
        self.lambda = lam;
        Ok(())
    }
}

struct State<T: Real> {
    xf: DVector<T>,
    y: DVector<T>,
    blk: Vec<BlockState<T>>,
    tau: T,
    kappa: T,
}

/// Direction in the same layout as the state.
struct Direction<T: Real> {
    dxf: DVector<T>,
    dy: DVector<T>,
    dx: Vec<DMatrix<T>>,
    dz: Vec<DMatrix<T>>,
    dtau: T,
    dkappa: T,
}

fn row_dot_blocks<T: Real>(row: &PackedRow<T>, mats: &[DMatrix<T>]) -> T {
    let two = T::from_f64_c(2.0);
    let mut acc = T::zero();
    for (bi, cells) in row.blocks.iter().enumerate() {
        let m = &mats[bi];
        for (r, c, v) in &cells.cells {
            acc += if r == c { *v * m[(*r, *c)] } else { two * *v * m[(*r, *c)] };
        }
    }
    acc
}

/// `sum_i coeff_i * E_i` scattered into dense symmetric block matrices.
fn row_to_mats<T: Real>(row: &PackedRow<T>, sizes: &[usize]) -> Vec<DMatrix<T>> {
    let mut out: Vec<DMatrix<T>> = sizes.iter().map(|s| DMatrix::zeros(*s, *s)).collect();
    for (bi, cells) in row.blocks.iter().enumerate() {
        for (r, c, v) in &cells.cells {
            out[bi][(*r, *c)] += *v;
            if r != c {
                out[bi][(*c, *r)] += *v;
            }
        }
    }
    out
}

/// Unpivoted LDL' factorization for the quasi-definite KKT matrix.
struct Ldl<T: Real> {
    l: DMatrix<T>,
    d: DVector<T>,
}

impl<T: Real> Ldl<T> {
    fn factor(g: &DMatrix<T>) -> Result<Self, SdpError> {
        let n = g.nrows();
        let mut l = DMatrix::<T>::identity(n, n);
        let mut d = DVector::<T>::zeros(n);
        for j in 0..n {
            let mut dj = g[(j, j)];
            for k in 0..j {
                dj -= l[(j, k)] * l[(j, k)] * d[k];
            }
            if dj == T::zero() || !dj.is_finite_real() {
                return Err(SdpError::NumericalFailure("singular KKT pivot".into()));
            }
            d[j] = dj;
            for i in (j + 1)..n {
                let mut v = g[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)] * d[k];
                }
                l[(i, j)] = v / dj;
            }
        }
        Ok(Ldl { l, d })
    }

    fn solve(&self, rhs: &DVector<T>) -> DVector<T> {
        let n = rhs.len();
        let mut x = rhs.clone();
        for i in 0..n {
            for k in 0..i {
                let t = self.l[(i, k)] * x[k];
                x[i] -= t;
            }
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let t = self.l[(k, i)] * x[k];
                x[i] -= t;
            }
        }
        x
    }
}

/// Quasi-definite KKT solver: Ruiz-equilibrated LDL factorization with
/// compensated-residual iterative refinement against the unregularized
/// (but scaled) matrix. The late-iteration Schur complement is extremely
/// ill-conditioned on degenerate problems; plain f64 residuals floor out
/// near `|G| * eps`, so the refinement uses error-free transformations.
struct KktSolver<T: Real> {
    ldl: Ldl<T>,
    /// Scaled, unregularized matrix for residual evaluation.
    gs: DMatrix<T>,
    /// Ruiz scaling, applied symmetrically.
    scale: DVector<T>,
}

/// `rhs - g x` with FMA-based compensated accumulation per row.
fn residual_compensated<T: Real>(g: &DMatrix<T>, x: &DVector<T>, rhs: &DVector<T>) -> DVector<T> {
    let n = rhs.len();
    let mut out = DVector::<T>::zeros(n);
    for i in 0..n {
        let mut sum = rhs[i];
        let mut comp = T::zero();
        for j in 0..n {
            let p = -(g[(i, j)] * x[j]);
            // exact product error via fused multiply-add
            let perr = (-g[(i, j)]).mul_add(x[j], -p);
            // Neumaier two-sum
            let t = sum + p;
            let serr = if sum.abs() >= p.abs() { (sum - t) + p } else { (p - t) + sum };
            sum = t;
            comp += serr + perr;
        }
        out[i] = sum + comp;
    }
    out
}

impl<T: Real> KktSolver<T> {
    /// `g0` is the exact KKT matrix; `reg` is added as `+reg` on the first
    /// `m_pos` diagonal entries and `-reg` on the rest, after scaling.
    fn prepare(g0: &DMatrix<T>, m_pos: usize, reg: T) -> Result<Self, SdpError> {
        let n = g0.nrows();
        let mut scale = DVector::<T>::from_element(n, T::one());
        let mut gs = g0.clone();
        // Ruiz equilibration, a few sweeps
        for _ in 0..3 {
            for i in 0..n {
                let mut m = T::zero();
                for j in 0..n {
                    m = m.max(gs[(i, j)].abs());
                }
                if m > T::zero() {
                    let s = T::one() / m.sqrt();
                    scale[i] *= s;
                }
            }
            for i in 0..n {
                for j in 0..n {
                    gs[(i, j)] = g0[(i, j)] * scale[i] * scale[j];
                }
            }
        }
        let mut greg = gs.clone();
        let dmax = greg.diagonal().amax().max(T::one());
        for i in 0..n {
            if i < m_pos {
                greg[(i, i)] += reg * dmax;
            } else {
                greg[(i, i)] -= reg * dmax;
            }
        }
        let ldl = Ldl::factor(&greg)?;
        Ok(KktSolver { ldl, gs, scale })
    }

    fn solve(&self, rhs: &DVector<T>) -> DVector<T> {
        let n = rhs.len();
        let mut rs = rhs.clone();
        for i in 0..n {
            rs[i] *= self.scale[i];
        }
        let mut x = self.ldl.solve(&rs);
        let mut best_res = T::max_value().unwrap();
        let mut best_x = x.clone();
        for _ in 0..4 {
            let r = residual_compensated(&self.gs, &x, &rs);
            let rnorm = r.amax();
            if rnorm >= best_res {
                break;
            }
            best_res = rnorm;
            best_x = x.clone();
            x += self.ldl.solve(&r);
        }
        // final candidate may be better than the last recorded one
        let r = residual_compensated(&self.gs, &x, &rs);
        if r.amax() > best_res {
            x = best_x;
        }
        for i in 0..n {
            x[i] *= self.scale[i];
        }
        x
    }
}

/// Largest step `alpha` keeping `lambda + alpha * delta_tilde` PSD, where
/// `delta_tilde` is the direction mapped into scaled coordinates.
fn max_step_scaled<T: Real>(lambda: &DVector<T>, delta_scaled: &DMatrix<T>) -> T {
    let s = lambda.len();
    if s == 0 {
        return T::max_value().unwrap();
    }
    // psi = Lam^{-1/2} delta Lam^{-1/2}; alpha = 1 / max(0, -lmin(psi))
    let mut psi = delta_scaled.clone();
    for i in 0..s {
        for j in 0..s {
            psi[(i, j)] /= (lambda[i] * lambda[j]).sqrt();
        }
    }
    let eig = sym(&psi).symmetric_eigen();
    let lmin = eig.eigenvalues.iter().fold(T::zero(), |a, b| a.min(*b));
    if lmin >= T::zero() {
        T::max_value().unwrap()
    } else {
        -T::one() / lmin
    }
}

struct Metrics<T: Real> {
    pres: T,
    dres: T,
    relgap: T,
    pobj: T,
    dobj: T,
}

impl<T: Real> Metrics<T> {
    fn worst(&self) -> T {
        self.pres.max(self.dres).max(self.relgap)
    }
}

pub fn solve<T: Real>(
    problem: &SdpProblem<T>,
    opts: &SolverOptions<T>,
) -> Result<SdpSolution<T>, SdpError> {
    for (expr, _) in &problem.constraints {
        if expr.is_empty() {
            return Err(SdpError::BadProblem("constraint with empty functional".into()));
        }
    }
    let pk = pack(problem);
    let m = pk.m;
    let f = pk.free_dim;
    let nu: T = T::from_usize(pk.blocks.iter().sum::<usize>()).unwrap();

    // starting point: scaled identities, free variables at zero
    let scale_x = T::one() + pk.bnorm;
    let scale_z = T::one() + pk.cnorm;
    let mut st = State {
        xf: DVector::zeros(f),
        y: DVector::zeros(m),
        blk: pk.blocks.iter().map(|s| BlockState::new(*s, scale_x, scale_z)).collect(),
        tau: T::one(),
        kappa: T::one(),
    };

    let mu0 = (nu * scale_x * scale_z + T::one()) / (nu + T::one());
    let mut best: Option<(T, SdpSolution<T>)> = None;
    let mut progress_iter = 0usize;
    let mut best_ray = T::max_value().unwrap();
    let mut min_tau = T::max_value().unwrap();
    let mut iterations;

    let a_free: DMatrix<T> = {
        // dense m x f block of free-variable coefficients
        let mut a = DMatrix::zeros(m, f);
        for (i, row) in pk.rows.iter().enumerate() {
            for (j, v) in &row.free {
                a[(i, *j)] += *v;
            }
        }
        a
    };

    let trace = std::env::var("MOMENTCONE_SDP_TRACE").is_ok();
    for iter in 0..=opts.max_iterations {
        iterations = iter;

        // residuals
        let mut rp = DVector::<T>::zeros(m);
        for (i, row) in pk.rows.iter().enumerate() {
            let mut v = row_dot_blocks(row, &st.blk.iter().map(|b| b.x.clone()).collect::<Vec<_>>());
            for (j, coef) in &row.free {
                v += *coef * st.xf[*j];
            }
            rp[i] = v - pk.b[i] * st.tau;
        }
        // dual residual per block: sum_i y_i A_i + Z - C tau ; free: A_f' y - c_f tau
        let cmats = row_to_mats(&pk.c_row, &pk.blocks);
        let mut rd_blocks: Vec<DMatrix<T>> = Vec::with_capacity(pk.blocks.len());
        for (bi, bs) in st.blk.iter().enumerate() {
            let mut rd = &bs.z - &cmats[bi] * st.tau;
            for (i, row) in pk.rows.iter().enumerate() {
                for (r, c, v) in &row.blocks[bi].cells {
                    let add = *v * st.y[i];
                    rd[(*r, *c)] += add;
                    if r != c {
                        rd[(*c, *r)] += add;
                    }
                }
            }
            rd_blocks.push(rd);
        }
        let mut rd_free = DVector::<T>::zeros(f);
        for j in 0..f {
            let mut v = T::zero();
            for i in 0..m {
                v += a_free[(i, j)] * st.y[i];
            }
            // c_f
            let mut cf = T::zero();
            for (jj, cv) in &pk.c_row.free {
                if *jj == j {
                    cf += *cv;
                }
            }
            rd_free[j] = v - cf * st.tau;
        }
        let cx = row_dot_blocks(&pk.c_row, &st.blk.iter().map(|b| b.x.clone()).collect::<Vec<_>>())
            + pk.c_row.free.iter().map(|(j, v)| *v * st.xf[*j]).sum::<T>();
        let by: T = pk.b.iter().zip(st.y.iter()).map(|(b, y)| *b * *y).sum();
        let rg = cx - by + st.kappa;

        let xz: T = st.blk.iter().map(|b| (&b.x * &b.z).trace()).sum();
        let mu = (xz + st.tau * st.kappa) / (nu + T::one());

        // normalized convergence metrics
        let pres = rp.amax() / (st.tau * (T::one() + pk.bnorm));
        let dres = rd_blocks
            .iter()
            .map(|b| if b.nrows() > 0 { b.amax() } else { T::zero() })
            .fold(if f > 0 { rd_free.amax() } else { T::zero() }, |a, b| a.max(b))
            / (st.tau * (T::one() + pk.cnorm));
        let pobj = cx / st.tau;
        let dobj = by / st.tau;
        let relgap = (pobj - dobj).abs() / (T::one() + pobj.abs().max(dobj.abs()));
        let metrics = Metrics { pres, dres, relgap, pobj, dobj };

        let make_solution = |status: SdpStatus, scale: T| -> SdpSolution<T> {
            let dim = f + pk.blocks.iter().map(|s| svec_len(*s)).sum::<usize>();
            let mut primal = vec![T::zero(); dim];
            let mut slack = vec![T::zero(); dim];
            for j in 0..f {
                primal[j] = st.xf[j] / scale;
            }
            let mut off = f;
            for bs in &st.blk {
                let xs = mat_to_svec(&(&bs.x / scale));
                let zs = mat_to_svec(&(&bs.z / scale));
                primal[off..off + xs.len()].copy_from_slice(&xs);
                slack[off..off + zs.len()].copy_from_slice(&zs);
                off += xs.len();
            }
            SdpSolution {
                status,
                primal,
                dual_y: st.y.iter().map(|v| *v / scale).collect(),
                dual_slack: slack,
                primal_objective: metrics.pobj,
                dual_objective: metrics.dobj,
                residuals: Residuals { primal: metrics.pres, dual: metrics.dres, gap: metrics.relgap },
                iterations,
            }
        };

        if trace {
            eprintln!(
                "iter {iter}: mu={:.3e} pres={:.3e} dres={:.3e} gap={:.3e} tau={:.3e} kappa={:.3e}",
                mu.to_f64().unwrap_or(f64::NAN),
                pres.to_f64().unwrap_or(f64::NAN),
                dres.to_f64().unwrap_or(f64::NAN),
                relgap.to_f64().unwrap_or(f64::NAN),
                st.tau.to_f64().unwrap_or(f64::NAN),
                st.kappa.to_f64().unwrap_or(f64::NAN)
            );
        }
        if pres <= opts.tol_feas && dres <= opts.tol_feas && relgap <= opts.tol_gap {
            return Ok(make_solution(SdpStatus::Optimal, st.tau));
        }

        // infeasibility rays, normalized to b'y = 1 resp. c'x = -1
        let ray_quality_primal = if by > T::zero() {
            let mut worst = T::zero();
            for (bi, bs) in st.blk.iter().enumerate() {
                let mut r = bs.z.clone();
                for (i, row) in pk.rows.iter().enumerate() {
                    for (rr, cc, v) in &row.blocks[bi].cells {
                        let add = *v * st.y[i];
                        r[(*rr, *cc)] += add;
                        if rr != cc {
                            r[(*cc, *rr)] += add;
                        }
                    }
                }
                if r.nrows() > 0 {
                    worst = worst.max(r.amax());
                }
            }
            for j in 0..f {
                let mut v = T::zero();
                for i in 0..m {
                    v += a_free[(i, j)] * st.y[i];
                }
                worst = worst.max(v.abs());
            }
            Some(worst / (by * (T::one() + pk.cnorm)))
        } else {
            None
        };
        let ray_quality_dual = if cx < T::zero() {
            let mut worst = T::zero();
            for row in &pk.rows {
                let mut v =
                    row_dot_blocks(row, &st.blk.iter().map(|b| b.x.clone()).collect::<Vec<_>>());
                for (j, coef) in &row.free {
                    v += *coef * st.xf[*j];
                }
                worst = worst.max(v.abs());
            }
            Some(worst / (-cx * (T::one() + pk.bnorm)))
        } else {
            None
        };

        if let Some(q) = ray_quality_primal {
            if q <= opts.tol_infeas {
                return Ok(make_solution(SdpStatus::PrimalInfeasible, by));
            }
        }
        if let Some(q) = ray_quality_dual {
            if q <= opts.tol_infeas {
                return Ok(make_solution(SdpStatus::DualInfeasible, -cx));
            }
        }
        // tau collapse: accept a slightly looser ray
        let tau_collapsed = st.tau <= T::from_f64_c(1e-9) * T::one().max(st.kappa)
            && mu <= T::from_f64_c(1e-10) * mu0;
        if tau_collapsed {
            let loose = T::from_f64_c(1e-6);
            if let Some(q) = ray_quality_primal {
                if q <= loose {
                    return Ok(make_solution(SdpStatus::PrimalInfeasible, by));
                }
            }
            if let Some(q) = ray_quality_dual {
                if q <= loose {
                    return Ok(make_solution(SdpStatus::DualInfeasible, -cx));
                }
            }
            return Ok(make_solution(SdpStatus::Unknown, st.tau.max(T::from_f64_c(1e-300))));
        }

        // track the best iterate seen; stop when neither optimality nor
        // infeasibility detection is making progress
        let w = metrics.worst();
        let near = w <= opts.tol_near;
        if best.as_ref().map(|(bw, _)| w < *bw).unwrap_or(true) {
            let status = if near { SdpStatus::NearOptimal } else { SdpStatus::Unknown };
            best = Some((w, make_solution(status, st.tau)));
            progress_iter = iter;
        }
        let ray_now = ray_quality_primal
            .unwrap_or_else(|| T::max_value().unwrap())
            .min(ray_quality_dual.unwrap_or_else(|| T::max_value().unwrap()));
        if ray_now < best_ray {
            best_ray = ray_now;
            progress_iter = iter;
        }
        if st.tau < T::from_f64_c(0.5) * min_tau {
            min_tau = st.tau;
            progress_iter = iter;
        }
        if iter == opts.max_iterations || iter.saturating_sub(progress_iter) > 20 {
            break;
        }

        // NT scalings
        for bs in st.blk.iter_mut() {
            bs.update_scaling()?;
        }

        // Schur complement over the extended row list (constraints plus c)
        // ext[i][j] entries via T_j = W A_j W accumulated from sparse cells.
        let nblk = pk.blocks.len();
        let mut schur = DMatrix::<T>::zeros(m + 1, m + 1);
        {
            let two = T::from_f64_c(2.0);
            for bi in 0..nblk {
                let w = &st.blk[bi].w;
                let s = pk.blocks[bi];
                if s == 0 {
                    continue;
                }
                for jrow in 0..=m {
                    let cells = if jrow < m {
                        &pk.rows[jrow].blocks[bi].cells
                    } else {
                        &pk.c_row.blocks[bi].cells
                    };
                    if cells.is_empty() {
                        continue;
                    }
                    // t = W E_j W
                    let mut t = DMatrix::<T>::zeros(s, s);
                    for (r, c, v) in cells {
                        let wr = w.column(*r);
                        let wc = w.column(*c);
                        if r == c {
                            for p in 0..s {
                                let vp = *v * wr[p];
                                for q in 0..s {
                                    t[(p, q)] += vp * wc[q];
                                }
                            }
                        } else {
                            for p in 0..s {
                                let vp = *v * wr[p];
                                let vq = *v * wc[p];
                                for q in 0..s {
                                    t[(p, q)] += vp * wc[q] + vq * wr[q];
                                }
                            }
                        }
                    }
                    for irow in 0..=jrow {
                        let icells = if irow < m {
                            &pk.rows[irow].blocks[bi].cells
                        } else {
                            &pk.c_row.blocks[bi].cells
                        };
                        let mut acc = T::zero();
                        for (r, c, v) in icells {
                            acc += if r == c { *v * t[(*r, *c)] } else { two * *v * t[(*r, *c)] };
                        }
                        schur[(irow, jrow)] += acc;
                        if irow != jrow {
                            schur[(jrow, irow)] += acc;
                        }
                    }
                }
            }
        }

        // KKT matrix [[M, A_f], [A_f', 0]] with static regularization
        let kdim = m + f;
        let mut g0 = DMatrix::<T>::zeros(kdim, kdim);
        for i in 0..m {
            for j in 0..m {
                g0[(i, j)] = schur[(i, j)];
            }
        }
        for i in 0..m {
            for j in 0..f {
                g0[(i, m + j)] = a_free[(i, j)];
                g0[(m + j, i)] = a_free[(i, j)];
            }
        }
        let kkt = KktSolver::prepare(&g0, m, opts.static_reg)?;
        let solve_kkt = |rhs: &DVector<T>| -> DVector<T> { kkt.solve(rhs) };

        // D c_c and c'Dc come from the extended Schur row m
        let a_dc: DVector<T> = DVector::from_fn(m, |i, _| schur[(i, m)]);
        let c_dc = schur[(m, m)];

        // q2 = [A_c D c_c + b ; c_f]
        let mut q2 = DVector::<T>::zeros(kdim);
        for i in 0..m {
            q2[i] = a_dc[i] + pk.b[i];
        }
        for (j, v) in &pk.c_row.free {
            q2[m + j] += *v;
        }
        let u2 = solve_kkt(&q2);

        // e = [A_c D c_c - b ; c_f]
        let mut evec = DVector::<T>::zeros(kdim);
        for i in 0..m {
            evec[i] = a_dc[i] - pk.b[i];
        }
        for (j, v) in &pk.c_row.free {
            evec[m + j] += *v;
        }

        let apply_d = |z: &[DMatrix<T>]| -> Vec<DMatrix<T>> {
            st.blk.iter().zip(z).map(|(bs, zi)| &bs.w * zi * &bs.w).collect()
        };

        // one direction solve for a given (gamma, complementarity rhs)
        let direction = |gamma: T, vmats: &[DMatrix<T>], h_tk: T| -> Direction<T> {
            // q1 = [-gamma rp - A_c(gamma D rd_c + v) ; -gamma rd_f]
            let d_rd = apply_d(&rd_blocks);
            let mix: Vec<DMatrix<T>> = d_rd
                .iter()
                .zip(vmats)
                .map(|(a, b)| a * gamma + b)
                .collect();
            let mut q1 = DVector::<T>::zeros(kdim);
            for i in 0..m {
                q1[i] = -gamma * rp[i] - row_dot_blocks(&pk.rows[i], &mix);
            }
            for j in 0..f {
                q1[m + j] = -gamma * rd_free[j];
            }
            let u1 = solve_kkt(&q1);

            // rhs4 = -gamma rg - c_c'(gamma D rd_c + v) - h_tk / tau
            let rhs4 = -gamma * rg - row_dot_blocks(&pk.c_row, &mix) - h_tk / st.tau;
            let denom = evec.dot(&u2) - c_dc - st.kappa / st.tau;
            let dtau = (rhs4 - evec.dot(&u1)) / denom;
            let u = &u1 + &u2 * dtau;

            let dy = DVector::from_fn(m, |i, _| u[i]);
            let dxf = DVector::from_fn(f, |j, _| u[m + j]);

            // dz from dual feasibility, dx from the scaled complementarity
            let mut dz: Vec<DMatrix<T>> = Vec::with_capacity(nblk);
            for bi in 0..nblk {
                let mut d = &cmats[bi] * dtau - &rd_blocks[bi] * gamma;
                for (i, row) in pk.rows.iter().enumerate() {
                    for (r, c, v) in &row.blocks[bi].cells {
                        let add = *v * dy[i];
                        d[(*r, *c)] -= add;
                        if r != c {
                            d[(*c, *r)] -= add;
                        }
                    }
                }
                dz.push(d);
            }
            let ddz = apply_d(&dz);
            let dx: Vec<DMatrix<T>> =
                vmats.iter().zip(&ddz).map(|(v, w)| v - w).collect();
            let dkappa = (h_tk - st.kappa * dtau) / st.tau;
            Direction { dxf, dy, dx, dz, dtau, dkappa }
        };

        // scaled representation of a direction, for steps and correctors
        let scaled = |dir: &Direction<T>| -> (Vec<DMatrix<T>>, Vec<DMatrix<T>>) {
            let dxt: Vec<DMatrix<T>> = st
                .blk
                .iter()
                .zip(&dir.dx)
                .map(|(bs, d)| sym(&(&bs.rinv * d * bs.rinv.transpose())))
                .collect();
            let dzt: Vec<DMatrix<T>> = st
                .blk
                .iter()
                .zip(&dir.dz)
                .map(|(bs, d)| sym(&(bs.r.transpose() * d * &bs.r)))
                .collect();
            (dxt, dzt)
        };

        let max_step = |dxt: &[DMatrix<T>], dzt: &[DMatrix<T>], dir: &Direction<T>| -> T {
            let mut alpha = T::max_value().unwrap();
            for (bs, d) in st.blk.iter().zip(dxt) {
                alpha = alpha.min(max_step_scaled(&bs.lambda, d));
            }
            for (bs, d) in st.blk.iter().zip(dzt) {
                alpha = alpha.min(max_step_scaled(&bs.lambda, d));
            }
            if dir.dtau < T::zero() {
                alpha = alpha.min(-st.tau / dir.dtau);
            }
            if dir.dkappa < T::zero() {
                alpha = alpha.min(-st.kappa / dir.dkappa);
            }
            alpha
        };

        // predictor: sigma = 0, target complementarity -Lambda^2 / -tau kappa
        let v_aff: Vec<DMatrix<T>> = st
            .blk
            .iter()
            .map(|bs| {
                // R G R' with G = -Lambda (diagonal)
                let mut rg = bs.r.clone();
                for j in 0..bs.s {
                    for i in 0..bs.s {
                        rg[(i, j)] *= -bs.lambda[j];
                    }
                }
                &rg * bs.r.transpose()
            })
            .collect();
        let aff = direction(T::one(), &v_aff, -st.tau * st.kappa);
        let (axt, azt) = scaled(&aff);
        let alpha_aff = max_step(&axt, &azt, &aff).min(T::one());

        let sigma = {
            let s = (T::one() - alpha_aff).powi(3);
            s.min(T::one()).max(T::zero())
        };

        // corrector: H = sigma mu I - Lambda^2 - sym(dxt dzt)
        let v_comb: Vec<DMatrix<T>> = st
            .blk
            .iter()
            .zip(axt.iter().zip(&azt))
            .map(|(bs, (dxt, dzt))| {
                let s = bs.s;
                let cross = sym(&(dxt * dzt));
                let mut h = -cross;
                for i in 0..s {
                    h[(i, i)] += sigma * mu - bs.lambda[i] * bs.lambda[i];
                }
                // G = d .* H with d_ij = 2 / (lambda_i + lambda_j)
                let two = T::from_f64_c(2.0);
                for i in 0..s {
                    for j in 0..s {
                        h[(i, j)] *= two / (bs.lambda[i] + bs.lambda[j]);
                    }
                }
                &bs.r * h * bs.r.transpose()
            })
            .collect();
        let h_tk = sigma * mu - st.tau * st.kappa - aff.dtau * aff.dkappa;
        let comb = direction(T::one() - sigma, &v_comb, h_tk);
        let (cxt, czt) = scaled(&comb);
        let alpha = (max_step(&cxt, &czt, &comb) * opts.step_fraction).min(T::one());

        // update
        st.xf += &comb.dxf * alpha;
        st.y += &comb.dy * alpha;
        for (bs, (dx, dz)) in st.blk.iter_mut().zip(comb.dx.iter().zip(&comb.dz)) {
            bs.x += dx * alpha;
            bs.z += dz * alpha;
            bs.x = sym(&bs.x);
            bs.z = sym(&bs.z);
        }
        st.tau += comb.dtau * alpha;
        st.kappa += comb.dkappa * alpha;
        if st.tau <= T::zero() || st.kappa <= T::zero() {
            return Err(SdpError::NumericalFailure("tau/kappa left the cone".into()));
        }
    }

    // out of iterations: return the best iterate seen
    match best {
        Some((_, sol)) => Ok(sol),
        None => Err(SdpError::NumericalFailure("no iterate produced".into())),
    }
}
