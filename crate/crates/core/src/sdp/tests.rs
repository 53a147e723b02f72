use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::*;

type P = SdpProblem<f64>;

fn opts() -> SolverOptions<f64> {
    SolverOptions::default()
}

#[test]
fn unconstrained_min_over_ray() {
    // min x s.t. x >= 0 (1x1 psd block), no constraints
    let mut p = P::new(0, vec![1]);
    let mut obj = LinearExpr::new();
    obj.push_entry(0, 0, 0, 1.0);
    p.set_objective(obj);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!(sol.primal_objective.abs() < 1e-7, "pobj = {}", sol.primal_objective);
}

#[test]
fn arithmetic_geometric_mean_corner() {
    // min X11 + X22 s.t. X12 = 1, X psd: optimum 2 at [[1,1],[1,1]]
    // (oracle: X11*X22 >= X12^2 = 1 and AM-GM give X11+X22 >= 2)
    let mut p = P::new(0, vec![2]);
    let mut obj = LinearExpr::new();
    obj.push_entry(0, 0, 0, 1.0);
    obj.push_entry(0, 1, 1, 1.0);
    p.set_objective(obj);
    let mut con = LinearExpr::new();
    con.push_entry(0, 0, 1, 0.5); // <E, X> = 2 * 0.5 * X12 = X12
    p.add_constraint(con, 1.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.primal_objective - 2.0).abs() < 1e-6);
    let x = sol.primal_block(&p, 0);
    assert!((x[(0, 0)] - 1.0).abs() < 1e-5);
    assert!((x[(0, 1)] - 1.0).abs() < 1e-5);
    let report = verify_certificate(&p, &sol, &opts());
    assert!(report.pass, "{:?}", report.details);
}

#[test]
fn negative_mass_is_primal_infeasible() {
    // x = -1 on a 1x1 psd block
    let mut p = P::new(0, vec![1]);
    let mut con = LinearExpr::new();
    con.push_entry(0, 0, 0, 1.0);
    p.add_constraint(con, -1.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SdpStatus::PrimalInfeasible);
    let report = verify_certificate(&p, &sol, &opts());
    assert!(report.pass, "{:?}", report.details);

    // rays are conic: scaling by 2 still verifies
    let mut scaled = sol.clone();
    for v in scaled.dual_y.iter_mut() {
        *v *= 2.0;
    }
    for v in scaled.dual_slack.iter_mut() {
        *v *= 2.0;
    }
    let report = verify_certificate(&p, &scaled, &opts());
    assert!(report.pass, "{:?}", report.details);
}

#[test]
fn unbounded_below_is_dual_infeasible() {
    // min -X11 s.t. X22 = 1: X11 free to grow
    let mut p = P::new(0, vec![2]);
    let mut obj = LinearExpr::new();
    obj.push_entry(0, 0, 0, -1.0);
    p.set_objective(obj);
    let mut con = LinearExpr::new();
    con.push_entry(0, 1, 1, 1.0);
    p.add_constraint(con, 1.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SdpStatus::DualInfeasible);
    let report = verify_certificate(&p, &sol, &opts());
    assert!(report.pass, "{:?}", report.details);
}

#[test]
fn free_variables_tie_blocks() {
    // min u s.t. u - X11 = 0, X11 = 2  =>  u = 2
    let mut p = P::new(1, vec![1]);
    let obj = LinearExpr::new().free_term(0, 1.0);
    p.set_objective(obj);
    let mut tie = LinearExpr::new().free_term(0, 1.0);
    tie.push_entry(0, 0, 0, -1.0);
    p.add_constraint(tie, 0.0);
    let mut pin = LinearExpr::new();
    pin.push_entry(0, 0, 0, 1.0);
    p.add_constraint(pin, 2.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.primal_objective - 2.0).abs() < 1e-6);
    assert!((sol.free_values(&p)[0] - 2.0).abs() < 1e-6);
}

/// Random problems with a planted primal-dual optimal pair.
fn random_planted(seed: u64, s: usize, m: usize, rank: usize) -> (P, f64) {
    let mut rng = StdRng::seed_from_u64(seed);
    // orthogonal basis via QR of a random matrix
    let a = DMatrix::<f64>::from_fn(s, s, |_, _| rng.gen_range(-1.0..1.0));
    let qr = a.qr();
    let q = qr.q();
    let mut dx = DMatrix::<f64>::zeros(s, s);
    let mut ds = DMatrix::<f64>::zeros(s, s);
    for i in 0..rank {
        dx[(i, i)] = rng.gen_range(0.5..2.0);
    }
    for i in rank..s {
        ds[(i, i)] = rng.gen_range(0.5..2.0);
    }
    let xstar = &q * dx * q.transpose();
    let sstar = &q * ds * q.transpose();
    let ystar: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut p = P::new(0, vec![s]);
    let mut rows = Vec::new();
    for _ in 0..m {
        let mut e = LinearExpr::new();
        let mut em = DMatrix::<f64>::zeros(s, s);
        for r in 0..s {
            for c in r..s {
                let v = rng.gen_range(-1.0..1.0);
                e.push_entry(0, r, c, v);
                em[(r, c)] = v;
                em[(c, r)] = v;
            }
        }
        rows.push(em);
        p.add_constraint(e, 0.0);
    }
    // b = <A_i, X*>, C = sum y_i A_i + S*
    for (i, em) in rows.iter().enumerate() {
        p.constraints[i].1 = (em * &xstar).trace();
    }
    let mut cmat = sstar.clone();
    for (i, em) in rows.iter().enumerate() {
        cmat += em * ystar[i];
    }
    let mut obj = LinearExpr::new();
    for r in 0..s {
        for c in r..s {
            obj.push_entry(0, r, c, cmat[(r, c)]);
        }
    }
    p.set_objective(obj);
    let optimum = (cmat * &xstar).trace();
    (p, optimum)
}

#[test]
fn random_planted_optima() {
    for seed in 0..20u64 {
        let s = 2 + (seed % 4) as usize;
        let m = 1 + (seed % 3) as usize;
        let rank = 1 + (seed as usize % s.max(1)).min(s - 1);
        let (p, want) = random_planted(seed, s, m, rank);
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal, "seed {seed}");
        assert!(
            (sol.primal_objective - want).abs() <= 1e-6 * (1.0 + want.abs()),
            "seed {seed}: got {}, want {want}",
            sol.primal_objective
        );
        // weak duality on the returned iterate
        assert!(
            sol.primal_objective >= sol.dual_objective - 1e-6 * (1.0 + sol.primal_objective.abs()),
            "seed {seed}"
        );
        let report = verify_certificate(&p, &sol, &opts());
        assert!(report.pass, "seed {seed}: {:?}", report.details);
    }
}

#[test]
fn row_scaling_leaves_objective_unchanged() {
    let (p, want) = random_planted(99, 3, 2, 2);
    let mut scaled = p.clone();
    let factors = [0.1, 10.0];
    for (i, (expr, rhs)) in scaled.constraints.iter_mut().enumerate() {
        let f = factors[i % 2];
        for (_, _, _, v) in expr.entries.iter_mut() {
            *v *= f;
        }
        for (_, v) in expr.free.iter_mut() {
            *v *= f;
        }
        *rhs *= f;
    }
    let s1 = solve(&p, &opts()).unwrap();
    let s2 = solve(&scaled, &opts()).unwrap();
    assert_eq!(s1.status, SdpStatus::Optimal);
    assert_eq!(s2.status, SdpStatus::Optimal);
    assert!((s1.primal_objective - s2.primal_objective).abs() <= 1e-6 * (1.0 + want.abs()));
}

#[test]
fn corrupted_solution_is_flagged() {
    let (p, _) = random_planted(7, 3, 2, 1);
    let sol = solve(&p, &opts()).unwrap();
    let mut bad = sol.clone();
    bad.primal[0] += 0.5;
    let report = verify_certificate(&p, &bad, &opts());
    assert!(!report.pass);
}

#[test]
fn sdpa_dump_mentions_all_blocks() {
    let (p, _) = random_planted(3, 2, 2, 1);
    let text = p.dump_sdpa();
    assert!(text.contains('\n'));
    let mut lines = text.lines();
    let _comment = lines.next().unwrap();
    assert_eq!(lines.next().unwrap().trim(), "2");
    assert_eq!(lines.next().unwrap().trim(), "1");
}

#[test]
fn svec_roundtrip() {
    let m = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
    let v = mat_to_svec(&m);
    assert_eq!(v.len(), 3);
    let back = svec_to_mat(&v, 2);
    assert!((&back - &m).amax() < 1e-15);
    // inner products agree
    let m2 = DMatrix::<f64>::from_row_slice(2, 2, &[0.3, -0.2, -0.2, 0.7]);
    let v2 = mat_to_svec(&m2);
    let dot: f64 = v.iter().zip(&v2).map(|(a, b)| a * b).sum();
    assert!((dot - (&m * &m2).trace()).abs() < 1e-14);
}
