//! Scratch driver for the benchmark problems; prints what each search finds.

use momentcone::algebra::{basis, homogeneous_basis, Poly, Support};
use momentcone::apps::{
    copositivity_margin, cp_completion, cube_set, simplex_set, soep_check, sphere_set,
    CpObjective, PartialSymMatrix, SoepForm,
};
use momentcone::feascert::{find_feasible_dual, find_feasible_moment, FeasCertOptions};
use momentcone::hierarchy::MomentLp;
use momentcone::linopt::{solve_moment_lp, LinOptOptions};
use nalgebra::DMatrix;

fn poly(n: usize, terms: &[(&[u32], f64)]) -> Poly<f64> {
    Poly::from_terms(n, &terms.iter().map(|(e, c)| (e.to_vec(), *c)).collect::<Vec<_>>())
}

fn main() {
    let which: Vec<String> = std::env::args().skip(1).collect();
    let run = |name: &str| which.is_empty() || which.iter().any(|w| w == name);

    if run("copositive") {
        // max lambda: (sum x)^2 - lambda (x1x2 - x2x3 + x3x4 - x5x6 + x6x1) copositive
        let b = DMatrix::<f64>::from_element(6, 6, 1.0);
        let mut d = DMatrix::<f64>::zeros(6, 6);
        for (i, j, v) in [(0, 1, 0.5), (1, 2, -0.5), (2, 3, 0.5), (4, 5, -0.5), (5, 0, 0.5)] {
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
        let t0 = std::time::Instant::now();
        let mut lo = LinOptOptions::default();
        lo.deep_membership = true;
        lo.max_order = 3;
        let out = copositivity_margin(&b, &[d], &[1.0], &lo).unwrap();
        println!(
            "copositive: kind={:?} margin={:?} gap_closed={} orders={:?} [{:?}]",
            out.outcome.kind,
            out.margin,
            out.outcome.gap_closed,
            out.outcome.history.iter().map(|r| (r.order, r.flat)).collect::<Vec<_>>(),
            t0.elapsed()
        );
        if let Some(m) = &out.outcome.measure {
            println!("  atoms: {:?}", m.atoms());
            println!("  weights: {:?}", m.weights());
        }
    }

    if run("cp") {
        let known = vec![
            (0usize, 1usize, 1.0),
            (0, 2, 2.0),
            (0, 3, 3.0),
            (0, 4, 4.0),
            (1, 2, 1.0),
            (1, 3, 2.0),
            (1, 4, 3.0),
            (2, 3, 1.0),
            (2, 4, 2.0),
            (3, 4, 1.0),
        ];
        let pm = PartialSymMatrix::new(5, known);
        let t0 = std::time::Instant::now();
        let opts = LinOptOptions { deep_membership: true, ..LinOptOptions::default() };
        let out = cp_completion(&pm, CpObjective::MinTrace, &opts).unwrap();
        println!(
            "cp: kind={:?} c_min={:?} history={:?} [{:?}]",
            out.outcome.kind,
            out.outcome.c_min,
            out.outcome
                .history
                .iter()
                .map(|r| (r.order, r.status, r.flat, r.note.clone()))
                .collect::<Vec<_>>(),
            t0.elapsed()
        );
        if let Some(c) = &out.completed {
            println!("  diag: {:?}", (0..5).map(|i| c[(i, i)]).collect::<Vec<_>>());
            println!("  trace: {}", (0..5).map(|i| c[(i, i)]).sum::<f64>());
        }
    }

    if run("ball") {
        // ball sextic: max l1 + l2, two constraints
        let c = poly(
            2,
            &[
                (&[4, 2], 1.0),
                (&[2, 2], 6.0),
                (&[1, 4], 4.0),
                (&[0, 6], 1.0),
                (&[0, 2], 1.0),
            ],
        );
        let a1 = poly(2, &[(&[3, 2], 1.0), (&[1, 2], 1.0)]);
        let a2 = poly(2, &[(&[2, 4], 1.0), (&[0, 4], 1.0)]);
        let set = momentcone::apps::ball_set::<f64>(2);
        let lp = MomentLp::new(basis(2, 6), vec![a1, a2], vec![1.0, 1.0], c, set);
        let opts = LinOptOptions { deep_membership: true, ..LinOptOptions::default() };
        let t0 = std::time::Instant::now();
        let out = solve_moment_lp(&lp, &opts).unwrap();
        println!(
            "ball: kind={:?} lambda={:?} c_min={:?} b_max={:?} gap={} hist={:?} [{:?}]",
            out.kind,
            out.lambda_star,
            out.c_min,
            out.b_max,
            out.gap_closed,
            out.history
                .iter()
                .map(|r| (r.order, r.status, r.flat, r.note.clone()))
                .collect::<Vec<_>>(),
            t0.elapsed()
        );
    }

    if run("sphere1") {
        let c = poly(3, &[(&[6, 0, 0], 1.0), (&[0, 6, 0], 1.0), (&[0, 0, 6], 1.0)]);
        let a1 = poly(3, &[(&[2, 4, 0], 1.0), (&[0, 2, 4], 1.0), (&[4, 0, 2], 1.0)]);
        let a2 = poly(3, &[(&[3, 3, 0], 1.0), (&[0, 3, 3], 1.0), (&[3, 0, 3], 1.0)]);
        let a3 = poly(3, &[(&[5, 1, 0], 1.0), (&[0, 5, 1], 1.0), (&[1, 0, 5], 1.0)]);
        let set = sphere_set::<f64>(3);
        let lp = MomentLp::new(
            homogeneous_basis(3, 6),
            vec![a1, a2, a3],
            vec![1.0, 1.0, 1.0],
            c,
            set,
        );
        let opts = LinOptOptions { deep_membership: true, ..LinOptOptions::default() };
        let t0 = std::time::Instant::now();
        let out = solve_moment_lp(&lp, &opts).unwrap();
        println!(
            "sphere1: kind={:?} lambda={:?} c_min={:?} gap={} hist={:?} [{:?}]",
            out.kind,
            out.lambda_star,
            out.c_min,
            out.gap_closed,
            out.history
                .iter()
                .map(|r| (r.order, r.status, r.flat, r.note.clone()))
                .collect::<Vec<_>>(),
            t0.elapsed()
        );
        if let Some(m) = &out.measure {
            println!("  atoms: {:?} weights {:?}", m.atoms(), m.weights());
        }
    }

    if run("sphere2") {
        // min sum x_i^6 with four moment constraints; the formulation adds
        // sum(x) >= 0 to pin atom signs
        let c = poly(3, &[(&[6, 0, 0], 1.0), (&[0, 6, 0], 1.0), (&[0, 0, 6], 1.0)]);
        let a1 = poly(3, &[(&[3, 3, 0], 1.0), (&[0, 3, 3], -1.0)]);
        let a2 = poly(3, &[(&[3, 3, 0], 1.0), (&[3, 0, 3], -1.0)]);
        let a3 = poly(3, &[(&[2, 2, 2], 1.0)]);
        let a4 = poly(3, &[(&[4, 2, 0], 1.0), (&[0, 4, 2], 1.0), (&[2, 0, 4], 1.0)]);
        let halfspace = poly(3, &[(&[1, 0, 0], 1.0), (&[0, 1, 0], 1.0), (&[0, 0, 1], 1.0)]);
        let set = sphere_set::<f64>(3).with_inequality(halfspace);
        let lp = MomentLp::new(
            homogeneous_basis(3, 6),
            vec![a1, a2, a3, a4],
            vec![0.0, 0.0, 1.0, 3.0],
            c,
            set,
        );
        let opts = LinOptOptions { deep_membership: true, ..LinOptOptions::default() };
        let t0 = std::time::Instant::now();
        let out = solve_moment_lp(&lp, &opts).unwrap();
        println!(
            "sphere2: kind={:?} c_min={:?} gap={} hist={:?} [{:?}]",
            out.kind,
            out.c_min,
            out.gap_closed,
            out.history
                .iter()
                .map(|r| (r.order, r.status, r.flat, r.note.clone()))
                .collect::<Vec<_>>(),
            t0.elapsed()
        );
        if let Some(m) = &out.measure {
            println!("  atoms: {:?} weights {:?}", m.atoms(), m.weights());
        }
    }

    if run("reznick1") {
        // max lambda: (|x|^2)^3 - lambda sum x_i^6 is a sum of sixth powers
        let mut sq = Poly::<f64>::zero(3);
        for i in 0..3 {
            let mut e = vec![0u32; 3];
            e[i] = 2;
            sq.add_term(momentcone::algebra::MultiIndex::new(e), 1.0);
        }
        let f = SoepForm::new(sq.mul(&sq).mul(&sq)).unwrap();
        let z1 = SoepForm::new(poly(
            3,
            &[(&[6, 0, 0], 1.0), (&[0, 6, 0], 1.0), (&[0, 0, 6], 1.0)],
        ))
        .unwrap();
        let opts = LinOptOptions { deep_membership: true, ..LinOptOptions::default() };
        let t0 = std::time::Instant::now();
        let out = soep_check(&f, &[z1], &[1.0], &opts).unwrap();
        println!(
            "reznick1: kind={:?} lambda={:?} hist={:?} [{:?}]",
            out.outcome.kind,
            out.lambda,
            out.outcome
                .history
                .iter()
                .map(|r| (r.order, r.status, r.flat, r.note.clone()))
                .collect::<Vec<_>>(),
            t0.elapsed()
        );
    }

    if run("reznick2") {
        let mut sq = Poly::<f64>::zero(3);
        for i in 0..3 {
            let mut e = vec![0u32; 3];
            e[i] = 2;
            sq.add_term(momentcone::algebra::MultiIndex::new(e), 1.0);
        }
        let f = SoepForm::new(sq.mul(&sq).mul(&sq)).unwrap();
        let z1 = SoepForm::new(poly(
            3,
            &[(&[3, 3, 0], 1.0), (&[0, 3, 3], 1.0), (&[3, 0, 3], 1.0)],
        ))
        .unwrap();
        let z2 = SoepForm::new(poly(3, &[(&[2, 2, 2], 1.0)])).unwrap();
        let opts = LinOptOptions { deep_membership: true, ..LinOptOptions::default() };
        let t0 = std::time::Instant::now();
        let out = soep_check(&f, &[z1, z2], &[1.0, 1.0], &opts).unwrap();
        println!(
            "reznick2: kind={:?} lambda={:?} hist={:?} [{:?}]",
            out.outcome.kind,
            out.lambda,
            out.outcome
                .history
                .iter()
                .map(|r| (r.order, r.status, r.flat, r.note.clone()))
                .collect::<Vec<_>>(),
            t0.elapsed()
        );
        if let Some(d) = &out.decomposition {
            println!("  power terms: {}", d.len());
        }
    }

    if run("cube51") {
        let a1 = poly(3, &[(&[1, 1, 0], 1.0), (&[0, 1, 1], 1.0), (&[1, 0, 1], 1.0)]);
        let a2 = poly(3, &[(&[2, 2, 0], 1.0), (&[0, 2, 2], 1.0), (&[2, 0, 2], 1.0)]);
        let a3 = poly(3, &[(&[3, 2, 0], 1.0), (&[0, 3, 2], 1.0), (&[2, 0, 3], 1.0)]);
        let set = cube_set::<f64>(3);
        let t0 = std::time::Instant::now();
        let out = find_feasible_moment(
            &[a1, a2, a3],
            &[0.0, 1.0, 1.0],
            &basis(3, 6),
            &set,
            &FeasCertOptions::default(),
        )
        .unwrap();
        match &out {
            momentcone::feascert::MomentFeasibility::Feasible { measure, .. } => {
                println!("cube51: feasible [{:?}]", t0.elapsed());
                println!("  atoms: {:?} weights {:?}", measure.atoms(), measure.weights());
            }
            other => println!("cube51: {other:?} [{:?}]", t0.elapsed()),
        }
    }

    if run("ex52") {
        let c = poly(
            3,
            &[(&[6, 0, 0], 1.0), (&[2, 2, 2], 1.0), (&[4, 2, 0], -1.0), (&[4, 0, 2], -1.0)],
        );
        let a1 = poly(
            3,
            &[(&[0, 6, 0], 1.0), (&[2, 2, 2], 1.0), (&[0, 4, 2], -1.0), (&[2, 4, 0], -1.0)],
        );
        let a2 = poly(
            3,
            &[(&[0, 0, 6], 1.0), (&[2, 2, 2], 1.0), (&[2, 0, 4], -1.0), (&[0, 2, 4], -1.0)],
        );
        let set = sphere_set::<f64>(3);
        let t0 = std::time::Instant::now();
        let out = find_feasible_dual(&c, &[a1, a2], &set, &FeasCertOptions::default()).unwrap();
        match &out {
            momentcone::feascert::DualFeasibility::Feasible { lambda, order, .. } => {
                println!("ex52: feasible lambda={lambda:?} at k={order} [{:?}]", t0.elapsed());
            }
            other => println!("ex52: {other:?} [{:?}]", t0.elapsed()),
        }
    }

    if run("ex54") {
        let a1 = poly(2, &[(&[2, 2], 1.0)]);
        let a2 = poly(2, &[(&[4, 0], 1.0), (&[0, 4], 1.0)]);
        let a3 = poly(2, &[(&[6, 0], 1.0), (&[0, 6], 1.0)]);
        let circle = momentcone::moments::SemialgSet::new(
            2,
            vec![poly(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0), (&[0, 0], -1.0)])],
            vec![],
        )
        .with_ball_radius(1.0);
        let t0 = std::time::Instant::now();
        let out = find_feasible_moment(
            &[a1, a2, a3],
            &[1.0, 1.0, 1.0],
            &basis(2, 6),
            &circle,
            &FeasCertOptions::default(),
        )
        .unwrap();
        match &out {
            momentcone::feascert::MomentFeasibility::Infeasible(cert) => {
                println!("ex54: infeasible [{:?}]", t0.elapsed());
                if let momentcone::feascert::Certificate::MomentInfeasible {
                    lambda, order, ..
                } = cert
                {
                    println!("  lambda={lambda:?} at k={order}, b'l={}", lambda.iter().sum::<f64>());
                }
            }
            other => println!("ex54: {other:?} [{:?}]", t0.elapsed()),
        }
    }

    if run("ex56") {
        let c = poly(
            3,
            &[(&[4, 2, 0], 1.0), (&[2, 4, 0], 1.0), (&[2, 2, 2], -4.0), (&[0, 0, 6], 1.0)],
        );
        let a1 = poly(3, &[(&[3, 3, 0], 1.0)]);
        let a2 = poly(3, &[(&[3, 0, 3], 1.0)]);
        let a3 = poly(3, &[(&[0, 3, 3], 1.0)]);
        let halfspace = poly(3, &[(&[1, 0, 0], 1.0), (&[0, 1, 0], 1.0), (&[0, 0, 1], 1.0)]);
        let set = sphere_set::<f64>(3).with_inequality(halfspace);
        let t0 = std::time::Instant::now();
        let out = find_feasible_dual(&c, &[a1, a2, a3], &set, &FeasCertOptions::default()).unwrap();
        match &out {
            momentcone::feascert::DualFeasibility::Infeasible(cert) => {
                println!("ex56: dual infeasible [{:?}]", t0.elapsed());
                if let momentcone::feascert::Certificate::DualInfeasible { measure, .. } = cert {
                    println!("  atoms: {:?} weights {:?}", measure.atoms(), measure.weights());
                }
            }
            other => println!("ex56: {other:?} [{:?}]", t0.elapsed()),
        }
    }

    let _ = Support::new(1, vec![]);
}
