use momentcone::algebra::{basis, MultiIndex, Poly};
use momentcone::hierarchy::{build_relaxation, MomentLp};
use momentcone::moments::SemialgSet;
use momentcone::sdp::SolverOptions;

// substitute x6 = 1 - x1 - ... - x5 in a 6-variable polynomial
fn reduce(p: &Poly<f64>) -> Poly<f64> {
    let m = 5;
    let mut last = Poly::constant(m, 1.0);
    for i in 0..m {
        last.add_term(MultiIndex::unit(m, i), -1.0);
    }
    let mut out = Poly::zero(m);
    for (alpha, coeff) in p.terms() {
        let mut term = Poly::constant(m, *coeff);
        for i in 0..m {
            for _ in 0..alpha.0[i] {
                term = term.mul(&Poly::var(m, i));
            }
        }
        for _ in 0..alpha.0[5] {
            term = term.mul(&last);
        }
        out = out.add(&term);
    }
    out
}

fn main() {
    let n = 6;
    let b = nalgebra::DMatrix::<f64>::from_element(n, n, 1.0);
    let mut d = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (i, j, v) in [(0, 1, 0.5), (1, 2, -0.5), (2, 3, 0.5), (4, 5, -0.5), (5, 0, 0.5)] {
        d[(i, j)] = v;
        d[(j, i)] = v;
    }
    let c = reduce(&momentcone::apps::matrix_form(&b));
    let a1 = reduce(&momentcone::apps::matrix_form(&d));
    let mut lastg = Poly::constant(5, 1.0);
    for i in 0..5 {
        lastg.add_term(MultiIndex::unit(5, i), -1.0);
    }
    let mut g: Vec<Poly<f64>> = (0..5).map(|i| Poly::var(5, i)).collect();
    g.push(lastg);
    let set = SemialgSet::new(5, vec![], g).with_ball_radius(1.0);
    let lp = MomentLp::new(basis(5, 2), vec![a1], vec![1.0], c, set.clone());
    for k in 1..=2u32 {
        let relax = build_relaxation(&lp, k).unwrap();
        let t0 = std::time::Instant::now();
        let res = relax.solve(&lp, &SolverOptions::default()).unwrap();
        println!(
            "k={k}: status={:?} c_k={:?} b_k={:?} [{:?}]",
            res.status,
            res.c_k,
            res.b_k,
            t0.elapsed()
        );
        if let Some(w) = &res.w_star {
            for t in 1..=k {
                let zt = w.restrict(&basis(5, 2 * t)).unwrap();
                if let Ok(p) = momentcone::extraction::is_flat(&zt, &set, 1e-6) {
                    println!("  t={t}: flat={} ranks={:?}", p.is_flat(), p.ranks);
                    if p.is_flat() {
                        let mu = momentcone::extraction::extract_atoms(
                            &zt,
                            &set,
                            &momentcone::extraction::ExtractOptions::default(),
                        );
                        println!("  atoms: {mu:?}");
                    }
                }
            }
        }
    }
}
