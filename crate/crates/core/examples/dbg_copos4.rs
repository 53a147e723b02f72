use momentcone::algebra::{basis, homogeneous_basis, riesz_pairing, Poly};
use momentcone::apps::simplex_set;
use momentcone::hierarchy::{build_relaxation, MomentLp};
use momentcone::moments::{localizing_matrix, moment_matrix};
use momentcone::sdp::SolverOptions;
use nalgebra::DMatrix;

fn main() {
    let n = 6;
    let b = DMatrix::<f64>::from_element(n, n, 1.0);
    let mut d = DMatrix::<f64>::zeros(n, n);
    for (i, j, v) in [(0, 1, 0.5), (1, 2, -0.5), (2, 3, 0.5), (4, 5, -0.5), (5, 0, 0.5)] {
        d[(i, j)] = v;
        d[(j, i)] = v;
    }
    let c = momentcone::apps::matrix_form(&b);
    let a1 = momentcone::apps::matrix_form(&d);
    let set = simplex_set::<f64>(n);
    let lp = MomentLp::new(homogeneous_basis(n, 2), vec![a1.clone()], vec![1.0], c.clone(), set.clone());
    let relax = build_relaxation(&lp, 2).unwrap();
    let res = relax.solve(&lp, &SolverOptions::default()).unwrap();
    let w = res.w_star.unwrap();

    // independent verification through the numeric localizing matrices
    println!("<a1, w|A> = {}", riesz_pairing(&a1, &w.restrict(&homogeneous_basis(n, 2)).unwrap()).unwrap());
    println!("<c, w|A>  = {}", riesz_pairing(&c, &w.restrict(&homogeneous_basis(n, 2)).unwrap()).unwrap());
    let m2 = moment_matrix(2, &w).unwrap();
    let ev = m2.clone().symmetric_eigen().eigenvalues;
    println!("min eig M_2 = {:.3e}", ev.iter().cloned().fold(f64::INFINITY, f64::min));
    for (j, g) in set.inequalities().iter().enumerate() {
        let lg = localizing_matrix(g, 2, &w).unwrap();
        let ev = lg.clone().symmetric_eigen().eigenvalues;
        println!("min eig L_g{j} = {:.3e}", ev.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    for h in set.equalities() {
        let lh = localizing_matrix(h, 2, &w).unwrap();
        println!("|L_h|_max (rows deg<=1 cells) = {:.3e}", lh.amax());
        // full ideal cells up to degree 3 multipliers
        let mut worst: f64 = 0.0;
        for delta in basis(n, 3).iter() {
            let p = h.shift(delta);
            let v = riesz_pairing(&p, &w).unwrap();
            worst = worst.max(v.abs());
        }
        println!("max |<h x^delta, w>| over deg<=3 = {worst:.3e}");
    }
}
