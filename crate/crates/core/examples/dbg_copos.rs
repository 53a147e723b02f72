use momentcone::algebra::{basis, homogeneous_basis, Poly};
use momentcone::apps::simplex_set;
use momentcone::extraction::is_flat;
use momentcone::hierarchy::{build_relaxation, MomentLp};
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
    let lp = MomentLp::new(homogeneous_basis(n, 2), vec![a1], vec![1.0], c, set.clone());
    for k in 2..=3u32 {
        let relax = build_relaxation(&lp, k).unwrap();
        let t0 = std::time::Instant::now();
        let res = relax.solve(&lp, &SolverOptions::default()).unwrap();
        let sdp = res.sdp.as_ref().unwrap();
        println!(
            "k={k}: status={:?} iters={} residuals={:?} c_k={:?} b_k={:?} [{:?}]",
            res.status, sdp.iterations, sdp.residuals, res.c_k, res.b_k, t0.elapsed()
        );
        if let Some(w) = &res.w_star {
            for t in 1..=k {
                let zt = w.restrict(&basis(n, 2 * t)).unwrap();
                match is_flat(&zt, &set, 1e-6) {
                    Ok(p) => println!("  t={t}: flat={} ranks={:?}", p.is_flat(), p.ranks),
                    Err(e) => println!("  t={t}: {e}"),
                }
                let m = momentcone::moments::moment_matrix(t, &zt).unwrap();
                let sv = m.svd(false, false).singular_values;
                let v: Vec<f64> = sv.iter().take(8).copied().collect();
                println!("  sv(M_{t}) = {v:?}");
            }
        }
    }
    let _ = Poly::<f64>::zero(1);
}
