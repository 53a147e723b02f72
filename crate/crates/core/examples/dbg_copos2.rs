use momentcone::apps::simplex_set;
use momentcone::hierarchy::{sos_membership, SosMembership};
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
    // is c - 4 a1 in Q_2(g) + I_4(h)?
    let f = c.sub(&a1.scale(4.0));
    for k in 2..=3u32 {
        let t0 = std::time::Instant::now();
        match sos_membership(&f, &[], &set, k, &SolverOptions::default()).unwrap() {
            SosMembership::Feasible { .. } => println!("k={k}: member [{:?}]", t0.elapsed()),
            SosMembership::InfeasibleAtOrder { .. } => {
                println!("k={k}: NOT member [{:?}]", t0.elapsed())
            }
            SosMembership::Inconclusive { status } => {
                println!("k={k}: inconclusive {status:?} [{:?}]", t0.elapsed())
            }
        }
    }
}
