use cprpca_core::matrix::{DenseMatrix, FactorPair};
use cprpca_core::index_set::IndexSet;
use cprpca_core::solver::*;
use cprpca_core::rng::{StreamKey, stage};

fn main() {
    let d = 20;
    let mut rng0 = StreamKey::new(4).child(stage::LOWRANK).rng();
    let scale = 1.0 / (2.0f64).sqrt();
    let u = DenseMatrix::from_fn(d, 2, |_, _| rng0.normal() * scale);
    let v = DenseMatrix::from_fn(d, 2, |_, _| rng0.normal() * scale);
    let f = FactorPair::new(u, v).unwrap();
    let mut y = f.product();
    let mut rng = StreamKey::new(4).child(stage::NOISE).rng();
    for v in y.data_mut() { *v += 1e-9 * rng.normal(); }
    let obs = IndexSet::full(d, d);
    for t in [1usize, 2, 3, 5, 10, 40, 86] {
        let mut cfg = SolverConfig::with_rank(2);
        cfg.eta = StepSize::Fixed(1e4);
        cfg.tol = 1e-30;
        cfg.max_iters = t;
        match solve(&y, &obs, &cfg) {
            Ok(est) => println!("T={t}: obj={:.3e} iters={}", est.final_objective, est.iters_run),
            Err(e) => println!("T={t}: {e}"),
        }
    }
}
