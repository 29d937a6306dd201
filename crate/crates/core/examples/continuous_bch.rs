//! Continuous BCH series compared with the logarithm of the adjoint holonomy,
//! and the size of the terms beyond second order.

use nab2lab::bch::{adjoint_log_oracle, cbch_second_order, cbch_solve, max_abs_diff, ColorPath, StructureTensor};

fn main() {
    let c = StructureTensor::sl2();
    let path = ColorPath::polynomial(vec![vec![0.2, -0.1, 0.05], vec![0.0, 0.3, -0.2], vec![0.1, 0.0, 0.15]], 1.0).unwrap();
    let series = cbch_solve(&path, &c, 8, 1000).unwrap();
    let oracle = adjoint_log_oracle(&path, &c, 1000).unwrap();
    println!("series  {:?}", series.last());
    println!("oracle  {:?} (least-squares residual {:.1e})", oracle.phi, oracle.residual);
    println!("difference {:.2e}", max_abs_diff(series.last(), &oracle.phi));

    let so3 = StructureTensor::so3();
    for s in [0.02, 0.04, 0.08] {
        let p = ColorPath::segments(vec![vec![s, 0.0, s], vec![0.0, s, -s]], 0.5).unwrap();
        let full = cbch_solve(&p, &so3, 8, 1000).unwrap();
        println!("s = {s}: beyond second order {:.3e}", max_abs_diff(full.last(), &cbch_second_order(&p, &so3)));
    }
}
