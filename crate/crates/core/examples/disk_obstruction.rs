//! so(3) disk obstruction: random-looking data versus boundary values of a pure gauge.

use nab2lab::bch::StructureTensor;
use nab2lab::disk::{pure_gauge_boundary, solve_extension, BoundaryFourier, Cutoffs, DiskTwoFormFT, FixedPointOptions};
use nab2lab::rng::Lcg;
use nab2lab::TwoForm;
use num_complex::Complex64;

fn main() {
    let c = StructureTensor::so3();
    let opts = FixedPointOptions::default();

    let mut boundary = BoundaryFourier::zero(3, 6);
    boundary.set_pair(1, 0, Complex64::new(0.1, 0.05));
    boundary.set_pair(2, 2, Complex64::new(-0.05, 0.02));
    let w = TwoForm::pure_structure(3, 0, c.entries()).unwrap();
    let disk = DiskTwoFormFT::from_cartesian(&w, Cutoffs { n_max: 6, k_max: 8 }).unwrap();
    let sol = solve_extension(&disk, &boundary, &opts).unwrap();
    println!("generic boundary: obstruction {:?} after {} iterations", sol.obstruction, sol.iterations);

    let omega = Lcg::new(7).poly(&[3], 2, 2, 0.05);
    let gauge = pure_gauge_boundary(c.entries(), &omega, 6);
    for k_max in [4, 6, 8, 10] {
        let disk = DiskTwoFormFT::from_cartesian(&w, Cutoffs { n_max: 6, k_max }).unwrap();
        let sol = solve_extension(&disk, &gauge, &opts).unwrap();
        println!("pure gauge, k_max = {k_max:>2}: |obstruction| = {:.3e}", sol.obstruction_norm());
    }
}
