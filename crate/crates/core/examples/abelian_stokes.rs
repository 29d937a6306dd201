//! For a single colour the disk obstruction is the boundary average plus the
//! area integral over 2π. Compare the solver with direct quadrature.

use nab2lab::disk::{abelian_stokes_oracle, solve_extension, BoundaryFourier, Cutoffs, DiskTwoFormFT, FixedPointOptions};
use nab2lab::{PolyField, TwoForm};

fn main() {
    let cap = 4;
    let mut a = PolyField::zeros(&[1], cap);
    a.set(0, 0, 0, 1.0);
    a.set(0, 2, 0, 0.5);
    a.set(0, 1, 3, -0.25);
    let zero2 = PolyField::zeros(&[1, 1], cap);
    let w = TwoForm::new(a.clone(), zero2.clone(), zero2, PolyField::zeros(&[1, 1, 1], cap)).unwrap();

    let boundary = BoundaryFourier::from_samples(1, 5, |t| vec![0.3 + (2.0 * t).cos() - 0.2 * t.sin()]);
    let disk = DiskTwoFormFT::from_cartesian(&w, Cutoffs { n_max: 5, k_max: 6 }).unwrap();
    let sol = solve_extension(&disk, &boundary, &FixedPointOptions::default()).unwrap();
    let oracle = abelian_stokes_oracle(&a, &boundary, 48, 64);

    println!("solver     {:.15}", sol.obstruction[0]);
    println!("quadrature {oracle:.15}");
    println!("residual   {:.2e}", sol.residual);
}
