//! Strip transport for a constant gl(2) connection, against conjugation by e^{My}.

use nab2lab::bch::StructureTensor;
use nab2lab::transport::{conjugation_oracle, loglog_slope, transport_splitting, StraightenedStrip, TransportOptions};
use nab2lab::{PolyField, TwoForm};
use nalgebra::DMatrix;

fn main() {
    let gl = StructureTensor::gl(2);
    let m = DMatrix::from_row_slice(2, 2, &[0.3, -0.7, 0.5, 0.1]);
    let phi0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, -0.4, 0.6]);
    let flat = |a: &DMatrix<f64>| vec![a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]];
    let want = flat(&conjugation_oracle(&m, &phi0, 1.0));

    let mut samples = Vec::new();
    for steps in [10, 20, 40, 80] {
        let strip = StraightenedStrip::new(
            TwoForm::pure_structure(4, 0, gl.entries()).unwrap(),
            PolyField::constant(&[4], 0, &flat(&m)),
            PolyField::constant(&[4], 0, &flat(&phi0)),
            1.0,
        )
        .unwrap();
        let res = transport_splitting(&strip, &TransportOptions { y_steps: steps, ..Default::default() }).unwrap();
        let err = res.last().max_abs_diff(&PolyField::constant(&[4], res.last().cap(), &want));
        println!("steps {steps:>3}: error {err:.3e}");
        samples.push((1.0 / steps as f64, err));
    }
    println!("observed order {:.2}", loglog_slope(&samples));
}
