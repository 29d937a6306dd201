use nab2lab::bch::{loop_commutator_experiment, max_abs_diff, StructureTensor};

fn main() {
    let c = StructureTensor::so3();
    for h in [0.2, 0.1, 0.05, 0.025] {
        let (phi, lead) = loop_commutator_experiment(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &c, h, 8, 4000).unwrap();
        println!("h = {h:<6} loop {:?}  area term {:?}  gap {:.3e}", phi, lead, max_abs_diff(&phi, &lead));
    }
}
