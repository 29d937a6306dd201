use nab2lab::bch::StructureTensor;
use nab2lab::rng::Lcg;
use nab2lab::triangle::{perturbed_i2_norm, random_flat_jets, residual_slope, triangle_norms};

fn main() {
    let data = random_flat_jets(&mut Lcg::new(11), StructureTensor::so3().entries(), 3, 0.3, 2, 8);
    let eps = [0.1, 0.05, 0.025, 0.0125];
    let mut cols: [Vec<(f64, f64)>; 4] = Default::default();
    for &e in &eps {
        let [i1, i2, i3] = triangle_norms(&data, e).unwrap();
        let broken = perturbed_i2_norm(&data, e, 0.1).unwrap();
        println!("eps {e:<7} I1 {i1:.3e}  I2 {i2:.3e}  I3 {i3:.3e}  I2 (not flat) {broken:.3e}");
        for (col, v) in cols.iter_mut().zip([i1, i2, i3, broken]) {
            col.push((e, v));
        }
    }
    let slopes: Vec<String> = cols.iter().map(|c| format!("{:.2}", residual_slope(c).unwrap())).collect();
    println!("slopes I1, I2, I3, control: {}", slopes.join(", "));
}
