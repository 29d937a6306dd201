use nab2lab::algebra::{antisymmetrize, gauge_apply_splitting, gauge_apply_two_form, omega_exterior_derivative};
use nab2lab::rng::Lcg;
use nab2lab::{GaugeTransform, PolyField, Splitting, TwoForm};

fn main() {
    let (n, cap) = (2, 20);
    let mut rng = Lcg::new(3);
    let g = &PolyField::identity(n, cap) + &rng.poly(&[n, n], 1, cap, 0.3);
    let t = GaugeTransform::new(g, rng.poly(&[n], 2, cap, 1.0), rng.poly(&[n], 2, cap, 1.0)).unwrap();
    let w = TwoForm::new(
        rng.poly(&[n], 2, cap, 1.0),
        rng.poly(&[n, n], 1, cap, 1.0),
        rng.poly(&[n, n], 1, cap, 1.0),
        antisymmetrize(&rng.poly(&[n, n, n], 1, cap, 1.0)),
    )
    .unwrap();
    let s = Splitting::new(rng.poly(&[n], 2, cap, 1.0), rng.poly(&[n], 2, cap, 1.0)).unwrap();

    let transformed = omega_exterior_derivative(&gauge_apply_two_form(&t, &w), &gauge_apply_splitting(&t, &s));
    let rotated = t.g().matvec(&omega_exterior_derivative(&w, &s));
    for cut in [4, 8, 12] {
        println!("degree <= {cut:>2}: max deviation {:.2e}", transformed.with_cap(cut).max_abs_diff(&rotated.with_cap(cut)));
    }
}
