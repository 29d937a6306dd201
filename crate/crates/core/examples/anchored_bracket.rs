//! The ω-bracket on sections of the anchored bundle, and its anchor.

use nab2lab::algebra::omega_bracket;
use nab2lab::{AnchoredSection, PolyField, TwoForm};

fn main() {
    let cap = 3;
    let c = {
        let mut c = vec![0.0; 8];
        c[1] = 1.0; // C^0_{01}
        c[2] = -1.0;
        c
    };
    let w = TwoForm::pure_structure(2, cap, &c).unwrap();

    let mut v = PolyField::zeros(&[2], cap);
    v.set(0, 0, 0, 1.0); // ∂_x
    let mut u = PolyField::zeros(&[2], cap);
    u.set(1, 1, 0, 1.0); // x ∂_y
    let x = AnchoredSection::new(v, PolyField::constant(&[2], cap, &[1.0, 0.0])).unwrap();
    let y = AnchoredSection::new(u, PolyField::constant(&[2], cap, &[0.0, 1.0])).unwrap();

    let z = omega_bracket(&w, &x, &y);
    println!("anchor of [X, Y]: {:?}", z.anchor().terms().collect::<Vec<_>>());
    println!("kernel part:      {:?}", z.f().terms().collect::<Vec<_>>());
}
