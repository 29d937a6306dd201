//! Splittings, non-abelian 2-forms and their gauge group on a single chart.
//!
//! A splitting is a colour-vector valued 1-form `φ^a_μ`. A non-abelian
//! 2-form is the triple `ω = (A^a, B^a_{μb}, C^a_{bc})` that enters the
//! ω-exterior derivative
//!
//! ```text
//! (d_ω φ)^a = ∂_x φ^a_y − ∂_y φ^a_x + A^a + B^a_{xb} φ^b_y − B^a_{yb} φ^b_x + C^a_{bc} φ^b_x φ^c_y
//! ```
//!
//! Gauge transforms act on splittings affinely, `φ ↦ α + g φ`, and on 2-forms
//! by the unique law that makes `d_ω φ` transform as a colour vector:
//! `d_{ω'} φ' = g · d_ω φ`.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::poly::{Axis, PolyError, PolyField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("C is not antisymmetric at C^{a}_{{{b}{c}}} (x^{i} y^{j})")]
    NotAntisymmetric { a: usize, b: usize, c: usize, i: usize, j: usize },
    #[error("g is singular at the origin")]
    SingularGauge,
    #[error("truncated inverse misses the identity by {0:e}")]
    InverseInaccurate(f64),
}

fn expect_shape(f: &PolyField, shape: &[usize], what: &str) -> Result<(), AlgebraError> {
    if f.shape() == shape {
        Ok(())
    } else {
        Err(AlgebraError::Shape(format!("{what}: expected {shape:?}, got {:?}", f.shape())))
    }
}

/// The pair `(φ_x, φ_y)` of colour-vector fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Splitting {
    phi_x: PolyField,
    phi_y: PolyField,
}

impl Splitting {
    pub fn new(phi_x: PolyField, phi_y: PolyField) -> Result<Self, AlgebraError> {
        if phi_x.shape().len() != 1 {
            return Err(AlgebraError::Shape("splitting components must be colour vectors".into()));
        }
        expect_shape(&phi_y, phi_x.shape(), "phi_y")?;
        if phi_x.cap() != phi_y.cap() {
            return Err(AlgebraError::Shape("splitting components must share a degree cap".into()));
        }
        Ok(Self { phi_x, phi_y })
    }

    pub fn zero(n: usize, cap: usize) -> Self {
        Self { phi_x: PolyField::zeros(&[n], cap), phi_y: PolyField::zeros(&[n], cap) }
    }

    pub fn phi_x(&self) -> &PolyField {
        &self.phi_x
    }

    pub fn phi_y(&self) -> &PolyField {
        &self.phi_y
    }

    pub fn component(&self, axis: Axis) -> &PolyField {
        match axis {
            Axis::X => &self.phi_x,
            Axis::Y => &self.phi_y,
        }
    }

    pub fn n(&self) -> usize {
        self.phi_x.shape()[0]
    }

    pub fn cap(&self) -> usize {
        self.phi_x.cap()
    }

    pub fn max_abs_diff(&self, other: &Splitting) -> f64 {
        self.phi_x.max_abs_diff(&other.phi_x).max(self.phi_y.max_abs_diff(&other.phi_y))
    }
}

/// Index into the unified array `ω^a_{ij}`, where `i, j` run over the two
/// chart directions followed by the `N` colours.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnifiedIndex {
    Dir(Axis),
    Color(usize),
}

/// A non-abelian 2-form `(A, B_x, B_y, C)` on the chart.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoForm {
    a: PolyField,
    b_x: PolyField,
    b_y: PolyField,
    c: PolyField,
}

impl TwoForm {
    pub fn new(a: PolyField, b_x: PolyField, b_y: PolyField, c: PolyField) -> Result<Self, AlgebraError> {
        if a.shape().len() != 1 {
            return Err(AlgebraError::Shape("A must be a colour vector".into()));
        }
        let n = a.shape()[0];
        expect_shape(&b_x, &[n, n], "B_x")?;
        expect_shape(&b_y, &[n, n], "B_y")?;
        expect_shape(&c, &[n, n, n], "C")?;
        check_antisymmetric(&c)?;
        Ok(Self { a, b_x, b_y, c })
    }

    pub fn zero(n: usize, cap: usize) -> Self {
        Self {
            a: PolyField::zeros(&[n], cap),
            b_x: PolyField::zeros(&[n, n], cap),
            b_y: PolyField::zeros(&[n, n], cap),
            c: PolyField::zeros(&[n, n, n], cap),
        }
    }

    /// `ω = (0, 0, C)` with a constant structure tensor given as `C[a][b][c]` flattened.
    pub fn pure_structure(n: usize, cap: usize, c: &[f64]) -> Result<Self, AlgebraError> {
        let mut w = Self::zero(n, cap);
        let c = PolyField::constant(&[n, n, n], cap, c);
        check_antisymmetric(&c)?;
        w.c = c;
        Ok(w)
    }

    pub fn n(&self) -> usize {
        self.a.shape()[0]
    }

    pub fn a(&self) -> &PolyField {
        &self.a
    }

    pub fn b_x(&self) -> &PolyField {
        &self.b_x
    }

    pub fn b_y(&self) -> &PolyField {
        &self.b_y
    }

    pub fn b(&self, axis: Axis) -> &PolyField {
        match axis {
            Axis::X => &self.b_x,
            Axis::Y => &self.b_y,
        }
    }

    pub fn c(&self) -> &PolyField {
        &self.c
    }

    pub fn max_abs_diff(&self, other: &TwoForm) -> f64 {
        [
            self.a.max_abs_diff(&other.a),
            self.b_x.max_abs_diff(&other.b_x),
            self.b_y.max_abs_diff(&other.b_y),
            self.c.max_abs_diff(&other.c),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// The component `ω^a_{ij}` of the unified array as a scalar field.
    pub fn unified(&self, a: usize, i: UnifiedIndex, j: UnifiedIndex) -> PolyField {
        use UnifiedIndex::*;
        let n = self.n();
        match (i, j) {
            (Dir(p), Dir(q)) if p == q => PolyField::zeros(&[], self.a.cap()),
            (Dir(Axis::X), Dir(Axis::Y)) => self.a.component(a),
            (Dir(_), Dir(_)) => -self.a.component(a),
            (Dir(mu), Color(b)) => self.b(mu).component(a * n + b),
            (Color(b), Dir(mu)) => -self.b(mu).component(a * n + b),
            (Color(b), Color(c)) => self.c.component((a * n + b) * n + c),
        }
    }

    /// The right-hand side `∂_x φ_y + A + B_x φ_y − B_y φ_x + C(φ_x, φ_y)`, so
    /// that `d_ω φ = flat_rhs − ∂_y φ_x`.
    pub fn flat_rhs(&self, s: &Splitting) -> PolyField {
        let (px, py) = (s.phi_x(), s.phi_y());
        let mut out = &py.diff(Axis::X) + &self.a;
        out = &out + &self.b_x.matvec(py);
        out = &out - &self.b_y.matvec(px);
        &out + &self.c.bilinear(px, py)
    }
}

fn check_antisymmetric(c: &PolyField) -> Result<(), AlgebraError> {
    let n = c.shape()[0];
    for (slot, i, j, v) in c.terms() {
        let (a, b, cc) = (slot / (n * n), (slot / n) % n, slot % n);
        if c.coeff((a * n + cc) * n + b, i, j) != -v {
            return Err(AlgebraError::NotAntisymmetric { a, b, c: cc, i, j });
        }
    }
    Ok(())
}

/// Exact antisymmetrisation `(X^a_{bc} − X^a_{cb}) / 2`.
pub fn antisymmetrize(x: &PolyField) -> PolyField {
    let n = x.shape()[0];
    let mut out = PolyField::zeros(x.shape(), x.cap());
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let (s1, s2) = ((a * n + b) * n + c, (a * n + c) * n + b);
                for d in 0..=x.cap() {
                    for j in 0..=d {
                        let v = 0.5 * (x.coeff(s1, d - j, j) - x.coeff(s2, d - j, j));
                        if v != 0.0 {
                            out.set(s1, d - j, j, v);
                        }
                    }
                }
            }
        }
    }
    out
}

/// A gauge transform `(g, α)` with its truncated inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeTransform {
    g: PolyField,
    g_inv: PolyField,
    alpha_x: PolyField,
    alpha_y: PolyField,
}

/// Coefficient tolerance for `g · g_inv = I`.
pub const INVERSE_TOLERANCE: f64 = 1e-12;

impl GaugeTransform {
    /// Builds the transform and its inverse `g⁻¹ = Σ_k (−h)^k g₀⁻¹`, where
    /// `g = g₀(I + h)` and `g₀` is the value at the origin.
    pub fn new(g: PolyField, alpha_x: PolyField, alpha_y: PolyField) -> Result<Self, AlgebraError> {
        if g.shape().len() != 2 || g.shape()[0] != g.shape()[1] {
            return Err(AlgebraError::Shape("g must be a square matrix field".into()));
        }
        let n = g.shape()[0];
        expect_shape(&alpha_x, &[n], "alpha_x")?;
        expect_shape(&alpha_y, &[n], "alpha_y")?;
        let cap = g.cap();

        let g0 = DMatrix::from_row_slice(n, n, &g.at_origin());
        let g0_inv = g0.try_inverse().ok_or(AlgebraError::SingularGauge)?;
        let row_major: Vec<f64> = g0_inv.transpose().as_slice().to_vec();
        let g0_inv_field = PolyField::constant(&[n, n], cap, &row_major);
        let id = PolyField::identity(n, cap);
        let h = &g0_inv_field.matmul(&g) - &id;
        let mut series = id.clone();
        let mut power = id.clone();
        for _ in 0..cap {
            power = -power.matmul(&h);
            series = &series + &power;
        }
        let g_inv = series.matmul(&g0_inv_field);

        let miss = g.matmul(&g_inv).max_abs_diff(&id);
        if miss > INVERSE_TOLERANCE {
            return Err(AlgebraError::InverseInaccurate(miss));
        }
        Ok(Self { g, g_inv, alpha_x, alpha_y })
    }

    pub fn identity(n: usize, cap: usize) -> Self {
        Self {
            g: PolyField::identity(n, cap),
            g_inv: PolyField::identity(n, cap),
            alpha_x: PolyField::zeros(&[n], cap),
            alpha_y: PolyField::zeros(&[n], cap),
        }
    }

    pub fn g(&self) -> &PolyField {
        &self.g
    }

    pub fn g_inv(&self) -> &PolyField {
        &self.g_inv
    }

    pub fn alpha(&self, axis: Axis) -> &PolyField {
        match axis {
            Axis::X => &self.alpha_x,
            Axis::Y => &self.alpha_y,
        }
    }

    pub fn n(&self) -> usize {
        self.g.shape()[0]
    }

    /// The transform equal to applying `self` first and `then` second.
    pub fn then(&self, then: &GaugeTransform) -> Result<GaugeTransform, AlgebraError> {
        let g = then.g.matmul(&self.g);
        let ax = &then.alpha_x + &then.g.matvec(&self.alpha_x);
        let ay = &then.alpha_y + &then.g.matvec(&self.alpha_y);
        GaugeTransform::new(g, ax, ay)
    }
}

/// `φ_μ ↦ α_μ + g φ_μ`.
pub fn gauge_apply_splitting(t: &GaugeTransform, s: &Splitting) -> Splitting {
    Splitting {
        phi_x: &t.alpha_x + &t.g.matvec(&s.phi_x),
        phi_y: &t.alpha_y + &t.g.matvec(&s.phi_y),
    }
}

/// The covariant transform of a 2-form:
///
/// ```text
/// C'(u, v) = g C(g⁻¹u, g⁻¹v)
/// B'_μ     = g B_μ g⁻¹ − (∂_μ g) g⁻¹ − C'(α_μ, ·)
/// A'       = g A − (∂_x α_y − ∂_y α_x) − B'_x α_y + B'_y α_x − C'(α_x, α_y)
/// ```
pub fn gauge_apply_two_form(t: &GaugeTransform, w: &TwoForm) -> TwoForm {
    let (g, h) = (&t.g, &t.g_inv);
    let c_hh = w.c.mul(h, &[(1, 0)]).and_then(|x| x.mul(h, &[(1, 0)])).expect("C shape");
    let c = antisymmetrize(&g.matmul(&c_hh).reshape(w.c.shape()));
    let c_alpha = |alpha: &PolyField| c.mul(alpha, &[(1, 0)]).expect("C shape");

    let b_prime = |axis: Axis| {
        let conj = g.matmul(w.b(axis)).matmul(h);
        let inhom = g.diff(axis).matmul(h);
        &(&conj - &inhom) - &c_alpha(t.alpha(axis))
    };
    let b_x = b_prime(Axis::X);
    let b_y = b_prime(Axis::Y);

    let curl = &t.alpha_y.diff(Axis::X) - &t.alpha_x.diff(Axis::Y);
    let mut a = &g.matvec(&w.a) - &curl;
    a = &a - &b_x.matvec(&t.alpha_y);
    a = &a + &b_y.matvec(&t.alpha_x);
    a = &a - &c.bilinear(&t.alpha_x, &t.alpha_y);
    TwoForm { a, b_x, b_y, c }
}

/// `(d_ω φ)^a_{xy}`.
pub fn omega_exterior_derivative(w: &TwoForm, s: &Splitting) -> PolyField {
    &w.flat_rhs(s) - &s.phi_x.diff(Axis::Y)
}

/// A section `v^μ e_μ + f^a ẽ_a` of the anchored bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchoredSection {
    v: PolyField,
    f: PolyField,
}

impl AnchoredSection {
    pub fn new(v: PolyField, f: PolyField) -> Result<Self, AlgebraError> {
        expect_shape(&v, &[2], "vector part")?;
        if f.shape().len() != 1 {
            return Err(AlgebraError::Shape("kernel part must be a colour vector".into()));
        }
        Ok(Self { v, f })
    }

    pub fn v(&self) -> &PolyField {
        &self.v
    }

    pub fn f(&self) -> &PolyField {
        &self.f
    }

    /// The anchor: projection onto the vector part.
    pub fn anchor(&self) -> &PolyField {
        &self.v
    }

    pub fn max_abs_diff(&self, other: &AnchoredSection) -> f64 {
        self.v.max_abs_diff(&other.v).max(self.f.max_abs_diff(&other.f))
    }
}

/// Directional derivative `v^ν ∂_ν F`, for any field `F`.
fn along(v: &PolyField, f: &PolyField) -> PolyField {
    let vx = v.component(0);
    let vy = v.component(1);
    let dx = vx.mul(&f.diff(Axis::X), &[]).expect("scalar product");
    let dy = vy.mul(&f.diff(Axis::Y), &[]).expect("scalar product");
    &dx + &dy
}

/// The ω-bracket of two sections `X = (v, a)`, `Y = (u, b)`:
/// the Lie bracket on vector parts, and on kernel parts
/// `v·∂b − u·∂a + ω^a_{ij} X^i Y^j`.
pub fn omega_bracket(w: &TwoForm, x: &AnchoredSection, y: &AnchoredSection) -> AnchoredSection {
    let (v, a) = (&x.v, &x.f);
    let (u, b) = (&y.v, &y.f);
    let vec = &along(v, u) - &along(u, v);

    let comp = |p: &PolyField, i: usize| p.component(i);
    let smul = |p: &PolyField, q: &PolyField| p.mul(q, &[]).expect("scalar product");

    let area = &smul(&comp(v, 0), &comp(u, 1)) - &smul(&comp(v, 1), &comp(u, 0));
    let mut kernel = &along(v, b) - &along(u, a);
    kernel = &kernel + &smul(&area, &w.a);
    for (mu, axis) in [Axis::X, Axis::Y].into_iter().enumerate() {
        let mix = &smul(&comp(v, mu), b) - &smul(&comp(u, mu), a);
        kernel = &kernel + &w.b(axis).matvec(&mix);
    }
    kernel = &kernel + &w.c.bilinear(a, b);
    AnchoredSection { v: vec, f: kernel }
}

/// Transform of a section: `v ↦ v`, `f ↦ g f + α_μ v^μ`.
pub fn gauge_apply_section(t: &GaugeTransform, s: &AnchoredSection) -> AnchoredSection {
    let vx = s.v.component(0);
    let vy = s.v.component(1);
    let shift = &t.alpha_x.mul(&vx, &[]).expect("scalar") + &t.alpha_y.mul(&vy, &[]).expect("scalar");
    AnchoredSection { v: s.v.clone(), f: &t.g.matvec(&s.f) + &shift }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn levi_civita() -> Vec<f64> {
        let mut c = vec![0.0; 27];
        for (a, b, cc) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            c[(a * 3 + b) * 3 + cc] = 1.0;
            c[(a * 3 + cc) * 3 + b] = -1.0;
        }
        c
    }

    fn cst(n: usize, cap: usize, v: &[f64]) -> PolyField {
        PolyField::constant(&[n], cap, v)
    }

    #[test]
    fn splitting_transform_examples() {
        let s = Splitting::new(cst(2, 2, &[1.0, 2.0]), cst(2, 2, &[3.0, -1.0])).unwrap();
        assert_eq!(gauge_apply_splitting(&GaugeTransform::identity(2, 2), &s), s);

        let t = GaugeTransform::new(
            PolyField::constant(&[1, 1], 2, &[2.0]),
            cst(1, 2, &[3.0]),
            cst(1, 2, &[0.0]),
        )
        .unwrap();
        let s = Splitting::new(cst(1, 2, &[5.0]), cst(1, 2, &[0.0])).unwrap();
        assert_eq!(gauge_apply_splitting(&t, &s).phi_x().at_origin(), vec![13.0]);

        let zero = Splitting::zero(1, 2);
        let out = gauge_apply_splitting(&t, &zero);
        assert_eq!(out.phi_x(), t.alpha(Axis::X));
        assert_eq!(out.phi_y(), t.alpha(Axis::Y));
    }

    #[test]
    fn rotation_potential_shifts_area_term() {
        // α_x = y, α_y = −x has curl −2, so A' = A + 2 keeps d_ω φ invariant.
        let mut ax = PolyField::zeros(&[1], 2);
        ax.set(0, 0, 1, 1.0);
        let mut ay = PolyField::zeros(&[1], 2);
        ay.set(0, 1, 0, -1.0);
        let t = GaugeTransform::new(PolyField::identity(1, 2), ax, ay).unwrap();
        let w = TwoForm::new(
            cst(1, 2, &[0.7]),
            PolyField::zeros(&[1, 1], 2),
            PolyField::zeros(&[1, 1], 2),
            PolyField::zeros(&[1, 1, 1], 2),
        )
        .unwrap();
        assert_eq!(gauge_apply_two_form(&t, &w).a().at_origin(), vec![2.7]);
        assert_eq!(gauge_apply_two_form(&GaugeTransform::identity(1, 2), &w), w);
    }

    #[test]
    fn exterior_derivative_examples() {
        let w = TwoForm::zero(2, 2);
        let s = Splitting::new(cst(2, 2, &[1.0, 4.0]), cst(2, 2, &[3.0, 1.0])).unwrap();
        assert!(omega_exterior_derivative(&w, &s).is_zero());

        let mut py = PolyField::zeros(&[1], 2);
        py.set(0, 1, 0, 1.0);
        let s = Splitting::new(PolyField::zeros(&[1], 2), py).unwrap();
        let w = TwoForm::new(
            cst(1, 2, &[-1.0]),
            PolyField::zeros(&[1, 1], 2),
            PolyField::zeros(&[1, 1], 2),
            PolyField::zeros(&[1, 1, 1], 2),
        )
        .unwrap();
        assert!(omega_exterior_derivative(&w, &s).is_zero());

        let w = TwoForm::pure_structure(3, 1, &levi_civita()).unwrap();
        let s = Splitting::new(cst(3, 1, &[1.5, 0.0, 0.0]), cst(3, 1, &[0.0, -2.0, 0.0])).unwrap();
        assert_eq!(omega_exterior_derivative(&w, &s).at_origin(), vec![0.0, 0.0, -3.0]);
    }

    #[test]
    fn rejects_symmetric_c() {
        let mut c = PolyField::zeros(&[2, 2, 2], 1);
        c.set(1, 0, 0, 1.0);
        let err = TwoForm::new(
            PolyField::zeros(&[2], 1),
            PolyField::zeros(&[2, 2], 1),
            PolyField::zeros(&[2, 2], 1),
            c,
        );
        assert!(matches!(err, Err(AlgebraError::NotAntisymmetric { .. })));
    }

    #[test]
    fn bracket_examples() {
        let w = TwoForm::zero(1, 3);
        let dx = AnchoredSection::new(PolyField::constant(&[2], 3, &[1.0, 0.0]), PolyField::zeros(&[1], 3)).unwrap();
        let mut xdy = PolyField::zeros(&[2], 3);
        xdy.set(1, 1, 0, 1.0);
        let xdy = AnchoredSection::new(xdy, PolyField::zeros(&[1], 3)).unwrap();
        let br = omega_bracket(&w, &dx, &xdy);
        assert_eq!(br.v(), &PolyField::constant(&[2], 3, &[0.0, 1.0]));
        assert!(br.f().is_zero());

        let w = TwoForm::pure_structure(3, 1, &levi_civita()).unwrap();
        let zero_v = PolyField::zeros(&[2], 1);
        let e1 = AnchoredSection::new(zero_v.clone(), cst(3, 1, &[1.0, 0.0, 0.0])).unwrap();
        let e2 = AnchoredSection::new(zero_v, cst(3, 1, &[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(omega_bracket(&w, &e1, &e2).f().at_origin(), vec![0.0, 0.0, 1.0]);
        let self_br = omega_bracket(&w, &e1, &e1);
        assert!(self_br.v().is_zero() && self_br.f().is_zero());
    }

    #[test]
    fn unified_array_signs() {
        let mut bx = PolyField::zeros(&[1, 1], 0);
        bx.set(0, 0, 0, 2.0);
        let w = TwoForm::new(cst(1, 0, &[3.0]), bx, PolyField::zeros(&[1, 1], 0), PolyField::zeros(&[1, 1, 1], 0)).unwrap();
        use UnifiedIndex::*;
        assert_eq!(w.unified(0, Dir(Axis::Y), Dir(Axis::X)).at_origin(), vec![-3.0]);
        assert_eq!(w.unified(0, Color(0), Dir(Axis::X)).at_origin(), vec![-2.0]);
        assert_eq!(w.unified(0, Dir(Axis::X), Color(0)).at_origin(), vec![2.0]);
    }

    fn rand_field(shape: &'static [usize], deg: usize, cap: usize, amp: f64) -> impl Strategy<Value = PolyField> {
        let slots: usize = shape.iter().product();
        let m = (deg + 1) * (deg + 2) / 2;
        proptest::collection::vec(-amp..amp, slots * m).prop_map(move |c| {
            let mut f = PolyField::zeros(shape, cap);
            let mut it = c.into_iter();
            for s in 0..slots {
                for d in 0..=deg {
                    for j in 0..=d {
                        f.set(s, d - j, j, it.next().unwrap());
                    }
                }
            }
            f
        })
    }

    fn rand_c(cap: usize) -> impl Strategy<Value = PolyField> {
        rand_field(&[2, 2, 2], 1, cap, 1.0).prop_map(|x| antisymmetrize(&x))
    }

    fn rand_gauge(cap: usize) -> impl Strategy<Value = GaugeTransform> {
        (rand_field(&[2, 2], 1, cap, 0.3), rand_field(&[2], 2, cap, 1.0), rand_field(&[2], 2, cap, 1.0)).prop_map(
            move |(g, ax, ay)| GaugeTransform::new(&PolyField::identity(2, cap) + &g, ax, ay).unwrap(),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn exterior_derivative_is_covariant(
            t in rand_gauge(24),
            a in rand_field(&[2], 2, 24, 1.0),
            bx in rand_field(&[2, 2], 1, 24, 1.0),
            by in rand_field(&[2, 2], 1, 24, 1.0),
            c in rand_c(24),
            px in rand_field(&[2], 2, 24, 1.0),
            py in rand_field(&[2], 2, 24, 1.0),
        ) {
            let w = TwoForm::new(a, bx, by, c).unwrap();
            let s = Splitting::new(px, py).unwrap();
            let lhs = omega_exterior_derivative(&gauge_apply_two_form(&t, &w), &gauge_apply_splitting(&t, &s));
            let rhs = t.g().matvec(&omega_exterior_derivative(&w, &s));
            // Compare below the cap, where no truncated product reaches.
            prop_assert!(lhs.with_cap(8).max_abs_diff(&rhs.with_cap(8)) < 1e-10);
        }

        #[test]
        fn composition_matches_group_law(
            t1 in rand_gauge(12), t2 in rand_gauge(12),
            a in rand_field(&[2], 2, 12, 1.0),
            bx in rand_field(&[2, 2], 1, 12, 1.0),
            c in rand_c(12),
            px in rand_field(&[2], 2, 12, 1.0),
        ) {
            let w = TwoForm::new(a, bx.clone(), bx, c).unwrap();
            let s = Splitting::new(px.clone(), px).unwrap();
            let both = t1.then(&t2).unwrap();
            let s2 = gauge_apply_splitting(&t2, &gauge_apply_splitting(&t1, &s));
            prop_assert!(s2.max_abs_diff(&gauge_apply_splitting(&both, &s)) < 1e-12);
            let w2 = gauge_apply_two_form(&t2, &gauge_apply_two_form(&t1, &w));
            let w1 = gauge_apply_two_form(&both, &w);
            let low = |f: &PolyField| f.with_cap(4);
            prop_assert!(low(w2.a()).max_abs_diff(&low(w1.a())) < 1e-9);
            prop_assert!(low(w2.b_x()).max_abs_diff(&low(w1.b_x())) < 1e-9);
            prop_assert!(low(w2.c()).max_abs_diff(&low(w1.c())) < 1e-9);
        }

        #[test]
        fn transformed_c_stays_antisymmetric(t in rand_gauge(6), c in rand_c(6)) {
            let mut w = TwoForm::zero(2, 6);
            w.c = c;
            prop_assert!(check_antisymmetric(gauge_apply_two_form(&t, &w).c()).is_ok());
        }

        #[test]
        fn bracket_anchor_and_covariance(
            t in rand_gauge(20),
            a in rand_field(&[2], 1, 20, 1.0),
            bx in rand_field(&[2, 2], 1, 20, 1.0),
            by in rand_field(&[2, 2], 1, 20, 1.0),
            c in rand_c(20),
            v in rand_field(&[2], 2, 20, 1.0),
            u in rand_field(&[2], 2, 20, 1.0),
            f1 in rand_field(&[2], 2, 20, 1.0),
            f2 in rand_field(&[2], 2, 20, 1.0),
        ) {
            let w = TwoForm::new(a, bx, by, c).unwrap();
            let x = AnchoredSection::new(v, f1).unwrap();
            let y = AnchoredSection::new(u, f2).unwrap();
            let br = omega_bracket(&w, &x, &y);
            let lie = &along(x.v(), y.v()) - &along(y.v(), x.v());
            prop_assert_eq!(br.v(), &lie);

            let lhs = omega_bracket(&gauge_apply_two_form(&t, &w), &gauge_apply_section(&t, &x), &gauge_apply_section(&t, &y));
            let rhs = gauge_apply_section(&t, &br);
            prop_assert!(lhs.f().with_cap(7).max_abs_diff(&rhs.f().with_cap(7)) < 1e-10);
        }
    }
}
