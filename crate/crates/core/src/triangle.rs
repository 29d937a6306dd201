//! Infinitesimal triangle integrals.
//!
//! The triangle has corners `(0,0)`, `(2ε,0)`, `(0,2ε)`. Its boundary data are
//! `φ₁(x) = φ_x(x, 0)`, `φ₂(y) = φ_y(0, y)` and, on the hypotenuse
//! `(ε+t, ε−t)`, `φ₃(t) = (φ_x − φ_y)(ε+t, ε−t)`, expanded around `(0,0)`,
//! `(0,0)` and `(ε,ε)`. For ω-flat splittings the combinations `I₁`, `I₂`,
//! `I₃` of these jets vanish to order `ε`, `ε²`, `ε³`.

use thiserror::Error;

use crate::algebra::{Splitting, TwoForm};
use crate::poly::{Axis, PolyField};
use crate::rng::Lcg;
use crate::transport::loglog_slope;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TriangleError {
    #[error("need jets of order {needed}, have {available}")]
    InsufficientOrder { needed: usize, available: usize },
    #[error("eps must be positive")]
    NonPositiveEps,
    #[error("shape mismatch: {0}")]
    Shape(String),
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Partial derivatives `∂_x^m ∂_y^n` at the origin, total order `<= order`.
#[derive(Clone, Debug, PartialEq)]
pub struct JetTable {
    taylor: PolyField,
}

impl JetTable {
    /// Jets of a polynomial field at the origin.
    pub fn from_poly(f: &PolyField) -> Self {
        Self { taylor: f.clone() }
    }

    pub fn zeros(shape: &[usize], order: usize) -> Self {
        Self { taylor: PolyField::zeros(shape, order) }
    }

    pub fn order(&self) -> usize {
        self.taylor.cap()
    }

    pub fn shape(&self) -> &[usize] {
        self.taylor.shape()
    }

    pub fn get(&self, slot: usize, m: usize, n: usize) -> f64 {
        self.taylor.coeff(slot, m, n) * factorial(m) * factorial(n)
    }

    pub fn set(&mut self, slot: usize, m: usize, n: usize, value: f64) {
        self.taylor.set(slot, m, n, value / (factorial(m) * factorial(n)));
    }

    /// The Taylor polynomial carrying these jets.
    pub fn taylor(&self) -> &PolyField {
        &self.taylor
    }
}

/// Fills `φ_x` jets with `n >= 1` from the flatness equation
/// `∂_y φ_x = ∂_x φ_y + A + B_x φ_y − B_y φ_x + C(φ_x, φ_y)`, one power of `y`
/// at a time. Row `n = 0` of the result is `phi_x_axis`.
pub fn flat_jet_extension(w: &TwoForm, phi_x_axis: &[Vec<f64>], phi_y: &JetTable, order: usize) -> Result<JetTable, TriangleError> {
    let n = w.n();
    if phi_y.order() < order {
        return Err(TriangleError::InsufficientOrder { needed: order, available: phi_y.order() });
    }
    if phi_x_axis.len() <= order || phi_x_axis.iter().any(|v| v.len() != n) {
        return Err(TriangleError::InsufficientOrder { needed: order, available: phi_x_axis.len().saturating_sub(1) });
    }
    let w = TwoForm::new(w.a().with_cap(order), w.b_x().with_cap(order), w.b_y().with_cap(order), w.c().with_cap(order))
        .expect("truncation keeps a valid form");
    let py = phi_y.taylor.with_cap(order);
    let mut px = PolyField::zeros(&[n], order);
    for (m, vals) in phi_x_axis.iter().enumerate().take(order + 1) {
        for (a, v) in vals.iter().enumerate() {
            px.set(a, m, 0, v / factorial(m));
        }
    }
    for row in 0..order {
        let s = Splitting::new(px.clone(), py.clone()).expect("shapes agree");
        let f = w.flat_rhs(&s);
        for m in 0..order - row {
            for a in 0..n {
                px.set(a, m, row + 1, f.coeff(a, m, row) / (row + 1) as f64);
            }
        }
    }
    Ok(JetTable { taylor: px })
}

/// Boundary jets `∂₁^k φ₁`, `∂₂^k φ₂`, `∂₃^k φ₃` for `k <= order`.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleBoundaryJet {
    pub eps: f64,
    pub phi1: Vec<Vec<f64>>,
    pub phi2: Vec<Vec<f64>>,
    pub phi3: Vec<Vec<f64>>,
    /// Highest power of `ε` kept in the hypotenuse series of `∂₃^k φ₃`, per `k`.
    pub series_order: Vec<usize>,
}

impl TriangleBoundaryJet {
    pub fn n(&self) -> usize {
        self.phi1[0].len()
    }

    pub fn order(&self) -> usize {
        self.phi1.len() - 1
    }
}

/// Boundary jets from bulk jets. The hypotenuse jets sum
/// `∂₃^k φ₃ = Σ_n ε^n/n! (∂_x+∂_y)^n (∂_x−∂_y)^k (φ_x − φ_y)` over every
/// available bulk order.
pub fn boundary_jets_from_bulk(
    phi_x: &JetTable,
    phi_y: &JetTable,
    eps: f64,
    order: usize,
) -> Result<TriangleBoundaryJet, TriangleError> {
    if !(eps > 0.0) {
        return Err(TriangleError::NonPositiveEps);
    }
    let available = phi_x.order().min(phi_y.order());
    if available < order {
        return Err(TriangleError::InsufficientOrder { needed: order, available });
    }
    if phi_x.shape() != phi_y.shape() || phi_x.shape().len() != 1 {
        return Err(TriangleError::Shape("φ_x and φ_y jets must be colour vectors of equal size".into()));
    }
    let n = phi_x.shape()[0];
    let diff = &phi_x.taylor.with_cap(available) - &phi_y.taylor.with_cap(available);
    let mut phi1 = Vec::new();
    let mut phi2 = Vec::new();
    let mut phi3 = Vec::new();
    let mut series_order = Vec::new();
    let mut dk = diff;
    for k in 0..=order {
        phi1.push((0..n).map(|a| phi_x.get(a, k, 0)).collect());
        phi2.push((0..n).map(|a| phi_y.get(a, 0, k)).collect());
        phi3.push(dk.eval(eps, eps));
        series_order.push(available - k);
        dk = &dk.diff(Axis::X) - &dk.diff(Axis::Y);
    }
    Ok(TriangleBoundaryJet { eps, phi1, phi2, phi3, series_order })
}

/// Values and first derivatives of `ω` at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaJets {
    pub n: usize,
    pub a: [Vec<f64>; 3],
    pub b_x: [Vec<f64>; 3],
    pub b_y: [Vec<f64>; 3],
    pub c: [Vec<f64>; 3],
}

impl OmegaJets {
    /// Index 0 holds values, 1 holds `∂_x`, 2 holds `∂_y`.
    pub fn from_two_form(w: &TwoForm) -> Self {
        let jets = |f: &PolyField| -> [Vec<f64>; 3] {
            let s = f.slot_count();
            [
                (0..s).map(|i| f.coeff(i, 0, 0)).collect(),
                (0..s).map(|i| f.coeff(i, 1, 0)).collect(),
                (0..s).map(|i| f.coeff(i, 0, 1)).collect(),
            ]
        };
        Self { n: w.n(), a: jets(w.a()), b_x: jets(w.b_x()), b_y: jets(w.b_y()), c: jets(w.c()) }
    }

    /// `∂_x + ∂_y` of a component.
    fn sum_derivative(j: &[Vec<f64>; 3]) -> Vec<f64> {
        j[1].iter().zip(&j[2]).map(|(x, y)| x + y).collect()
    }
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|a| (0..n).map(|b| m[a * n + b] * v[b]).sum()).collect()
}

fn bilinear(c: &[f64], u: &[f64], v: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|a| {
            let mut s = 0.0;
            for b in 0..n {
                for cc in 0..n {
                    s += c[(a * n + b) * n + cc] * u[b] * v[cc];
                }
            }
            s
        })
        .collect()
}

fn axpy(acc: &mut [f64], k: f64, v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += k * x;
    }
}

fn combo(terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = vec![0.0; terms[0].1.len()];
    for (k, v) in terms {
        axpy(&mut out, *k, v);
    }
    out
}

/// `A + B_x φ₂ − B_y φ₁ + C(φ₁, φ₂)` at the origin.
fn f0(b: &TriangleBoundaryJet, a: &[f64], bx: &[f64], by: &[f64], c: &[f64]) -> Vec<f64> {
    let (p1, p2) = (&b.phi1[0], &b.phi2[0]);
    combo(&[(1.0, a), (1.0, &mat_vec(bx, p2)), (-1.0, &mat_vec(by, p1)), (1.0, &bilinear(c, p1, p2))])
}

/// `I₁ = φ₃ − φ₁ + φ₂`.
pub fn triangle_i1(b: &TriangleBoundaryJet) -> Vec<f64> {
    combo(&[(1.0, &b.phi3[0]), (-1.0, &b.phi1[0]), (1.0, &b.phi2[0])])
}

/// Values of `A`, `B_x`, `B_y`, `C` at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaAtOrigin {
    pub a: Vec<f64>,
    pub b_x: Vec<f64>,
    pub b_y: Vec<f64>,
    pub c: Vec<f64>,
}

impl From<&OmegaJets> for OmegaAtOrigin {
    fn from(j: &OmegaJets) -> Self {
        Self { a: j.a[0].clone(), b_x: j.b_x[0].clone(), b_y: j.b_y[0].clone(), c: j.c[0].clone() }
    }
}

/// `I₂ = φ₃ − φ₁ + φ₂ − ε∂₁φ₁ + ε∂₂φ₂ − ε(A + B_x φ₂ − B_y φ₁ + C(φ₁, φ₂))`.
pub fn triangle_i2(b: &TriangleBoundaryJet, w0: &OmegaAtOrigin) -> Vec<f64> {
    let e = b.eps;
    let f = f0(b, &w0.a, &w0.b_x, &w0.b_y, &w0.c);
    combo(&[(1.0, &triangle_i1(b)), (-e, &b.phi1[1]), (e, &b.phi2[1]), (-e, &f)])
}

/// The six displayed lines of `I₃`; their sum is `I₃`.
#[derive(Clone, Debug, PartialEq)]
pub struct I3Lines {
    /// `I₂`.
    pub l1: Vec<f64>,
    /// `(1/6)ε²∂₃²φ₃ − (2/3)ε²∂₁²φ₁ + (2/3)ε²∂₂²φ₂ − (2/3)ε²(∂_x+∂_y)A`.
    pub l2: Vec<f64>,
    /// `(2/3)ε²(∂B_y)φ₁ − (2/3)ε²(∂B_x)φ₂ − (1/3)ε²(B_x(3∂₂φ₂+∂₁φ₁) − B_y(3∂₁φ₁+∂₂φ₂))`.
    pub l3: Vec<f64>,
    /// `−(2/3)ε²(∂C)(φ₁,φ₂) − (1/3)ε²(C(3∂₁φ₁+∂₂φ₂, φ₂) + C(φ₁, 3∂₂φ₂+∂₁φ₁))`.
    pub l4: Vec<f64>,
    /// `(1/3)ε²(B_x + C(φ₁,·))(∂₃φ₃ + F₀)`.
    pub l5: Vec<f64>,
    /// `−(1/3)ε²(B_y + C(φ₂,·))(∂₃φ₃ − F₀)`.
    pub l6: Vec<f64>,
}

impl I3Lines {
    pub fn sum(&self) -> Vec<f64> {
        combo(&[(1.0, &self.l1), (1.0, &self.l2), (1.0, &self.l3), (1.0, &self.l4), (1.0, &self.l5), (1.0, &self.l6)])
    }
}

/// `I₃` line by line. Here `∂ = ∂_x + ∂_y` acts on `ω` only and
/// `F₀ = A + B_x φ₂ − B_y φ₁ + C(φ₁, φ₂)`.
pub fn triangle_i3_lines(b: &TriangleBoundaryJet, wj: &OmegaJets) -> Result<I3Lines, TriangleError> {
    if b.order() < 2 {
        return Err(TriangleError::InsufficientOrder { needed: 2, available: b.order() });
    }
    let e2 = b.eps * b.eps;
    let w0 = OmegaAtOrigin::from(wj);
    let (p1, p2) = (&b.phi1[0], &b.phi2[0]);
    let (d1, d2, d3) = (&b.phi1[1], &b.phi2[1], &b.phi3[1]);
    let f = f0(b, &w0.a, &w0.b_x, &w0.b_y, &w0.c);

    let l1 = triangle_i2(b, &w0);
    let da = OmegaJets::sum_derivative(&wj.a);
    let l2 = combo(&[
        (e2 / 6.0, &b.phi3[2]),
        (-2.0 * e2 / 3.0, &b.phi1[2]),
        (2.0 * e2 / 3.0, &b.phi2[2]),
        (-2.0 * e2 / 3.0, &da),
    ]);

    let dbx = OmegaJets::sum_derivative(&wj.b_x);
    let dby = OmegaJets::sum_derivative(&wj.b_y);
    let bx_arg = combo(&[(3.0, d2), (1.0, d1)]);
    let by_arg = combo(&[(3.0, d1), (1.0, d2)]);
    let l3 = combo(&[
        (2.0 * e2 / 3.0, &mat_vec(&dby, p1)),
        (-2.0 * e2 / 3.0, &mat_vec(&dbx, p2)),
        (-e2 / 3.0, &mat_vec(&w0.b_x, &bx_arg)),
        (e2 / 3.0, &mat_vec(&w0.b_y, &by_arg)),
    ]);

    let dc = OmegaJets::sum_derivative(&wj.c);
    let l4 = combo(&[
        (-2.0 * e2 / 3.0, &bilinear(&dc, p1, p2)),
        (-e2 / 3.0, &bilinear(&w0.c, &by_arg, p2)),
        (-e2 / 3.0, &bilinear(&w0.c, p1, &bx_arg)),
    ]);

    let plus = combo(&[(1.0, d3), (1.0, &f)]);
    let minus = combo(&[(1.0, d3), (-1.0, &f)]);
    let l5 = combo(&[(e2 / 3.0, &mat_vec(&w0.b_x, &plus)), (e2 / 3.0, &bilinear(&w0.c, p1, &plus))]);
    let l6 = combo(&[(-e2 / 3.0, &mat_vec(&w0.b_y, &minus)), (-e2 / 3.0, &bilinear(&w0.c, p2, &minus))]);
    Ok(I3Lines { l1, l2, l3, l4, l5, l6 })
}

pub fn triangle_i3(b: &TriangleBoundaryJet, wj: &OmegaJets) -> Result<Vec<f64>, TriangleError> {
    Ok(triangle_i3_lines(b, wj)?.sum())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlopeError {
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("norm vanishes exactly at eps = {0}")]
    ExactZero(f64),
}

/// Least-squares slope of `log(norm)` against `log(eps)`.
pub fn residual_slope(values: &[(f64, f64)]) -> Result<f64, SlopeError> {
    if values.len() < 3 {
        return Err(SlopeError::TooFewSamples(values.len()));
    }
    if let Some(&(e, _)) = values.iter().find(|(_, v)| *v == 0.0) {
        return Err(SlopeError::ExactZero(e));
    }
    Ok(loglog_slope(values))
}

/// Max over colour components of `|v|`.
pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// A random ω-flat dataset: polynomial `ω` and the jets of a flat splitting.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatJetData {
    pub omega: TwoForm,
    pub phi_x: JetTable,
    pub phi_y: JetTable,
}

/// Draws `A`, `B_x`, `B_y` of degree `omega_degree` with coefficients in
/// `[−amplitude, amplitude)`, keeps `c` as the constant structure tensor, draws
/// the `φ_x` axis jets and `φ_y` jets in `[−1, 1)` and completes `φ_x` by
/// [`flat_jet_extension`].
pub fn random_flat_jets(rng: &mut Lcg, c: &[f64], n: usize, amplitude: f64, omega_degree: usize, order: usize) -> FlatJetData {
    let a = rng.poly(&[n], omega_degree, order, amplitude);
    let bx = rng.poly(&[n, n], omega_degree, order, amplitude);
    let by = rng.poly(&[n, n], omega_degree, order, amplitude);
    let omega = TwoForm::new(a, bx, by, PolyField::constant(&[n, n, n], order, c)).expect("structure tensor is antisymmetric");
    let axis: Vec<Vec<f64>> = (0..=order).map(|_| rng.vector(n, 1.0)).collect();
    let phi_y = JetTable::from_poly(&rng.poly(&[n], order, order, 1.0));
    let phi_x = flat_jet_extension(&omega, &axis, &phi_y, order).expect("orders agree");
    FlatJetData { omega, phi_x, phi_y }
}

/// Max-norms of `I₁`, `I₂`, `I₃` at one `ε`.
pub fn triangle_norms(data: &FlatJetData, eps: f64) -> Result<[f64; 3], TriangleError> {
    let wj = OmegaJets::from_two_form(&data.omega);
    let b = boundary_jets_from_bulk(&data.phi_x, &data.phi_y, eps, 2)?;
    Ok([
        max_norm(&triangle_i1(&b)),
        max_norm(&triangle_i2(&b, &OmegaAtOrigin::from(&wj))),
        max_norm(&triangle_i3(&b, &wj)?),
    ])
}

/// `I₂` at one `ε` after adding `delta` to the value `φ₁(0)` of colour 0,
/// which breaks flatness at zeroth order.
pub fn perturbed_i2_norm(data: &FlatJetData, eps: f64, delta: f64) -> Result<f64, TriangleError> {
    let wj = OmegaJets::from_two_form(&data.omega);
    let mut b = boundary_jets_from_bulk(&data.phi_x, &data.phi_y, eps, 2)?;
    b.phi1[0][0] += delta;
    Ok(max_norm(&triangle_i2(&b, &OmegaAtOrigin::from(&wj))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn so3() -> PolyField {
        let mut c = vec![0.0; 27];
        for (a, b, cc) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            c[(a * 3 + b) * 3 + cc] = 1.0;
            c[(a * 3 + cc) * 3 + b] = -1.0;
        }
        PolyField::constant(&[3, 3, 3], 3, &c)
    }

    fn bulk(phi_x: PolyField, phi_y: PolyField, eps: f64, order: usize) -> TriangleBoundaryJet {
        boundary_jets_from_bulk(&JetTable::from_poly(&phi_x), &JetTable::from_poly(&phi_y), eps, order).unwrap()
    }

    fn scalar(i: usize, j: usize, v: f64, cap: usize) -> PolyField {
        let mut f = PolyField::zeros(&[1], cap);
        f.set(0, i, j, v);
        f
    }

    #[test]
    fn flat_extension_examples() {
        let w = TwoForm::zero(1, 4);
        let axis = vec![vec![0.5], vec![1.0], vec![0.0], vec![0.0], vec![0.0]];
        let jets = flat_jet_extension(&w, &axis, &JetTable::zeros(&[1], 4), 4).unwrap();
        for m in 0..4 {
            for n in 1..4 - m {
                assert_eq!(jets.get(0, m, n), 0.0);
            }
        }

        let jets = flat_jet_extension(&w, &axis, &JetTable::from_poly(&scalar(1, 0, 1.0, 4)), 4).unwrap();
        assert_eq!(jets.get(0, 0, 1), 1.0);
        assert_eq!(jets.get(0, 0, 2), 0.0);
        assert_eq!(jets.get(0, 1, 1), 0.0);

        let w = TwoForm::new(scalar(0, 0, -1.0, 4), PolyField::zeros(&[1, 1], 4), PolyField::zeros(&[1, 1], 4), PolyField::zeros(&[1, 1, 1], 4))
            .unwrap();
        let zero_axis = vec![vec![0.0]; 5];
        let jets = flat_jet_extension(&w, &zero_axis, &JetTable::zeros(&[1], 4), 4).unwrap();
        assert_eq!(jets.get(0, 0, 1), -1.0);
    }

    #[test]
    fn boundary_jet_examples() {
        let c = PolyField::constant(&[1], 3, &[0.7]);
        let b = bulk(c.clone(), PolyField::constant(&[1], 3, &[0.2]), 0.1, 2);
        assert!((b.phi3[0][0] - 0.5).abs() < 1e-15);
        assert_eq!(b.phi3[1][0], 0.0);

        let b = bulk(scalar(1, 0, 2.0, 3), PolyField::zeros(&[1], 3), 0.3, 1);
        assert!((b.phi3[0][0] - 0.6).abs() < 1e-15);
        assert!((b.phi3[1][0] - 2.0).abs() < 1e-15);
        assert!((triangle_i1(&b)[0] - 0.6).abs() < 1e-15);

        let eps = 0.2;
        let b = bulk(PolyField::zeros(&[1], 3), scalar(0, 2, 1.0, 3), eps, 2);
        assert!((b.phi3[0][0] + eps * eps).abs() < 1e-15);
        assert!((b.phi3[1][0] - 2.0 * eps).abs() < 1e-15);
        assert!((b.phi3[2][0] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn insufficient_order_is_reported() {
        let j = JetTable::zeros(&[1], 2);
        assert!(matches!(boundary_jets_from_bulk(&j, &j, 0.1, 3), Err(TriangleError::InsufficientOrder { .. })));
    }

    #[test]
    fn i2_vanishes_for_exact_forms() {
        // φ = d(x²) = (2x, 0) with ω = 0
        let b = bulk(scalar(1, 0, 2.0, 3), PolyField::zeros(&[1], 3), 0.37, 2);
        let w0 = OmegaAtOrigin::from(&OmegaJets::from_two_form(&TwoForm::zero(1, 1)));
        assert_eq!(triangle_i2(&b, &w0), vec![0.0]);
    }

    fn jets_with(phi: [Vec<f64>; 3], order: usize, eps: f64) -> TriangleBoundaryJet {
        let mut phi1 = vec![phi[0].clone()];
        let mut phi2 = vec![phi[1].clone()];
        let mut phi3 = vec![phi[2].clone()];
        for k in 1..=order {
            phi1.push(phi[0].iter().map(|v| v * (k + 1) as f64).collect());
            phi2.push(phi[1].iter().map(|v| v * (k + 2) as f64).collect());
            phi3.push(phi[2].iter().map(|v| v * (k + 3) as f64).collect());
        }
        TriangleBoundaryJet { eps, phi1, phi2, phi3, series_order: vec![0; order + 1] }
    }

    #[test]
    fn i3_lines_individually() {
        let eps = 0.5;
        let e2 = eps * eps;
        let b = jets_with([vec![1.0], vec![2.0], vec![3.0]], 2, eps);
        // φ₁ = (1, 2, 3), φ₂ = (2, 6, 8), φ₃ = (3, 12, 15) for k = 0, 1, 2
        let mut a = PolyField::zeros(&[1], 1);
        a.set(0, 0, 0, 0.5);
        a.set(0, 1, 0, 0.25);
        a.set(0, 0, 1, -1.0);
        let mut bx = PolyField::zeros(&[1, 1], 1);
        bx.set(0, 0, 0, 0.1);
        bx.set(0, 1, 0, 0.2);
        let mut by = PolyField::zeros(&[1, 1], 1);
        by.set(0, 0, 0, -0.3);
        by.set(0, 0, 1, 0.4);
        let w = TwoForm::new(a, bx, by, PolyField::zeros(&[1, 1, 1], 1)).unwrap();
        let lines = triangle_i3_lines(&b, &OmegaJets::from_two_form(&w)).unwrap();

        let f0 = 0.5 + 0.1 * 2.0 + 0.3 * 1.0;
        let i2 = 3.0 - 1.0 + 2.0 - eps * 2.0 + eps * 6.0 - eps * f0;
        assert!((lines.l1[0] - i2).abs() < 1e-15);
        let l2 = e2 / 6.0 * 15.0 - 2.0 * e2 / 3.0 * 3.0 + 2.0 * e2 / 3.0 * 8.0 - 2.0 * e2 / 3.0 * (0.25 - 1.0);
        assert!((lines.l2[0] - l2).abs() < 1e-15);
        let l3 = 2.0 * e2 / 3.0 * 0.4 * 1.0 - 2.0 * e2 / 3.0 * 0.2 * 2.0 - e2 / 3.0 * (0.1 * (18.0 + 2.0) + 0.3 * (6.0 + 6.0));
        assert!((lines.l3[0] - l3).abs() < 1e-15);
        assert_eq!(lines.l4, vec![0.0]);
        assert!((lines.l5[0] - e2 / 3.0 * 0.1 * (12.0 + f0)).abs() < 1e-15);
        assert!((lines.l6[0] + e2 / 3.0 * -0.3 * (12.0 - f0)).abs() < 1e-15);
    }

    #[test]
    fn i3_c_line() {
        let eps = 0.5;
        let e2 = eps * eps;
        let b = jets_with([vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0]], 2, eps);
        let w = TwoForm::new(
            PolyField::zeros(&[3], 3),
            PolyField::zeros(&[3, 3], 3),
            PolyField::zeros(&[3, 3], 3),
            so3(),
        )
        .unwrap();
        let lines = triangle_i3_lines(&b, &OmegaJets::from_two_form(&w)).unwrap();
        // C(3∂₁φ₁+∂₂φ₂, φ₂) + C(φ₁, 3∂₂φ₂+∂₁φ₁) with ∂₁φ₁ = 2e₁, ∂₂φ₂ = 3e₂
        // = (6e₁+3e₂)×e₂ + e₁×(9e₂+2e₁) = 6e₃ + 9e₃
        assert!((lines.l4[2] + e2 / 3.0 * 15.0).abs() < 1e-15);
        assert_eq!(&lines.l4[..2], &[0.0, 0.0]);
    }

    struct FlatCase {
        w: TwoForm,
        phi_x: JetTable,
        phi_y: JetTable,
    }

    fn random_flat(seed: u64, order: usize) -> FlatCase {
        let c = crate::bch::StructureTensor::so3();
        let d = random_flat_jets(&mut Lcg::new(seed), c.entries(), 3, 0.3, 2, order);
        FlatCase { w: d.omega, phi_x: d.phi_x, phi_y: d.phi_y }
    }

    const EPS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

    fn slopes(case: &FlatCase, i3: impl Fn(&TriangleBoundaryJet, &OmegaJets) -> Vec<f64>) -> [f64; 3] {
        let wj = OmegaJets::from_two_form(&case.w);
        let w0 = OmegaAtOrigin::from(&wj);
        let mut s = [Vec::new(), Vec::new(), Vec::new()];
        for eps in EPS {
            let b = boundary_jets_from_bulk(&case.phi_x, &case.phi_y, eps, 2).unwrap();
            s[0].push((eps, max_norm(&triangle_i1(&b))));
            s[1].push((eps, max_norm(&triangle_i2(&b, &w0))));
            s[2].push((eps, max_norm(&i3(&b, &wj))));
        }
        s.map(|v| residual_slope(&v).unwrap())
    }

    #[test]
    fn flat_data_have_the_expected_orders() {
        for seed in 1..=5 {
            let case = random_flat(seed, 8);
            let [s1, s2, s3] = slopes(&case, |b, wj| triangle_i3(b, wj).unwrap());
            assert!((0.8..=1.3).contains(&s1), "I1 slope {s1}");
            assert!((1.8..=2.3).contains(&s2), "I2 slope {s2}");
            assert!((2.7..=3.3).contains(&s3), "I3 slope {s3}");
        }
    }

    #[test]
    fn doubled_c_line_loses_an_order() {
        let case = random_flat(3, 8);
        let [_, _, s3] = slopes(&case, |b, wj| {
            let lines = triangle_i3_lines(b, wj).unwrap();
            let e2 = b.eps * b.eps;
            let (d1, d2) = (&b.phi1[1], &b.phi2[1]);
            let by_arg = combo(&[(3.0, d1), (1.0, d2)]);
            let bx_arg = combo(&[(3.0, d2), (1.0, d1)]);
            let extra = combo(&[
                (-e2 / 3.0, &bilinear(&wj.c[0], &by_arg, &b.phi2[0])),
                (-e2 / 3.0, &bilinear(&wj.c[0], &b.phi1[0], &bx_arg)),
            ]);
            combo(&[(1.0, &lines.sum()), (1.0, &extra)])
        });
        assert!(s3 < 2.3, "slope {s3}");
    }

    #[test]
    fn flatness_violation_is_detected() {
        let case = random_flat(4, 8);
        let w0 = OmegaAtOrigin::from(&OmegaJets::from_two_form(&case.w));
        let mut samples = Vec::new();
        for eps in EPS {
            let mut b = boundary_jets_from_bulk(&case.phi_x, &case.phi_y, eps, 2).unwrap();
            let clean = triangle_i2(&b, &w0);
            b.phi1[1][0] += 0.1;
            let shifted = triangle_i2(&b, &w0);
            assert!((clean[0] - shifted[0] - 0.1 * eps).abs() < 1e-15);
            b.phi1[1][0] -= 0.1;
            b.phi1[0][0] += 0.1;
            samples.push((eps, max_norm(&triangle_i2(&b, &w0))));
        }
        let s2 = residual_slope(&samples).unwrap();
        assert!(s2 <= 1.3, "I2 slope {s2}");
    }

    #[test]
    fn constant_gauge_rotates_i2() {
        let case = random_flat(6, 6);
        let mut g = PolyField::zeros(&[3, 3], 6);
        let rot = [0.6, -0.8, 0.0, 0.8, 0.6, 0.0, 0.0, 0.0, 2.0];
        for (s, v) in rot.iter().enumerate() {
            g.set(s, 0, 0, *v);
        }
        let t = crate::algebra::GaugeTransform::new(g, PolyField::zeros(&[3], 6), PolyField::zeros(&[3], 6)).unwrap();
        let split = Splitting::new(case.phi_x.taylor().clone(), case.phi_y.taylor().clone()).unwrap();
        let split2 = crate::algebra::gauge_apply_splitting(&t, &split);
        let w2 = crate::algebra::gauge_apply_two_form(&t, &case.w);
        let eps = 0.05;
        let b = boundary_jets_from_bulk(&case.phi_x, &case.phi_y, eps, 2).unwrap();
        let b2 = boundary_jets_from_bulk(&JetTable::from_poly(split2.phi_x()), &JetTable::from_poly(split2.phi_y()), eps, 2).unwrap();
        let i2 = triangle_i2(&b, &OmegaAtOrigin::from(&OmegaJets::from_two_form(&case.w)));
        let i2t = triangle_i2(&b2, &OmegaAtOrigin::from(&OmegaJets::from_two_form(&w2)));
        let expect = mat_vec(&rot, &i2);
        for a in 0..3 {
            assert!((i2t[a] - expect[a]).abs() < 1e-14, "{a}: {} vs {}", i2t[a], expect[a]);
        }
    }

    #[test]
    fn abelian_i3_reduces_to_the_a_terms() {
        let mut rng = Lcg::new(11);
        let a = rng.poly(&[1], 2, 2, 1.0);
        let w = TwoForm::new(a.clone(), PolyField::zeros(&[1, 1], 2), PolyField::zeros(&[1, 1], 2), PolyField::zeros(&[1, 1, 1], 2)).unwrap();
        let b = jets_with([vec![0.3], vec![-0.2], vec![0.9]], 2, 0.1);
        let lines = triangle_i3_lines(&b, &OmegaJets::from_two_form(&w)).unwrap();
        assert_eq!(lines.l3, vec![0.0]);
        assert_eq!(lines.l4, vec![0.0]);
        assert_eq!(lines.l5, vec![0.0]);
        assert_eq!(lines.l6, vec![0.0]);
        let e2 = 0.01;
        let reduced = lines.l1[0] + e2 / 6.0 * b.phi3[2][0] - 2.0 * e2 / 3.0 * b.phi1[2][0] + 2.0 * e2 / 3.0 * b.phi2[2][0]
            - 2.0 * e2 / 3.0 * (a.coeff(0, 1, 0) + a.coeff(0, 0, 1));
        assert!((triangle_i3(&b, &OmegaJets::from_two_form(&w)).unwrap()[0] - reduced).abs() < 1e-16);
    }

    #[test]
    fn jets_agree_with_strip_transport() {
        use crate::transport::{transport_splitting, StraightenedStrip, TransportOptions};
        let order = 14;
        let mut rng = Lcg::new(21);
        let w = TwoForm::new(
            rng.poly(&[3], 2, order, 0.3),
            rng.poly(&[3, 3], 2, order, 0.3),
            rng.poly(&[3, 3], 2, order, 0.3),
            so3().with_cap(order),
        )
        .unwrap();
        let phi_y = rng.poly(&[3], 2, order, 1.0);
        let initial = rng.poly(&[3], 2, order, 1.0);
        let axis: Vec<Vec<f64>> = (0..=order).map(|m| (0..3).map(|a| initial.coeff(a, m, 0) * factorial(m)).collect()).collect();
        let jets = flat_jet_extension(&w, &axis, &JetTable::from_poly(&phi_y), order).unwrap();

        let y = 0.05;
        let strip = StraightenedStrip::new(w, phi_y, initial, y).unwrap();
        let opts = TransportOptions { x_cap: order, y_steps: 200, breach_threshold: f64::INFINITY };
        let slice = transport_splitting(&strip, &opts).unwrap();
        let expected = jets.taylor().restrict_y(y);
        for a in 0..3 {
            for m in 0..4 {
                let d = (slice.last().coeff(a, m, 0) - expected.coeff(a, m, 0)).abs();
                assert!(d < 1e-8, "slot {a} x^{m}: {d}");
            }
        }
    }

    #[test]
    fn slope_examples() {
        let sq: Vec<_> = EPS.iter().map(|&e| (e, e * e)).collect();
        assert!((residual_slope(&sq).unwrap() - 2.0).abs() < 1e-12);
        let cube: Vec<_> = EPS.iter().map(|&e| (e, 5.0 * e * e * e)).collect();
        assert!((residual_slope(&cube).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(residual_slope(&[(0.1, 1.0)]), Err(SlopeError::TooFewSamples(1)));
    }
}
