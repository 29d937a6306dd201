//! Path-ordered exponentials in one dimension and transport of splittings
//! across a straightened strip.
//!
//! Ordering convention: later times act on the left, so the transporter of
//! `A` on `[t₀, t₁]` solves `U' = A(t) U`, `U(t₀) = I`.
//!
//! Two-dimensional transport integrates the flatness equation solved for the
//! `y`-derivative,
//!
//! ```text
//! ∂_y φ_x = ∂_x φ_y + A + B_x φ_y − B_y φ_x + C(φ_x, φ_y),
//! ```
//!
//! keeping `φ_x(·, y)` as a polynomial in `x` and stepping in `y` with RK4.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::algebra::{AlgebraError, TwoForm};
use crate::linalg::expm;
use crate::poly::{Axis, PolyField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("empty interval [{0}, {1}]")]
    EmptyInterval(f64, f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("truncation breach at y = {y}: discarded coefficient {discarded:e} exceeds {threshold:e}")]
    TruncationBreach { y: f64, discarded: f64, threshold: f64 },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// A matrix-valued function of one variable on an interval.
#[derive(Clone, Debug, PartialEq)]
pub enum MatrixPath {
    /// `A(t) = Σ_k coeffs[k] t^k` on `[t0, t1]`.
    Polynomial { coeffs: Vec<DMatrix<f64>>, t0: f64, t1: f64 },
    /// `A(t) = values[i]` on `[breaks[i], breaks[i+1]]`.
    Piecewise { breaks: Vec<f64>, values: Vec<DMatrix<f64>> },
}

impl MatrixPath {
    pub fn polynomial(coeffs: Vec<DMatrix<f64>>, t0: f64, t1: f64) -> Result<Self, TransportError> {
        if !(t1 > t0) {
            return Err(TransportError::EmptyInterval(t0, t1));
        }
        if coeffs.is_empty() {
            return Err(TransportError::Dimension("no coefficients".into()));
        }
        let n = coeffs[0].nrows();
        if coeffs.iter().any(|c| c.nrows() != n || c.ncols() != n) {
            return Err(TransportError::Dimension("coefficients must be square of equal size".into()));
        }
        Ok(Self::Polynomial { coeffs, t0, t1 })
    }

    pub fn constant(a: DMatrix<f64>, t0: f64, t1: f64) -> Result<Self, TransportError> {
        Self::polynomial(vec![a], t0, t1)
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<DMatrix<f64>>) -> Result<Self, TransportError> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(TransportError::Dimension("need one more break than segment".into()));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(TransportError::EmptyInterval(breaks[0], *breaks.last().unwrap()));
        }
        let n = values[0].nrows();
        if values.iter().any(|c| c.nrows() != n || c.ncols() != n) {
            return Err(TransportError::Dimension("segment values must be square of equal size".into()));
        }
        Ok(Self::Piecewise { breaks, values })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Polynomial { coeffs, .. } => coeffs[0].nrows(),
            Self::Piecewise { values, .. } => values[0].nrows(),
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        match self {
            Self::Polynomial { t0, t1, .. } => (*t0, *t1),
            Self::Piecewise { breaks, .. } => (breaks[0], *breaks.last().unwrap()),
        }
    }

    /// Value at `t`; for piecewise paths, the segment containing `t` (right-continuous).
    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        match self {
            Self::Polynomial { coeffs, .. } => {
                let mut acc = coeffs.last().unwrap().clone();
                for c in coeffs.iter().rev().skip(1) {
                    acc = acc * t + c;
                }
                acc
            }
            Self::Piecewise { breaks, values } => {
                let i = breaks[1..].iter().position(|&b| t < b).unwrap_or(values.len() - 1);
                values[i].clone()
            }
        }
    }

    /// The same path restricted to `[a, b]`.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self, TransportError> {
        match self {
            Self::Polynomial { coeffs, .. } => Self::polynomial(coeffs.clone(), a, b),
            Self::Piecewise { breaks, values } => {
                let mut nb = vec![a];
                let mut nv = Vec::new();
                for (i, v) in values.iter().enumerate() {
                    let (lo, hi) = (breaks[i].max(a), breaks[i + 1].min(b));
                    if hi > lo {
                        nv.push(v.clone());
                        nb.push(hi);
                    }
                }
                Self::piecewise(nb, nv)
            }
        }
    }

    /// Smooth pieces of the path, each a polynomial on its own interval.
    fn smooth_pieces(&self) -> Vec<(Vec<DMatrix<f64>>, f64, f64)> {
        match self {
            Self::Polynomial { coeffs, t0, t1 } => vec![(coeffs.clone(), *t0, *t1)],
            Self::Piecewise { breaks, values } => {
                values.iter().enumerate().map(|(i, v)| (vec![v.clone()], breaks[i], breaks[i + 1])).collect()
            }
        }
    }
}

fn poly_matrix(coeffs: &[DMatrix<f64>], t: f64) -> DMatrix<f64> {
    let mut acc = coeffs.last().unwrap().clone();
    for c in coeffs.iter().rev().skip(1) {
        acc = acc * t + c;
    }
    acc
}

/// `P exp ∫ A` by RK4 with `steps` total steps, spread over smooth pieces in
/// proportion to their length.
pub fn path_ordered_exp(p: &MatrixPath, steps: usize) -> DMatrix<f64> {
    let n = p.dim();
    let (t0, t1) = p.interval();
    let mut u = DMatrix::<f64>::identity(n, n);
    for (coeffs, a, b) in p.smooth_pieces() {
        let k = ((steps as f64) * (b - a) / (t1 - t0)).round().max(1.0) as usize;
        let h = (b - a) / k as f64;
        for s in 0..k {
            let t = a + s as f64 * h;
            let am = poly_matrix(&coeffs, t);
            let ah = poly_matrix(&coeffs, t + 0.5 * h);
            let ae = poly_matrix(&coeffs, t + h);
            let k1 = &am * &u;
            let k2 = &ah * (&u + &k1 * (0.5 * h));
            let k3 = &ah * (&u + &k2 * (0.5 * h));
            let k4 = &ae * (&u + &k3 * h);
            u += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    u
}

/// `I_{dim=1} = v − (P exp ∫ A) u`.
pub fn one_dim_obstruction(
    p: &MatrixPath,
    u: &DVector<f64>,
    v: &DVector<f64>,
    steps: usize,
) -> Result<DVector<f64>, TransportError> {
    let n = p.dim();
    if u.len() != n || v.len() != n {
        return Err(TransportError::Dimension(format!("vectors must have length {n}")));
    }
    Ok(v - path_ordered_exp(p, steps) * u)
}

/// Transport data on `[0, 1] × [y_start, y_end]` in straightened coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct StraightenedStrip {
    pub omega: TwoForm,
    /// The `y`-component `φ_y(x, y)` of the splitting.
    pub transporter: PolyField,
    /// `φ_x(x, y_start)`, a polynomial in `x`.
    pub initial: PolyField,
    pub y_start: f64,
    pub y_end: f64,
}

impl StraightenedStrip {
    pub fn new(omega: TwoForm, transporter: PolyField, initial: PolyField, y_end: f64) -> Result<Self, TransportError> {
        let n = omega.n();
        for (f, name) in [(&transporter, "transporter"), (&initial, "initial")] {
            if f.shape() != [n] {
                return Err(TransportError::Dimension(format!("{name} must have shape [{n}]")));
            }
        }
        if !(y_end > 0.0) {
            return Err(TransportError::EmptyInterval(0.0, y_end));
        }
        Ok(Self { omega, transporter, initial, y_start: 0.0, y_end })
    }

    /// The strip continuing from `y_start` with new initial data.
    pub fn restarted(&self, initial: PolyField, y_start: f64, y_end: f64) -> Self {
        Self { initial, y_start, y_end, ..self.clone() }
    }

    /// The same problem in the coordinate `y = λ y'`: components with a `y`
    /// index pick up a factor `λ`, all fields are substituted.
    pub fn reparametrized(&self, lambda: f64) -> Result<Self, TransportError> {
        let w = &self.omega;
        let omega = TwoForm::new(
            &w.a().scale_y(lambda) * lambda,
            w.b_x().scale_y(lambda),
            &w.b_y().scale_y(lambda) * lambda,
            w.c().scale_y(lambda),
        )?;
        Ok(Self {
            omega,
            transporter: &self.transporter.scale_y(lambda) * lambda,
            initial: self.initial.clone(),
            y_start: self.y_start / lambda,
            y_end: self.y_end / lambda,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportOptions {
    pub x_cap: usize,
    pub y_steps: usize,
    /// Largest coefficient the `x`-truncation may silently drop.
    pub breach_threshold: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self { x_cap: 12, y_steps: 1000, breach_threshold: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportResult {
    pub ys: Vec<f64>,
    /// `φ_x(·, ys[j])` as polynomials in `x`.
    pub slices: Vec<PolyField>,
    pub max_discarded: f64,
}

impl TransportResult {
    pub fn last(&self) -> &PolyField {
        self.slices.last().expect("at least the initial slice")
    }
}

/// The data of the flatness equation frozen on one line `y = const`.
struct LineData {
    source: PolyField,
    b_y: PolyField,
    c_phi_y: PolyField,
}

struct Tracker {
    cap: usize,
    worst: f64,
}

impl Tracker {
    fn restrict(&mut self, f: &PolyField, y: f64) -> PolyField {
        let line = f.restrict_y(y);
        for (_, i, _, c) in line.terms() {
            if i > self.cap {
                self.worst = self.worst.max(c.abs());
            }
        }
        line.with_cap(self.cap)
    }

    fn mul(&mut self, a: &PolyField, b: &PolyField, pairs: &[(usize, usize)]) -> PolyField {
        let (p, dropped) = a.mul_tracked(b, pairs).expect("shapes validated at construction");
        self.worst = self.worst.max(dropped);
        p
    }
}

impl LineData {
    fn new(strip: &StraightenedStrip, y: f64, tr: &mut Tracker) -> Self {
        let w = &strip.omega;
        let phi_y = tr.restrict(&strip.transporter, y);
        let dphi_y = tr.restrict(&strip.transporter.diff(Axis::X), y);
        let a = tr.restrict(w.a(), y);
        let b_x = tr.restrict(w.b_x(), y);
        let b_y = tr.restrict(w.b_y(), y);
        let c = tr.restrict(w.c(), y);
        let bx_phi = tr.mul(&b_x, &phi_y, &[(1, 0)]);
        let source = &(&dphi_y + &a) + &bx_phi;
        // C^a_{bc} φ_y^c as a matrix acting on φ_x^b.
        let c_phi_y = tr.mul(&c, &phi_y, &[(2, 0)]);
        Self { source, b_y, c_phi_y }
    }

    fn rhs(&self, phi_x: &PolyField, tr: &mut Tracker) -> PolyField {
        let by = tr.mul(&self.b_y, phi_x, &[(1, 0)]);
        let cp = tr.mul(&self.c_phi_y, phi_x, &[(1, 0)]);
        &(&self.source - &by) + &cp
    }
}

/// RK4 transport of `φ_x` from `y_start` to `y_end`; returns all slices.
pub fn transport_splitting(strip: &StraightenedStrip, opts: &TransportOptions) -> Result<TransportResult, TransportError> {
    if opts.y_steps == 0 {
        return Err(TransportError::Dimension("y_steps must be positive".into()));
    }
    let mut tr = Tracker { cap: opts.x_cap, worst: 0.0 };
    let mut phi = tr.restrict(&strip.initial, 0.0);
    let h = (strip.y_end - strip.y_start) / opts.y_steps as f64;
    let mut ys = vec![strip.y_start];
    let mut slices = vec![phi.clone()];
    let mut lower = LineData::new(strip, strip.y_start, &mut tr);
    for s in 0..opts.y_steps {
        let y = strip.y_start + s as f64 * h;
        let mid = LineData::new(strip, y + 0.5 * h, &mut tr);
        let upper = LineData::new(strip, y + h, &mut tr);
        let k1 = lower.rhs(&phi, &mut tr);
        let k2 = mid.rhs(&(&phi + &(&k1 * (0.5 * h))), &mut tr);
        let k3 = mid.rhs(&(&phi + &(&k2 * (0.5 * h))), &mut tr);
        let k4 = upper.rhs(&(&phi + &(&k3 * h)), &mut tr);
        let incr = &(&(&k1 + &(&k2 * 2.0)) + &(&k3 * 2.0)) + &k4;
        phi = &phi + &(&incr * (h / 6.0));
        if tr.worst > opts.breach_threshold {
            return Err(TransportError::TruncationBreach {
                y: y + h,
                discarded: tr.worst,
                threshold: opts.breach_threshold,
            });
        }
        ys.push(y + h);
        slices.push(phi.clone());
        lower = upper;
    }
    Ok(TransportResult { ys, slices, max_discarded: tr.worst })
}

/// Closed form of abelian transport:
/// `φ_x(x, y) = φ_x(x, 0) + ∫_0^y A dY + ∂_x ∫_0^y φ_y dY`.
pub fn abelian_transport_oracle(a: &PolyField, transporter: &PolyField, initial: &PolyField, y: f64) -> PolyField {
    let area = a.integrate_y_to(y);
    let flux = transporter.integrate_y_to(y).diff(Axis::X);
    let cap = initial.cap().max(area.cap()).max(flux.cap());
    &(&initial.restrict_y(0.0).with_cap(cap) + &area.with_cap(cap)) + &flux.with_cap(cap)
}

/// Constant-connection closed form `φ_x(y) = e^{−M y} φ_x(0) e^{M y}`, the
/// solution of `∂_y φ_x = [φ_x, M]`.
pub fn conjugation_oracle(m: &DMatrix<f64>, phi0: &DMatrix<f64>, y: f64) -> DMatrix<f64> {
    expm(&(m * -y)) * phi0 * expm(&(m * y))
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn loglog_slope(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let (sx, sy) = samples.iter().fold((0.0, 0.0), |(a, b), (h, e)| (a + h.ln(), b + e.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = samples.iter().fold((0.0, 0.0), |(p, q), (h, e)| {
        let dx = h.ln() - mx;
        (p + dx * (e.ln() - my), q + dx * dx)
    });
    num / den
}
