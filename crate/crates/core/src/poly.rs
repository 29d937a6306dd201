//! Truncated bivariate polynomials carrying tensor slots.
//!
//! A [`PolyField`] stores, for every slot of a small dense tensor, the
//! coefficients `c_ij` of `Σ c_ij x^i y^j` with `i + j <= cap`. All the field
//! data of a chart (splittings, 2-form components, gauge parameters) is
//! represented this way so that partial derivatives are exact and products
//! are truncated convolutions.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Coordinate axis of the chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

/// Number of monomials `x^i y^j` with `i + j <= cap`.
pub fn monomial_count(cap: usize) -> usize {
    (cap + 1) * (cap + 2) / 2
}

#[inline]
fn mono_index(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

/// Iterates `(i, j)` over all monomials of total degree `<= cap`, in storage order.
fn monomials(cap: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=cap).flat_map(|d| (0..=d).map(move |j| (d - j, j)))
}

fn slot_count(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Row-major multi-index of a flat slot number.
fn unflatten(shape: &[usize], mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for (k, &dim) in shape.iter().enumerate().rev() {
        idx[k] = flat % dim;
        flat /= dim;
    }
    idx
}

fn flatten(shape: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (&i, &d)| acc * d + i)
}

/// Truncated product of two coefficient blocks; terms above `out_cap` are dropped.
fn convolve_into(a: &[f64], a_cap: usize, b: &[f64], b_cap: usize, out: &mut [f64], out_cap: usize) {
    for (ia, (i1, j1)) in monomials(a_cap).enumerate() {
        let ca = a[ia];
        if ca == 0.0 {
            continue;
        }
        let d1 = i1 + j1;
        if d1 > out_cap {
            break;
        }
        let room = (out_cap - d1).min(b_cap);
        for d2 in 0..=room {
            let base = d2 * (d2 + 1) / 2;
            for j2 in 0..=d2 {
                let cb = b[base + j2];
                if cb != 0.0 {
                    out[mono_index(i1 + d2 - j2, j1 + j2)] += ca * cb;
                }
            }
        }
    }
}

#[derive(Clone, PartialEq)]
pub struct PolyField {
    shape: Vec<usize>,
    cap: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for PolyField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<_> = self.terms().collect();
        f.debug_struct("PolyField")
            .field("shape", &self.shape)
            .field("cap", &self.cap)
            .field("terms", &terms)
            .finish()
    }
}

impl PolyField {
    pub fn zeros(shape: &[usize], cap: usize) -> Self {
        Self {
            shape: shape.to_vec(),
            cap,
            coeffs: vec![0.0; slot_count(shape) * monomial_count(cap)],
        }
    }

    /// Point-independent field; `values` is the flattened tensor.
    pub fn constant(shape: &[usize], cap: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), slot_count(shape), "constant: wrong number of values");
        let mut f = Self::zeros(shape, cap);
        for (s, &v) in values.iter().enumerate() {
            f.set(s, 0, 0, v);
        }
        f
    }

    pub fn scalar(value: f64, cap: usize) -> Self {
        Self::constant(&[], cap, &[value])
    }

    /// A single scalar monomial `value · x^i y^j`.
    pub fn scalar_monomial(value: f64, i: usize, j: usize, cap: usize) -> Self {
        let mut f = Self::zeros(&[], cap);
        f.set(0, i, j, value);
        f
    }

    /// The identity matrix field of size `n`.
    pub fn identity(n: usize, cap: usize) -> Self {
        let mut f = Self::zeros(&[n, n], cap);
        for a in 0..n {
            f.set(a * n + a, 0, 0, 1.0);
        }
        f
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn slot_count(&self) -> usize {
        slot_count(&self.shape)
    }

    fn block(&self, slot: usize) -> &[f64] {
        let m = monomial_count(self.cap);
        &self.coeffs[slot * m..(slot + 1) * m]
    }

    fn block_mut(&mut self, slot: usize) -> &mut [f64] {
        let m = monomial_count(self.cap);
        &mut self.coeffs[slot * m..(slot + 1) * m]
    }

    /// Coefficient of `x^i y^j` in the given flat slot; zero above the cap.
    pub fn coeff(&self, slot: usize, i: usize, j: usize) -> f64 {
        if i + j > self.cap {
            0.0
        } else {
            self.block(slot)[mono_index(i, j)]
        }
    }

    /// Panics if `i + j` exceeds the cap.
    pub fn set(&mut self, slot: usize, i: usize, j: usize, value: f64) {
        assert!(i + j <= self.cap, "monomial x^{i} y^{j} above cap {}", self.cap);
        let k = mono_index(i, j);
        self.block_mut(slot)[k] = value;
    }

    pub fn add_to(&mut self, slot: usize, i: usize, j: usize, value: f64) {
        assert!(i + j <= self.cap, "monomial x^{i} y^{j} above cap {}", self.cap);
        let k = mono_index(i, j);
        self.block_mut(slot)[k] += value;
    }

    /// Flat slot number of a multi-index.
    pub fn slot_of(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.shape.len());
        flatten(&self.shape, idx)
    }

    /// Nonzero terms as `(slot, i, j, value)`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let m = monomial_count(self.cap);
        self.coeffs.iter().enumerate().filter(|(_, &c)| c != 0.0).map(move |(k, &c)| {
            let slot = k / m;
            let (i, j) = monomials(self.cap).nth(k % m).expect("index in range");
            (slot, i, j, c)
        })
    }

    /// Highest total degree carrying a nonzero coefficient.
    pub fn degree(&self) -> Option<usize> {
        self.terms().map(|(_, i, j, _)| i + j).max()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Largest coefficient deviation; caps may differ, shapes may not.
    pub fn max_abs_diff(&self, other: &PolyField) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff: shape mismatch");
        let cap = self.cap.max(other.cap);
        let mut m: f64 = 0.0;
        for s in 0..self.slot_count() {
            for (i, j) in monomials(cap) {
                m = m.max((self.coeff(s, i, j) - other.coeff(s, i, j)).abs());
            }
        }
        m
    }

    /// Same polynomial under a new cap; lowering the cap drops high terms.
    pub fn with_cap(&self, cap: usize) -> Self {
        let mut out = Self::zeros(&self.shape, cap);
        let keep = cap.min(self.cap);
        for s in 0..self.slot_count() {
            for (i, j) in monomials(keep) {
                out.set(s, i, j, self.coeff(s, i, j));
            }
        }
        out
    }

    pub fn eval(&self, x: f64, y: f64) -> Vec<f64> {
        let m = monomial_count(self.cap);
        let mut xp = vec![1.0; self.cap + 1];
        let mut yp = vec![1.0; self.cap + 1];
        for k in 1..=self.cap {
            xp[k] = xp[k - 1] * x;
            yp[k] = yp[k - 1] * y;
        }
        (0..self.slot_count())
            .map(|s| {
                let block = &self.coeffs[s * m..(s + 1) * m];
                monomials(self.cap).zip(block).map(|((i, j), &c)| c * xp[i] * yp[j]).sum()
            })
            .collect()
    }

    /// Exact partial derivative. The cap is kept.
    pub fn diff(&self, axis: Axis) -> Self {
        let mut out = Self::zeros(&self.shape, self.cap);
        for s in 0..self.slot_count() {
            for (i, j) in monomials(self.cap) {
                let c = self.coeff(s, i, j);
                if c == 0.0 {
                    continue;
                }
                match axis {
                    Axis::X if i > 0 => out.set(s, i - 1, j, c * i as f64),
                    Axis::Y if j > 0 => out.set(s, i, j - 1, c * j as f64),
                    _ => {}
                }
            }
        }
        out
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            cap: self.cap,
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    fn zip_with(&self, other: &PolyField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.shape, other.shape, "elementwise op: shape mismatch");
        let cap = self.cap.min(other.cap);
        let mut out = Self::zeros(&self.shape, cap);
        for s in 0..self.slot_count() {
            for (i, j) in monomials(cap) {
                out.set(s, i, j, f(self.coeff(s, i, j), other.coeff(s, i, j)));
            }
        }
        out
    }

    /// Substitutes `y -> factor · y`.
    pub fn scale_y(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for s in 0..self.slot_count() {
            for (i, j) in monomials(self.cap) {
                let c = self.coeff(s, i, j);
                if c != 0.0 {
                    out.set(s, i, j, c * factor.powi(j as i32));
                }
            }
        }
        out
    }

    /// Substitutes `y -> y + shift`, keeping the cap.
    pub fn shift_y(&self, shift: f64) -> Self {
        let mut out = Self::zeros(&self.shape, self.cap);
        for s in 0..self.slot_count() {
            for (i, j) in monomials(self.cap) {
                let c = self.coeff(s, i, j);
                if c == 0.0 {
                    continue;
                }
                // (y + shift)^j = Σ_l binom(j,l) y^l shift^(j-l)
                let mut binom = 1.0;
                for l in 0..=j {
                    out.add_to(s, i, l, c * binom * shift.powi((j - l) as i32));
                    binom = binom * (j - l) as f64 / (l + 1) as f64;
                }
            }
        }
        out
    }

    /// Restriction to the line `y = const`, as a polynomial in `x` alone.
    pub fn restrict_y(&self, y: f64) -> Self {
        let mut out = Self::zeros(&self.shape, self.cap);
        for s in 0..self.slot_count() {
            for (i, j) in monomials(self.cap) {
                let c = self.coeff(s, i, j);
                if c != 0.0 {
                    out.add_to(s, i, 0, c * y.powi(j as i32));
                }
            }
        }
        out
    }

    /// `∫_0^y f(x, Y) dY` as a polynomial in `x` alone.
    pub fn integrate_y_to(&self, y: f64) -> Self {
        let mut out = Self::zeros(&self.shape, self.cap);
        for s in 0..self.slot_count() {
            for (i, j) in monomials(self.cap) {
                let c = self.coeff(s, i, j);
                if c != 0.0 {
                    out.add_to(s, i, 0, c * y.powi(j as i32 + 1) / (j + 1) as f64);
                }
            }
        }
        out
    }

    /// One flat slot as a scalar field.
    pub fn component(&self, slot: usize) -> Self {
        Self {
            shape: Vec::new(),
            cap: self.cap,
            coeffs: self.block(slot).to_vec(),
        }
    }

    /// Assembles a tensor field from scalar components (flat order).
    pub fn from_components(shape: &[usize], parts: &[PolyField]) -> Self {
        assert_eq!(parts.len(), slot_count(shape));
        let cap = parts.iter().map(|p| p.cap).min().unwrap_or(0);
        let mut out = Self::zeros(shape, cap);
        for (s, p) in parts.iter().enumerate() {
            assert!(p.shape.is_empty(), "from_components expects scalar parts");
            for (i, j) in monomials(cap) {
                out.set(s, i, j, p.coeff(0, i, j));
            }
        }
        out
    }

    /// Reinterprets the slot layout without touching coefficients.
    pub fn reshape(&self, shape: &[usize]) -> Self {
        assert_eq!(slot_count(shape), self.slot_count(), "reshape: slot count differs");
        Self {
            shape: shape.to_vec(),
            cap: self.cap,
            coeffs: self.coeffs.clone(),
        }
    }

    /// Value of every slot at the origin (the constant coefficients).
    pub fn at_origin(&self) -> Vec<f64> {
        (0..self.slot_count()).map(|s| self.coeff(s, 0, 0)).collect()
    }

    /// Tensor product with contraction.
    ///
    /// Each pair `(ia, ib)` sums slot `ia` of `self` against slot `ib` of
    /// `other`. The result carries the unpaired slots of `self` followed by
    /// the unpaired slots of `other`, and is truncated to the smaller cap.
    pub fn mul(&self, other: &PolyField, pairs: &[(usize, usize)]) -> Result<PolyField, PolyError> {
        let plan = ContractionPlan::new(&self.shape, &other.shape, pairs)?;
        let cap = self.cap.min(other.cap);
        let mut out = PolyField::zeros(&plan.out_shape, cap);
        for &(sa, sb, so) in &plan.triples {
            let m_out = monomial_count(cap);
            let (a, b) = (self.block(sa), other.block(sb));
            convolve_into(a, self.cap, b, other.cap, &mut out.coeffs[so * m_out..(so + 1) * m_out], cap);
        }
        Ok(out)
    }

    /// Like [`PolyField::mul`], also returning the largest coefficient that
    /// the truncation discarded.
    pub fn mul_tracked(&self, other: &PolyField, pairs: &[(usize, usize)]) -> Result<(PolyField, f64), PolyError> {
        let plan = ContractionPlan::new(&self.shape, &other.shape, pairs)?;
        let cap = self.cap.min(other.cap);
        let full_cap = self.cap + other.cap;
        let mut full = PolyField::zeros(&plan.out_shape, full_cap);
        let m_full = monomial_count(full_cap);
        for &(sa, sb, so) in &plan.triples {
            convolve_into(
                self.block(sa),
                self.cap,
                other.block(sb),
                other.cap,
                &mut full.coeffs[so * m_full..(so + 1) * m_full],
                full_cap,
            );
        }
        let mut discarded: f64 = 0.0;
        for s in 0..full.slot_count() {
            for (i, j) in monomials(full_cap) {
                if i + j > cap {
                    discarded = discarded.max(full.coeff(s, i, j).abs());
                }
            }
        }
        Ok((full.with_cap(cap), discarded))
    }

    /// `M^a_b v^b` for a matrix field `M` (`[N, N]`) and a vector field `v` (`[N]`).
    pub fn matvec(&self, v: &PolyField) -> PolyField {
        self.mul(v, &[(1, 0)]).expect("matvec: shape mismatch")
    }

    /// Matrix product of two `[N, N]` fields.
    pub fn matmul(&self, other: &PolyField) -> PolyField {
        self.mul(other, &[(1, 0)]).expect("matmul: shape mismatch")
    }

    /// `C^a_{bc} u^b v^c` for a 3-slot tensor field `C`.
    pub fn bilinear(&self, u: &PolyField, v: &PolyField) -> PolyField {
        let cu = self.mul(u, &[(1, 0)]).expect("bilinear: shape mismatch");
        cu.mul(v, &[(1, 0)]).expect("bilinear: shape mismatch")
    }

    /// Transpose of a two-slot field.
    pub fn transpose(&self) -> PolyField {
        assert_eq!(self.shape.len(), 2, "transpose expects a matrix field");
        let (n, m) = (self.shape[0], self.shape[1]);
        let mut out = PolyField::zeros(&[m, n], self.cap);
        for a in 0..n {
            for b in 0..m {
                out.block_mut(b * n + a).copy_from_slice(self.block(a * m + b));
            }
        }
        out
    }
}

/// Precomputed slot triples `(slot_a, slot_b, slot_out)` for a contraction.
pub(crate) struct ContractionPlan {
    pub(crate) out_shape: Vec<usize>,
    pub(crate) triples: Vec<(usize, usize, usize)>,
}

impl ContractionPlan {
    pub(crate) fn new(sa: &[usize], sb: &[usize], pairs: &[(usize, usize)]) -> Result<Self, PolyError> {
        for (k, &(ia, ib)) in pairs.iter().enumerate() {
            if ia >= sa.len() || ib >= sb.len() {
                return Err(PolyError::ShapeMismatch(format!(
                    "pair ({ia}, {ib}) out of range for shapes {sa:?} and {sb:?}"
                )));
            }
            if sa[ia] != sb[ib] {
                return Err(PolyError::ShapeMismatch(format!(
                    "paired slots have dimensions {} and {}",
                    sa[ia], sb[ib]
                )));
            }
            if pairs[..k].iter().any(|&(pa, pb)| pa == ia || pb == ib) {
                return Err(PolyError::ShapeMismatch("slot paired twice".into()));
            }
        }
        let free_a: Vec<usize> = (0..sa.len()).filter(|k| !pairs.iter().any(|p| p.0 == *k)).collect();
        let free_b: Vec<usize> = (0..sb.len()).filter(|k| !pairs.iter().any(|p| p.1 == *k)).collect();
        let out_shape: Vec<usize> = free_a.iter().map(|&k| sa[k]).chain(free_b.iter().map(|&k| sb[k])).collect();

        let mut triples = Vec::new();
        for fa in 0..slot_count(sa) {
            let ia = unflatten(sa, fa);
            for fb in 0..slot_count(sb) {
                let ib = unflatten(sb, fb);
                if pairs.iter().all(|&(pa, pb)| ia[pa] == ib[pb]) {
                    let io: Vec<usize> = free_a.iter().map(|&k| ia[k]).chain(free_b.iter().map(|&k| ib[k])).collect();
                    triples.push((fa, fb, flatten(&out_shape, &io)));
                }
            }
        }
        Ok(Self { out_shape, triples })
    }
}

impl Add for &PolyField {
    type Output = PolyField;
    fn add(self, rhs: &PolyField) -> PolyField {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &PolyField {
    type Output = PolyField;
    fn sub(self, rhs: &PolyField) -> PolyField {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Add for PolyField {
    type Output = PolyField;
    fn add(self, rhs: PolyField) -> PolyField {
        &self + &rhs
    }
}

impl Sub for PolyField {
    type Output = PolyField;
    fn sub(self, rhs: PolyField) -> PolyField {
        &self - &rhs
    }
}

impl Neg for &PolyField {
    type Output = PolyField;
    fn neg(self) -> PolyField {
        self.scale(-1.0)
    }
}

impl Neg for PolyField {
    type Output = PolyField;
    fn neg(self) -> PolyField {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &PolyField {
    type Output = PolyField;
    fn mul(self, k: f64) -> PolyField {
        self.scale(k)
    }
}
