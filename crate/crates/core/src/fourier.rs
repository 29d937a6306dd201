//! Fourier–Taylor fields on the unit disk.
//!
//! A field with offset `σ` is stored as coefficients `c_{n;k}` of
//! `Σ c_{n;k} r^{|n|+2k+σ} e^{inθ}`, with `|n| <= n_max` and `k <= k_max`.
//! The exponent law `|n| + 2k` is exactly what smoothness at the centre
//! requires, so a polynomial in `x, y` always has such an expansion.

use num_complex::Complex64;
use thiserror::Error;

use crate::poly::{PolyError, PolyField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FourierError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("term x^{i} y^{j} lands at (n = {n}; k = {k}) outside cutoffs (n_max = {n_max}, k_max = {k_max})")]
    OutsideCutoffs { i: usize, j: usize, n: i64, k: i64, n_max: usize, k_max: usize },
    #[error("parity violation: exponent {exponent} at harmonic {n} with offset {sigma}")]
    Parity { exponent: i64, n: i64, sigma: i32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FourierTaylorField {
    shape: Vec<usize>,
    sigma: i32,
    n_max: usize,
    k_max: usize,
    coeffs: Vec<Complex64>,
}

impl FourierTaylorField {
    pub fn zeros(shape: &[usize], sigma: i32, n_max: usize, k_max: usize) -> Self {
        let slots: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            sigma,
            n_max,
            k_max,
            coeffs: vec![Complex64::new(0.0, 0.0); slots * (2 * n_max + 1) * (k_max + 1)],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn sigma(&self) -> i32 {
        self.sigma
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn slot_count(&self) -> usize {
        self.shape.iter().product()
    }

    #[inline]
    fn index(&self, slot: usize, n: i64, k: usize) -> usize {
        (slot * (2 * self.n_max + 1) + (n + self.n_max as i64) as usize) * (self.k_max + 1) + k
    }

    #[inline]
    pub fn in_range(&self, n: i64, k: i64) -> bool {
        n.unsigned_abs() as usize <= self.n_max && k >= 0 && k as usize <= self.k_max
    }

    /// Coefficient `c_{n;k}`; zero outside the cutoffs.
    #[inline]
    pub fn get(&self, slot: usize, n: i64, k: i64) -> Complex64 {
        if self.in_range(n, k) {
            self.coeffs[self.index(slot, n, k as usize)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Panics outside the cutoffs.
    pub fn set(&mut self, slot: usize, n: i64, k: usize, v: Complex64) {
        assert!(self.in_range(n, k as i64), "({n}; {k}) outside cutoffs");
        let i = self.index(slot, n, k);
        self.coeffs[i] = v;
    }

    pub fn add_to(&mut self, slot: usize, n: i64, k: usize, v: Complex64) {
        assert!(self.in_range(n, k as i64), "({n}; {k}) outside cutoffs");
        let i = self.index(slot, n, k);
        self.coeffs[i] += v;
    }

    /// Nonzero coefficients as `(slot, n, k, value)`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, i64, usize, Complex64)> + '_ {
        let per_n = self.k_max + 1;
        let per_slot = (2 * self.n_max + 1) * per_n;
        self.coeffs.iter().enumerate().filter(|(_, c)| c.norm_sqr() != 0.0).map(move |(idx, &c)| {
            let slot = idx / per_slot;
            let rem = idx % per_slot;
            ((slot), (rem / per_n) as i64 - self.n_max as i64, rem % per_n, c)
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Largest coefficient deviation over the union of both cutoff ranges.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff: shape mismatch");
        let n_max = self.n_max.max(other.n_max) as i64;
        let k_max = self.k_max.max(other.k_max) as i64;
        let mut m: f64 = 0.0;
        for s in 0..self.slot_count() {
            for n in -n_max..=n_max {
                for k in 0..=k_max {
                    m = m.max((self.get(s, n, k) - other.get(s, n, k)).norm());
                }
            }
        }
        m
    }

    /// Largest `|c_{−n;k} − conj(c_{n;k})|`.
    pub fn reality_defect(&self) -> f64 {
        let mut m: f64 = 0.0;
        for (s, n, k, c) in self.terms() {
            m = m.max((self.get(s, -n, k as i64) - c.conj()).norm());
        }
        m
    }

    pub fn scale(&self, f: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= f);
        out
    }

    /// Same coefficients under an offset label `sigma` (multiplication by a power of `r`).
    pub fn relabel(&self, sigma: i32) -> Self {
        Self { sigma, ..self.clone() }
    }

    /// Copy under new cutoffs; coefficients outside are dropped.
    pub fn with_cutoffs(&self, n_max: usize, k_max: usize) -> Self {
        let mut out = Self::zeros(&self.shape, self.sigma, n_max, k_max);
        for (s, n, k, c) in self.terms() {
            if out.in_range(n, k as i64) {
                out.set(s, n, k, c);
            }
        }
        out
    }

    /// One flat slot as a scalar field.
    pub fn component(&self, slot: usize) -> Self {
        let per_slot = (2 * self.n_max + 1) * (self.k_max + 1);
        Self {
            shape: Vec::new(),
            sigma: self.sigma,
            n_max: self.n_max,
            k_max: self.k_max,
            coeffs: self.coeffs[slot * per_slot..(slot + 1) * per_slot].to_vec(),
        }
    }

    /// Evaluates every slot at polar point `(r, θ)`, `r > 0` when `σ < 0`.
    pub fn eval(&self, r: f64, theta: f64) -> Vec<Complex64> {
        (0..self.slot_count())
            .map(|s| {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in -(self.n_max as i64)..=self.n_max as i64 {
                    let phase = Complex64::from_polar(1.0, n as f64 * theta);
                    for k in 0..=self.k_max as i64 {
                        let c = self.get(s, n, k);
                        if c.norm_sqr() != 0.0 {
                            let e = n.abs() + 2 * k + self.sigma as i64;
                            acc += c * phase * r.powi(e as i32);
                        }
                    }
                }
                acc
            })
            .collect()
    }
}

/// How a Cartesian polynomial is carried over to polar form.
#[derive(Clone, Copy, Debug)]
pub enum CartesianKind<'a> {
    /// A function: the same values, expanded in `r` and `θ`.
    Scalar(&'a PolyField),
    /// The two components `(F_x, F_y)` of a 1-form index; produces
    /// `F_r = (x F_x + y F_y) / r` (σ = −1) and `F_θ = −y F_x + x F_y` (σ = 0).
    FormPair(&'a PolyField, &'a PolyField),
    /// The `xy`-component of a 2-form; produces `F_{rθ} = r F_{xy}` (σ = +1).
    AreaDensity(&'a PolyField),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Converted {
    Single(FourierTaylorField),
    Pair { radial: FourierTaylorField, angular: FourierTaylorField },
}

impl Converted {
    pub fn single(self) -> FourierTaylorField {
        match self {
            Converted::Single(f) => f,
            Converted::Pair { .. } => panic!("expected a single field"),
        }
    }

    pub fn pair(self) -> (FourierTaylorField, FourierTaylorField) {
        match self {
            Converted::Pair { radial, angular } => (radial, angular),
            Converted::Single(_) => panic!("expected a form pair"),
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Adds `value · x^i y^j` (in slot `slot`) to an offset-0 field.
fn add_monomial(out: &mut FourierTaylorField, slot: usize, i: usize, j: usize, value: f64) -> Result<(), FourierError> {
    // cos^i θ = 2^{-i} Σ_p C(i,p) e^{i(2p−i)θ},  sin^j θ = (2i)^{-j} Σ_q C(j,q) (−1)^{j−q} e^{i(2q−j)θ}
    let scale = value / 2f64.powi((i + j) as i32);
    let i_pow = Complex64::new(0.0, -1.0).powi(j as i32); // (1/i)^j
    let d = (i + j) as i64;
    for p in 0..=i {
        for q in 0..=j {
            let sign = if (j - q) % 2 == 0 { 1.0 } else { -1.0 };
            let n = (2 * p as i64 - i as i64) + (2 * q as i64 - j as i64);
            let twice_k = d - n.abs();
            if twice_k % 2 != 0 {
                return Err(FourierError::Parity { exponent: d, n, sigma: 0 });
            }
            let k = twice_k / 2;
            if !out.in_range(n, k) {
                return Err(FourierError::OutsideCutoffs {
                    i,
                    j,
                    n,
                    k,
                    n_max: out.n_max,
                    k_max: out.k_max,
                });
            }
            let c = i_pow * (scale * sign * binomial(i, p) * binomial(j, q));
            out.add_to(slot, n, k as usize, c);
        }
    }
    Ok(())
}

fn scalar_to_ft(f: &PolyField, n_max: usize, k_max: usize) -> Result<FourierTaylorField, FourierError> {
    let mut out = FourierTaylorField::zeros(f.shape(), 0, n_max, k_max);
    for (s, i, j, v) in f.terms() {
        add_monomial(&mut out, s, i, j, v)?;
    }
    Ok(out)
}

/// Exact change of basis from a Cartesian polynomial to Fourier–Taylor form.
pub fn cartesian_to_ft(kind: CartesianKind<'_>, n_max: usize, k_max: usize) -> Result<Converted, FourierError> {
    match kind {
        CartesianKind::Scalar(f) => Ok(Converted::Single(scalar_to_ft(f, n_max, k_max)?)),
        CartesianKind::AreaDensity(f) => Ok(Converted::Single(scalar_to_ft(f, n_max, k_max)?.relabel(1))),
        CartesianKind::FormPair(fx, fy) => {
            if fx.shape() != fy.shape() {
                return Err(PolyError::ShapeMismatch("form pair components differ in shape".into()).into());
            }
            let mut radial = FourierTaylorField::zeros(fx.shape(), 0, n_max, k_max);
            let mut angular = FourierTaylorField::zeros(fx.shape(), 0, n_max, k_max);
            for (s, i, j, v) in fx.terms() {
                add_monomial(&mut radial, s, i + 1, j, v)?;
                add_monomial(&mut angular, s, i, j + 1, -v)?;
            }
            for (s, i, j, v) in fy.terms() {
                add_monomial(&mut radial, s, i, j + 1, v)?;
                add_monomial(&mut angular, s, i + 1, j, v)?;
            }
            Ok(Converted::Pair { radial: radial.relabel(-1), angular })
        }
    }
}

/// Product with contraction; `pairs` as in [`PolyField::mul`].
///
/// The result has offset `σ_a + σ_b`, and `c_{n1;k1} d_{n2;k2}` lands at
/// `n = n1 + n2`, `k = k1 + k2 + (|n1| + |n2| − |n|) / 2`. Terms outside
/// `(n_max, k_max)` are dropped.
pub fn ft_mul(
    a: &FourierTaylorField,
    b: &FourierTaylorField,
    pairs: &[(usize, usize)],
    n_max: usize,
    k_max: usize,
) -> Result<FourierTaylorField, FourierError> {
    let plan = crate::poly::ContractionPlan::new(&a.shape, &b.shape, pairs)?;
    let mut out = FourierTaylorField::zeros(&plan.out_shape, a.sigma + b.sigma, n_max, k_max);
    let na = a.n_max as i64;
    let nb = b.n_max as i64;
    let nm = n_max as i64;
    // Sparse views of each slot, to skip the many zero coefficients.
    let nonzero = |f: &FourierTaylorField, slot: usize, nn: i64| -> Vec<(i64, usize, Complex64)> {
        let mut v = Vec::new();
        for n in -nn..=nn {
            for k in 0..=f.k_max {
                let c = f.coeffs[f.index(slot, n, k)];
                if c.norm_sqr() != 0.0 {
                    v.push((n, k, c));
                }
            }
        }
        v
    };
    let a_nz: Vec<_> = (0..a.slot_count()).map(|s| nonzero(a, s, na)).collect();
    let b_nz: Vec<_> = (0..b.slot_count()).map(|s| nonzero(b, s, nb)).collect();
    for &(sa, sb, so) in &plan.triples {
        for &(n1, k1, c1) in &a_nz[sa] {
            if k1 > k_max {
                continue;
            }
            for &(n2, k2, c2) in &b_nz[sb] {
                let n = n1 + n2;
                if n.abs() > nm {
                    continue;
                }
                let lift = n1.abs() + n2.abs() - n.abs();
                let k = k1 + k2 + (lift / 2) as usize;
                if k > k_max {
                    continue;
                }
                let idx = out.index(so, n, k);
                out.coeffs[idx] += c1 * c2;
            }
        }
    }
    Ok(out)
}
