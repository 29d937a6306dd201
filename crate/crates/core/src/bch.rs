//! Continuous Baker–Campbell–Hausdorff equation.
//!
//! For a colour path `φ(t)` the logarithm `Φ(t)` of the path-ordered
//! exponential solves
//!
//! ```text
//! dΦ/dt = ad_Φ / (e^{ad_Φ} − 1) φ(t) = Σ_j c_j ad_Φ^j φ(t),   Φ(0) = 0,
//! ```
//!
//! where `c_j` are the Taylor coefficients of `x/(eˣ − 1)` and
//! `(ad_Φ X)^a = C^a_{bc} Φ^b X^c`. Only the structure tensor enters, so the
//! Jacobi identity is never used. Later times act on the left.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{gauss_legendre, least_squares, logm, norm2, LinalgError};
use crate::poly::PolyField;
use crate::transport::{path_ordered_exp, MatrixPath, TransportError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BchError {
    #[error("structure tensor is not antisymmetric at C^{a}_({b},{c})")]
    NotAntisymmetric { a: usize, b: usize, c: usize },
    #[error("structure tensor must have N^3 entries")]
    Shape,
    #[error("path is invalid: {0}")]
    Path(String),
    #[error("adjoint map is not injective (sigma_min/sigma_max = {ratio:.3e})")]
    CenterNotTrivial { ratio: f64 },
    #[error("log of the adjoint holonomy has norm {norm:.4} >= pi")]
    LogBranch { norm: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Structure constants `C^a_{bc}` stored at `(a·N + b)·N + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureTensor {
    n: usize,
    c: Vec<f64>,
}

impl StructureTensor {
    pub fn new(n: usize, c: Vec<f64>) -> Result<Self, BchError> {
        if c.len() != n * n * n {
            return Err(BchError::Shape);
        }
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    if c[(a * n + b) * n + cc] != -c[(a * n + cc) * n + b] {
                        return Err(BchError::NotAntisymmetric { a, b, c: cc });
                    }
                }
            }
        }
        Ok(Self { n, c })
    }

    pub fn zero(n: usize) -> Self {
        Self { n, c: vec![0.0; n * n * n] }
    }

    fn from_brackets(n: usize, entries: &[(usize, usize, usize, f64)]) -> Self {
        let mut c = vec![0.0; n * n * n];
        for &(a, b, cc, v) in entries {
            c[(a * n + b) * n + cc] += v;
            c[(a * n + cc) * n + b] -= v;
        }
        Self { n, c }
    }

    /// `so(3)` with `C^a_{bc} = ε_{abc}`.
    pub fn so3() -> Self {
        Self::from_brackets(3, &[(2, 0, 1, 1.0), (0, 1, 2, 1.0), (1, 2, 0, 1.0)])
    }

    /// `sl(2)` in the basis `(H, E, F)`: `[H,E] = 2E`, `[H,F] = −2F`, `[E,F] = H`.
    pub fn sl2() -> Self {
        Self::from_brackets(3, &[(1, 0, 1, 2.0), (2, 0, 2, -2.0), (0, 1, 2, 1.0)])
    }

    /// `gl(m)` in the basis `E_ij` (index `i·m + j`), `C(u, v) = uv − vu`.
    pub fn gl(m: usize) -> Self {
        let n = m * m;
        let mut c = vec![0.0; n * n * n];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let (b, cc) = (i * m + j, k * m + l);
                        if j == k {
                            c[((i * m + l) * n + b) * n + cc] += 1.0;
                        }
                        if l == i {
                            c[((k * m + j) * n + b) * n + cc] -= 1.0;
                        }
                    }
                }
            }
        }
        Self { n, c }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.c[(a * self.n + b) * self.n + c]
    }

    pub fn entries(&self) -> &[f64] {
        &self.c
    }

    pub fn bracket(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|a| {
                let mut s = 0.0;
                for b in 0..n {
                    if u[b] == 0.0 {
                        continue;
                    }
                    for c in 0..n {
                        s += self.c[(a * n + b) * n + c] * u[b] * v[c];
                    }
                }
                s
            })
            .collect()
    }

    /// The matrix of `ad_Φ`.
    pub fn ad_matrix(&self, phi: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |a, c| (0..n).map(|b| self.c[(a * n + b) * n + c] * phi[b]).sum())
    }

    /// Largest entry of the Jacobiator `C(C(u,v),w) + cyclic` over basis triples.
    pub fn jacobi_defect(&self) -> f64 {
        let n = self.n;
        let e = |i: usize| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            v
        };
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (u, v, w) = (e(i), e(j), e(k));
                    let t1 = self.bracket(&self.bracket(&u, &v), &w);
                    let t2 = self.bracket(&self.bracket(&v, &w), &u);
                    let t3 = self.bracket(&self.bracket(&w, &u), &v);
                    for a in 0..n {
                        worst = worst.max((t1[a] + t2[a] + t3[a]).abs());
                    }
                }
            }
        }
        worst
    }

    /// The constant polynomial field with these entries.
    pub fn to_poly(&self, cap: usize) -> PolyField {
        PolyField::constant(&[self.n, self.n, self.n], cap, &self.c)
    }
}

/// `(ad_Φ X)^a = C^a_{bc} Φ^b X^c`.
pub fn ad_apply(c: &StructureTensor, phi: &[f64], x: &[f64]) -> Vec<f64> {
    c.bracket(phi, x)
}

/// Taylor coefficients `c_0 … c_M` of `x/(eˣ − 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliTable {
    pub coeffs: Vec<f64>,
}

pub fn bernoulli_coeffs(m: usize) -> BernoulliTable {
    let mut c: Vec<f64> = Vec::with_capacity(m + 1);
    for n in 0..=m {
        // Σ_{j≤n} c_j/(n+1−j)! = δ_{n0}
        let mut s = if n == 0 { 1.0 } else { 0.0 };
        let mut fact = 1.0;
        for j in (0..n).rev() {
            fact *= (n + 1 - j) as f64;
            s -= c[j] / fact;
        }
        c.push(s);
    }
    BernoulliTable { coeffs: c }
}

/// A colour path `t ↦ φ(t)` on `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub enum ColorPath {
    /// `φ(t) = Σ_k coeffs[k] t^k`.
    Polynomial { coeffs: Vec<Vec<f64>>, t_end: f64 },
    /// `values[i]` on `[breaks[i], breaks[i+1])`, with `breaks[0] = 0`.
    Piecewise { breaks: Vec<f64>, values: Vec<Vec<f64>> },
}

impl ColorPath {
    pub fn polynomial(coeffs: Vec<Vec<f64>>, t_end: f64) -> Result<Self, BchError> {
        if !(t_end > 0.0) {
            return Err(BchError::Path("T must be positive".into()));
        }
        if coeffs.is_empty() || coeffs.iter().any(|c| c.len() != coeffs[0].len()) {
            return Err(BchError::Path("coefficients must be nonempty vectors of equal size".into()));
        }
        Ok(Self::Polynomial { coeffs, t_end })
    }

    pub fn constant(v: Vec<f64>, t_end: f64) -> Result<Self, BchError> {
        Self::polynomial(vec![v], t_end)
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self, BchError> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(BchError::Path("need one more break than values".into()));
        }
        if breaks[0] != 0.0 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(BchError::Path("breaks must start at 0 and increase".into()));
        }
        if values.iter().any(|v| v.len() != values[0].len()) {
            return Err(BchError::Path("values must have equal size".into()));
        }
        Ok(Self::Piecewise { breaks, values })
    }

    /// Straight segments of equal duration `h`, one per value.
    pub fn segments(values: Vec<Vec<f64>>, h: f64) -> Result<Self, BchError> {
        let breaks = (0..=values.len()).map(|i| i as f64 * h).collect();
        Self::piecewise(breaks, values)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Polynomial { coeffs, .. } => coeffs[0].len(),
            Self::Piecewise { values, .. } => values[0].len(),
        }
    }

    pub fn t_end(&self) -> f64 {
        match self {
            Self::Polynomial { t_end, .. } => *t_end,
            Self::Piecewise { breaks, .. } => *breaks.last().unwrap(),
        }
    }

    /// Intervals on which the path is smooth.
    pub fn pieces(&self) -> Vec<(f64, f64)> {
        match self {
            Self::Polynomial { t_end, .. } => vec![(0.0, *t_end)],
            Self::Piecewise { breaks, .. } => breaks.windows(2).map(|w| (w[0], w[1])).collect(),
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        match self {
            Self::Polynomial { coeffs, .. } => {
                let mut out = vec![0.0; coeffs[0].len()];
                for c in coeffs.iter().rev() {
                    for (o, ci) in out.iter_mut().zip(c) {
                        *o = *o * t + ci;
                    }
                }
                out
            }
            Self::Piecewise { breaks, values } => {
                let i = breaks[1..breaks.len() - 1].iter().take_while(|b| t >= **b).count();
                values[i].clone()
            }
        }
    }

    /// Value on piece `i` at `t`, taking the one-sided limit at the piece ends.
    fn eval_on_piece(&self, i: usize, t: f64) -> Vec<f64> {
        match self {
            Self::Polynomial { .. } => self.eval(t),
            Self::Piecewise { values, .. } => values[i].clone(),
        }
    }

    /// `∫₀ᵗ φ`.
    pub fn integral(&self, t: f64) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        match self {
            Self::Polynomial { coeffs, .. } => {
                for (k, c) in coeffs.iter().enumerate() {
                    let w = t.powi(k as i32 + 1) / (k + 1) as f64;
                    for (o, ci) in out.iter_mut().zip(c) {
                        *o += w * ci;
                    }
                }
            }
            Self::Piecewise { breaks, values } => {
                for (i, v) in values.iter().enumerate() {
                    let len = (t.min(breaks[i + 1]) - breaks[i]).max(0.0);
                    for (o, vi) in out.iter_mut().zip(v) {
                        *o += len * vi;
                    }
                }
            }
        }
        out
    }

    /// `t ↦ −φ(T − t)`, whose holonomy is the inverse one.
    pub fn reversed(&self) -> Self {
        match self {
            Self::Polynomial { coeffs, t_end } => {
                let n = coeffs[0].len();
                let d = coeffs.len();
                let mut out = vec![vec![0.0; n]; d];
                // (T − t)^k = Σ_j binom(k, j) T^{k−j} (−t)^j
                for (k, c) in coeffs.iter().enumerate() {
                    let mut binom = 1.0;
                    for j in 0..=k {
                        let w = -binom * t_end.powi((k - j) as i32) * if j % 2 == 0 { 1.0 } else { -1.0 };
                        for (o, ci) in out[j].iter_mut().zip(c) {
                            *o += w * ci;
                        }
                        binom = binom * (k - j) as f64 / (j + 1) as f64;
                    }
                }
                Self::Polynomial { coeffs: out, t_end: *t_end }
            }
            Self::Piecewise { breaks, values } => {
                let t = *breaks.last().unwrap();
                let nb = breaks.iter().rev().map(|b| t - b).collect();
                let nv = values.iter().rev().map(|v| v.iter().map(|x| -x).collect()).collect();
                Self::Piecewise { breaks: nb, values: nv }
            }
        }
    }

    /// The path `t ↦ ad_{φ(t)}`.
    pub fn adjoint(&self, c: &StructureTensor) -> Result<MatrixPath, BchError> {
        Ok(match self {
            Self::Polynomial { coeffs, t_end } => {
                MatrixPath::polynomial(coeffs.iter().map(|v| c.ad_matrix(v)).collect(), 0.0, *t_end)?
            }
            Self::Piecewise { breaks, values } => {
                MatrixPath::piecewise(breaks.clone(), values.iter().map(|v| c.ad_matrix(v)).collect())?
            }
        })
    }
}

/// `Φ` on the integration grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CbchSolution {
    pub ts: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl CbchSolution {
    pub fn last(&self) -> &[f64] {
        self.values.last().unwrap()
    }
}

fn series_rhs(c: &StructureTensor, table: &BernoulliTable, phi: &[f64], x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    let mut acc: Vec<f64> = v.iter().map(|xi| table.coeffs[0] * xi).collect();
    for cj in &table.coeffs[1..] {
        v = c.bracket(phi, &v);
        if *cj != 0.0 {
            for (a, vi) in acc.iter_mut().zip(&v) {
                *a += cj * vi;
            }
        }
    }
    acc
}

fn axpy(x: &[f64], k: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + k * b).collect()
}

/// Splits `steps` over the smooth pieces in proportion to their length.
fn piece_steps(pieces: &[(f64, f64)], steps: usize) -> Vec<usize> {
    let total: f64 = pieces.iter().map(|(a, b)| b - a).sum();
    pieces.iter().map(|(a, b)| (((b - a) / total * steps as f64).round() as usize).max(1)).collect()
}

/// RK4 integration of the truncated series with `M = order`, `Φ(0) = 0`.
pub fn cbch_solve(path: &ColorPath, c: &StructureTensor, order: usize, steps: usize) -> Result<CbchSolution, BchError> {
    if steps == 0 {
        return Err(BchError::Path("steps must be positive".into()));
    }
    if path.dim() != c.n() {
        return Err(BchError::Path(format!("path has {} colours, tensor has {}", path.dim(), c.n())));
    }
    let table = bernoulli_coeffs(order);
    let pieces = path.pieces();
    let mut phi = vec![0.0; c.n()];
    let mut ts = vec![0.0];
    let mut values = vec![phi.clone()];
    for (i, (&(a, b), n)) in pieces.iter().zip(piece_steps(&pieces, steps)).enumerate() {
        let h = (b - a) / n as f64;
        for s in 0..n {
            let t = a + s as f64 * h;
            let f = |t: f64, p: &[f64]| series_rhs(c, &table, p, &path.eval_on_piece(i, t));
            let k1 = f(t, &phi);
            let k2 = f(t + h / 2.0, &axpy(&phi, h / 2.0, &k1));
            let k3 = f(t + h / 2.0, &axpy(&phi, h / 2.0, &k2));
            let k4 = f(t + h, &axpy(&phi, h, &k3));
            for a in 0..phi.len() {
                phi[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
            }
            ts.push(t + h);
            values.push(phi.clone());
        }
    }
    Ok(CbchSolution { ts, values })
}

/// The first two terms of the iterated solution,
/// `∫φ − ½∫₀ᵀ C(Ψ(t), φ(t)) dt` with `Ψ(t) = ∫₀ᵗ φ`.
pub fn cbch_second_order(path: &ColorPath, c: &StructureTensor) -> Vec<f64> {
    let t_end = path.t_end();
    let mut out = path.integral(t_end);
    let (nodes, weights) = gauss_legendre(24);
    for (i, (a, b)) in path.pieces().into_iter().enumerate() {
        let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
        for (x, w) in nodes.iter().zip(&weights) {
            let t = mid + half * x;
            let br = c.bracket(&path.integral(t), &path.eval_on_piece(i, t));
            out = axpy(&out, -0.5 * w * half, &br);
        }
    }
    out
}

/// `Φ` recovered from the adjoint holonomy.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub phi: Vec<f64>,
    /// Frobenius residual of `ad_Φ = log U`.
    pub residual: f64,
}

/// Smallest relative singular value of `Φ ↦ ad_Φ`.
pub fn adjoint_injectivity(c: &StructureTensor) -> f64 {
    let k = adjoint_linearization(c);
    let sv = k.singular_values();
    if sv.max() == 0.0 {
        0.0
    } else {
        sv.min() / sv.max()
    }
}

fn adjoint_linearization(c: &StructureTensor) -> DMatrix<f64> {
    let n = c.n();
    let mut k = DMatrix::zeros(n * n, n);
    for b in 0..n {
        let mut e = vec![0.0; n];
        e[b] = 1.0;
        let m = c.ad_matrix(&e);
        for (r, v) in m.iter().enumerate() {
            k[(r, b)] = *v;
        }
    }
    k
}

/// Solves `ad_Φ = log U` for `U` the path-ordered exponential of `ad_{φ(t)}`.
pub fn adjoint_log_oracle(path: &ColorPath, c: &StructureTensor, steps: usize) -> Result<OracleResult, BchError> {
    let ratio = adjoint_injectivity(c);
    if ratio <= 1e-10 {
        return Err(BchError::CenterNotTrivial { ratio });
    }
    let u = path_ordered_exp(&path.adjoint(c)?, steps);
    let l = logm(&u)?;
    let norm = norm2(&l);
    if norm >= std::f64::consts::PI {
        return Err(BchError::LogBranch { norm });
    }
    let k = adjoint_linearization(c);
    let rhs = DVector::from_iterator(l.len(), l.iter().copied());
    let ls = least_squares(&k, &rhs)?;
    Ok(OracleResult { phi: ls.x.iter().copied().collect(), residual: ls.residual })
}

/// The square loop of side `h` with constant splitting `(φ_x, φ_y)`,
/// traversed up, right, down, left.
pub fn square_loop(phi_x: &[f64], phi_y: &[f64], h: f64) -> Result<ColorPath, BchError> {
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
    ColorPath::segments(vec![phi_y.to_vec(), phi_x.to_vec(), neg(phi_y), neg(phi_x)], h)
}

/// `Φ` around the square loop and the area prediction `C(φ_x, φ_y) h²`.
pub fn loop_commutator_experiment(
    phi_x: &[f64],
    phi_y: &[f64],
    c: &StructureTensor,
    h: f64,
    order: usize,
    steps: usize,
) -> Result<(Vec<f64>, Vec<f64>), BchError> {
    let path = square_loop(phi_x, phi_y, h)?;
    let sol = cbch_solve(&path, c, order, steps)?;
    let leading = c.bracket(phi_x, phi_y).iter().map(|v| v * h * h).collect();
    Ok((sol.last().to_vec(), leading))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Lcg;
    use crate::transport::loglog_slope;
    use proptest::prelude::*;

    #[test]
    fn bernoulli_values() {
        let b = bernoulli_coeffs(8).coeffs;
        assert_eq!(b[0], 1.0);
        assert_eq!(b[1], -0.5);
        assert!((b[2] - 1.0 / 12.0).abs() < 1e-16);
        assert!(b[3].abs() < 1e-17);
        assert!((b[4] + 1.0 / 720.0).abs() < 1e-17);
        assert!((b[6] - 1.0 / 30240.0).abs() < 1e-18);
        assert!(b[5].abs() < 1e-17 && b[7].abs() < 1e-17);
    }

    #[test]
    fn structure_tensors() {
        let so3 = StructureTensor::so3();
        assert_eq!(ad_apply(&so3, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]), vec![0.0, 0.0, 1.0]);
        assert_eq!(so3.jacobi_defect(), 0.0);
        let sl2 = StructureTensor::sl2();
        assert_eq!(sl2.bracket(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]), vec![0.0, 2.0, 0.0]);
        assert_eq!(sl2.bracket(&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]), vec![1.0, 0.0, 0.0]);
        assert_eq!(sl2.jacobi_defect(), 0.0);
        let gl2 = StructureTensor::gl(2);
        assert_eq!(gl2.jacobi_defect(), 0.0);
        // [E_01, E_10] = E_00 − E_11
        assert_eq!(gl2.bracket(&[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]), vec![1.0, 0.0, 0.0, -1.0]);
        assert!(StructureTensor::new(2, vec![1.0; 8]).is_err());
        assert_eq!(ad_apply(&StructureTensor::zero(3), &[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), vec![0.0; 3]);
    }

    #[test]
    fn non_jacobi_tensor_is_recorded() {
        let mut c = StructureTensor::so3().c;
        // [e₀, e₁] = e₂ + e₀
        c[1] += 1.0;
        c[3] -= 1.0;
        let t = StructureTensor::new(3, c).unwrap();
        assert!(t.jacobi_defect() > 0.0);
        let path = ColorPath::polynomial(vec![vec![0.1, 0.2, 0.0], vec![0.0, 0.1, 0.3]], 1.0).unwrap();
        let sol = cbch_solve(&path, &t, 8, 100).unwrap();
        assert!(sol.last().iter().all(|v| v.is_finite()));
    }

    proptest! {
        #[test]
        fn ad_of_self_vanishes(v in prop::collection::vec(-2.0f64..2.0, 3)) {
            for c in [StructureTensor::so3(), StructureTensor::sl2()] {
                prop_assert!(ad_apply(&c, &v, &v).iter().all(|x| x.abs() < 1e-15));
            }
        }
    }

    #[test]
    fn abelian_solution_is_the_integral() {
        let path = ColorPath::polynomial(vec![vec![1.0, 0.0], vec![0.5, 2.0], vec![0.0, -3.0]], 1.5).unwrap();
        let sol = cbch_solve(&path, &StructureTensor::zero(2), 8, 1500).unwrap();
        for (t, v) in sol.ts.iter().zip(&sol.values) {
            assert!(max_abs_diff(v, &path.integral(*t)) < 1e-12);
        }
    }

    #[test]
    fn constant_path_is_linear() {
        let v = vec![0.3, -0.2, 0.7];
        let path = ColorPath::constant(v.clone(), 2.0).unwrap();
        let sol = cbch_solve(&path, &StructureTensor::so3(), 8, 50).unwrap();
        let want: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
        assert!(max_abs_diff(sol.last(), &want) < 1e-14);
        let o = adjoint_log_oracle(&path, &StructureTensor::so3(), 200).unwrap();
        assert!(max_abs_diff(&o.phi, &want) < 1e-10);
    }

    #[test]
    fn oracle_trivial_and_center() {
        let zero = ColorPath::constant(vec![0.0; 3], 1.0).unwrap();
        assert_eq!(adjoint_log_oracle(&zero, &StructureTensor::so3(), 10).unwrap().phi, vec![0.0; 3]);
        let gl = ColorPath::constant(vec![0.1; 4], 1.0).unwrap();
        assert!(matches!(adjoint_log_oracle(&gl, &StructureTensor::gl(2), 10), Err(BchError::CenterNotTrivial { .. })));
        let big = ColorPath::constant(vec![2.0, 0.0, 0.0], 1.0).unwrap();
        assert!(matches!(adjoint_log_oracle(&big, &StructureTensor::sl2(), 1000), Err(BchError::LogBranch { .. })));
    }

    #[test]
    fn two_segment_path_matches_group_product() {
        let (x, y) = (vec![0.4, -0.1, 0.2], vec![0.0, 0.3, -0.5]);
        let c = StructureTensor::so3();
        let path = ColorPath::segments(vec![x.clone(), y.clone()], 0.5).unwrap();
        let sol = cbch_solve(&path, &c, 8, 1000).unwrap();
        let lhs = crate::linalg::expm(&c.ad_matrix(sol.last()));
        let half = |v: &[f64]| crate::linalg::expm(&(c.ad_matrix(v) * 0.5));
        let rhs = half(&y) * half(&x);
        assert!((lhs - rhs).amax() < 1e-6);
    }

    fn random_path(rng: &mut Lcg) -> ColorPath {
        let t_end = rng.range(0.5, 1.5);
        let coeffs: Vec<Vec<f64>> = (0..3).map(|_| rng.vector(3, 1.0)).collect();
        let p = ColorPath::polynomial(coeffs.clone(), t_end).unwrap();
        let sup = (0..=200).map(|i| p.eval(t_end * i as f64 / 200.0).iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
        let s = 0.5 / (sup * t_end);
        ColorPath::polynomial(coeffs.iter().map(|c| c.iter().map(|v| v * s).collect()).collect(), t_end).unwrap()
    }

    #[test]
    fn series_matches_oracle() {
        let mut rng = Lcg::new(99);
        for c in [StructureTensor::so3(), StructureTensor::sl2()] {
            for _ in 0..3 {
                let path = random_path(&mut rng);
                let steps = (path.t_end() / 1e-3).ceil() as usize;
                let sol = cbch_solve(&path, &c, 8, steps).unwrap();
                let o = adjoint_log_oracle(&path, &c, steps).unwrap();
                assert!(o.residual <= 1e-8);
                assert!(max_abs_diff(sol.last(), &o.phi) < 1e-6);
            }
        }
    }

    #[test]
    fn reversed_path_inverts() {
        let mut rng = Lcg::new(5);
        let c = StructureTensor::so3();
        let path = random_path(&mut rng);
        let rev = path.reversed();
        for t in [0.0, 0.3, path.t_end()] {
            let want: Vec<f64> = path.eval(path.t_end() - t).iter().map(|v| -v).collect();
            assert!(max_abs_diff(&rev.eval(t), &want) < 1e-14);
        }
        let a = cbch_solve(&path, &c, 8, 1000).unwrap();
        let b = cbch_solve(&rev, &c, 8, 1000).unwrap();
        let prod = crate::linalg::expm(&c.ad_matrix(a.last())) * crate::linalg::expm(&c.ad_matrix(b.last()));
        assert!((prod - DMatrix::identity(3, 3)).amax() < 1e-6);
    }

    #[test]
    fn second_order_residual_is_cubic() {
        let c = StructureTensor::so3();
        let (x, y) = (vec![1.0, 0.5, -0.3], vec![-0.2, 1.0, 0.8]);
        let samples: Vec<(f64, f64)> = [0.02, 0.04, 0.08]
            .iter()
            .map(|&s| {
                let scale = |v: &[f64]| v.iter().map(|a| a * s).collect::<Vec<_>>();
                let path = ColorPath::segments(vec![scale(&x), scale(&y)], 0.5).unwrap();
                let sol = cbch_solve(&path, &c, 8, 1000).unwrap();
                (s, max_abs_diff(sol.last(), &cbch_second_order(&path, &c)))
            })
            .collect();
        assert!(loglog_slope(&samples) >= 2.7);
    }

    #[test]
    fn loop_follows_area_law() {
        let c = StructureTensor::so3();
        let (x, y) = (vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]);
        let samples: Vec<(f64, f64)> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| {
                let (phi, lead) = loop_commutator_experiment(&x, &y, &c, h, 8, 4000).unwrap();
                assert_eq!(lead, vec![0.0, 0.0, h * h]);
                (h, max_abs_diff(&phi, &lead))
            })
            .collect();
        assert!(loglog_slope(&samples) >= 2.7, "{samples:?}");

        let (phi, lead) = loop_commutator_experiment(&x, &y, &StructureTensor::zero(3), 0.1, 8, 400).unwrap();
        assert!(phi.iter().all(|v| v.abs() < 1e-15) && lead == vec![0.0; 3]);
        let (_, lead) = loop_commutator_experiment(&x, &[2.0, 0.0, 0.0], &c, 0.1, 8, 400).unwrap();
        assert_eq!(lead, vec![0.0; 3]);
    }
}
