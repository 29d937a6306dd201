//! The extension problem on the unit disk and its obstruction.
//!
//! Given boundary values of `φ_θ` on the unit circle and a 2-form `ω`, the
//! solver looks for an ω-flat splitting on the disk in Fourier–Taylor form:
//!
//! ```text
//! φ_r = Σ R_{n;k} r^{|n|+2k−1} e^{inθ},   φ_θ = Σ Θ_{n;k} r^{|n|+2k} e^{inθ}.
//! ```
//!
//! In polar components the flatness equation reads
//! `∂_r φ_θ − ∂_θ φ_r + A_{rθ} + B_r φ_θ − B_θ φ_r + C(φ_r, φ_θ) = 0`,
//! whose `(n;k)` coefficient is
//!
//! ```text
//! E_{n;k} = (|n|+2k) Θ_{n;k} − i n R_{n;k} + A_{n;k−1}
//!         + [B_r ⊛ Θ]_{n;k} − [B_θ ⊛ R]_{n;k} + [C ⊛ R ⊛ Θ]_{n;k}.
//! ```
//!
//! The ansatz fixes `Θ_{n≠0;0}` to the boundary modes, sets `Θ_{n≠0;k>0}`
//! and `R_{0;k}` to zero, and solves level by level in `k` for the remaining
//! unknowns `R_{n≠0;k}` and `Θ_{0;k≥1}`. The boundary mean then fixes
//! `Θ_{0;0} = b_0 − Σ_{k≥1} Θ_{0;k}`; this coefficient multiplies `r^0` at
//! `n = 0`, which no smooth `φ_θ` can carry, and is the obstruction.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::algebra::TwoForm;
use crate::fourier::{cartesian_to_ft, ft_mul, CartesianKind, FourierError, FourierTaylorField};
use crate::linalg::gauss_legendre;
use crate::poly::PolyField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiskError {
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    #[error("smoothness flag violated: {0}")]
    SmoothnessFlag(String),
    #[error("level k = {k} is numerically singular")]
    SingularLevel { k: usize },
    #[error("Neumann sweeps at level k = {k} did not converge")]
    NeumannDiverged { k: usize },
    #[error("fixed point did not converge in {iterations} iterations (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },
    #[error("boundary data violate the reality condition by {0:e}")]
    NonReal(f64),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cutoffs {
    pub n_max: usize,
    pub k_max: usize,
}

/// The polar components of a 2-form: `A_{rθ}` (σ = +1), `B_r` (σ = −1),
/// `B_θ` (σ = 0) and `C` (σ = 0).
#[derive(Clone, Debug, PartialEq)]
pub struct DiskTwoFormFT {
    a_rtheta: FourierTaylorField,
    b_r: FourierTaylorField,
    b_theta: FourierTaylorField,
    c: FourierTaylorField,
}

impl DiskTwoFormFT {
    pub fn new(
        a_rtheta: FourierTaylorField,
        b_r: FourierTaylorField,
        b_theta: FourierTaylorField,
        c: FourierTaylorField,
    ) -> Result<Self, DiskError> {
        if a_rtheta.shape().len() != 1 {
            return Err(DiskError::Inconsistent("A_rθ must be a colour vector".into()));
        }
        let n = a_rtheta.shape()[0];
        let expect = [
            (&a_rtheta, vec![n], 1, "A_rθ"),
            (&b_r, vec![n, n], -1, "B_r"),
            (&b_theta, vec![n, n], 0, "B_θ"),
            (&c, vec![n, n, n], 0, "C"),
        ];
        for (f, shape, sigma, name) in &expect {
            if f.shape() != shape.as_slice() || f.sigma() != *sigma {
                return Err(DiskError::Inconsistent(format!("{name}: expected shape {shape:?} with offset {sigma}")));
            }
            if f.n_max() != a_rtheta.n_max() || f.k_max() != a_rtheta.k_max() {
                return Err(DiskError::Inconsistent(format!("{name}: cutoffs differ from A_rθ")));
            }
        }
        for (s, nn, k, v) in c.terms() {
            let (a, b, cc) = (s / (n * n), (s / n) % n, s % n);
            if c.get((a * n + cc) * n + b, nn, k as i64) != -v {
                return Err(DiskError::Inconsistent("C must be antisymmetric in its lower slots".into()));
            }
        }
        for (f, name) in [(&b_r, "B_r"), (&b_theta, "B_θ")] {
            for s in 0..f.slot_count() {
                if f.get(s, 0, 0) != ZERO {
                    return Err(DiskError::SmoothnessFlag(format!("{name} has a nonzero (0;0) coefficient")));
                }
            }
        }
        Ok(Self { a_rtheta, b_r, b_theta, c })
    }

    /// Exact conversion of a polynomial 2-form.
    pub fn from_cartesian(w: &TwoForm, cut: Cutoffs) -> Result<Self, DiskError> {
        let a = cartesian_to_ft(CartesianKind::AreaDensity(w.a()), cut.n_max, cut.k_max)?.single();
        let (b_r, b_theta) = cartesian_to_ft(CartesianKind::FormPair(w.b_x(), w.b_y()), cut.n_max, cut.k_max)?.pair();
        let c = cartesian_to_ft(CartesianKind::Scalar(w.c()), cut.n_max, cut.k_max)?.single();
        Self::new(a, b_r, b_theta, c)
    }

    pub fn n(&self) -> usize {
        self.a_rtheta.shape()[0]
    }

    pub fn cutoffs(&self) -> Cutoffs {
        Cutoffs { n_max: self.a_rtheta.n_max(), k_max: self.a_rtheta.k_max() }
    }

    pub fn a_rtheta(&self) -> &FourierTaylorField {
        &self.a_rtheta
    }

    pub fn b_r(&self) -> &FourierTaylorField {
        &self.b_r
    }

    pub fn b_theta(&self) -> &FourierTaylorField {
        &self.b_theta
    }

    pub fn c(&self) -> &FourierTaylorField {
        &self.c
    }
}

/// Fourier modes of the boundary values of `φ_θ` on the unit circle.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFourier {
    n_max: usize,
    colors: usize,
    modes: Vec<Vec<Complex64>>,
}

/// Tolerance of the reality condition on boundary modes.
pub const REALITY_TOLERANCE: f64 = 1e-12;

impl BoundaryFourier {
    /// `modes[n + n_max][a]` is the `n`-th mode of colour `a`.
    pub fn new(n_max: usize, modes: Vec<Vec<Complex64>>) -> Result<Self, DiskError> {
        if modes.len() != 2 * n_max + 1 {
            return Err(DiskError::Inconsistent(format!("expected {} modes", 2 * n_max + 1)));
        }
        let colors = modes[0].len();
        if modes.iter().any(|m| m.len() != colors) {
            return Err(DiskError::Inconsistent("every mode must carry all colours".into()));
        }
        let b = Self { n_max, colors, modes };
        let mut defect: f64 = 0.0;
        for n in -(n_max as i64)..=n_max as i64 {
            for a in 0..colors {
                defect = defect.max((b.get(-n, a) - b.get(n, a).conj()).norm());
            }
        }
        if defect > REALITY_TOLERANCE {
            return Err(DiskError::NonReal(defect));
        }
        Ok(b)
    }

    pub fn zero(colors: usize, n_max: usize) -> Self {
        Self { n_max, colors, modes: vec![vec![ZERO; colors]; 2 * n_max + 1] }
    }

    /// Samples a real periodic function at `4·n_max` points (at least 4) and
    /// keeps the modes `|n| <= n_max` of its discrete transform.
    pub fn from_samples(colors: usize, n_max: usize, f: impl Fn(f64) -> Vec<f64>) -> Self {
        let m = (4 * n_max).max(4);
        let samples: Vec<Vec<f64>> = (0..m).map(|j| f(2.0 * std::f64::consts::PI * j as f64 / m as f64)).collect();
        let mut modes = vec![vec![ZERO; colors]; 2 * n_max + 1];
        for n in 0..=n_max as i64 {
            for a in 0..colors {
                let mut acc = ZERO;
                for (j, s) in samples.iter().enumerate() {
                    let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                    acc += Complex64::from_polar(s[a], -(n as f64) * th);
                }
                acc /= m as f64;
                if n == 0 {
                    acc.im = 0.0;
                }
                modes[(n_max as i64 + n) as usize][a] = acc;
                modes[(n_max as i64 - n) as usize][a] = acc.conj();
            }
        }
        Self { n_max, colors, modes }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn colors(&self) -> usize {
        self.colors
    }

    pub fn get(&self, n: i64, a: usize) -> Complex64 {
        if n.unsigned_abs() as usize > self.n_max {
            ZERO
        } else {
            self.modes[(n + self.n_max as i64) as usize][a]
        }
    }

    pub fn set_pair(&mut self, n: i64, a: usize, v: Complex64) {
        let i = |n: i64| (n + self.n_max as i64) as usize;
        self.modes[i(n)][a] = v;
        self.modes[i(-n)][a] = v.conj();
        if n == 0 {
            self.modes[i(0)][a].im = 0.0;
        }
    }

    /// Real boundary values at angle `θ`.
    pub fn eval(&self, theta: f64) -> Vec<f64> {
        (0..self.colors)
            .map(|a| {
                (-(self.n_max as i64)..=self.n_max as i64)
                    .map(|n| (self.get(n, a) * Complex64::from_polar(1.0, n as f64 * theta)).re)
                    .sum()
            })
            .collect()
    }
}

/// How each level's linear system is solved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LevelSolver {
    /// Dense complex LU.
    Dense,
    /// Jacobi sweeps `x ← D⁻¹(−b − O x)`, the implicit Neumann series.
    Neumann { max_sweeps: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointOptions {
    pub fp_tol: f64,
    pub fp_max: usize,
    pub level_solver: LevelSolver,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { fp_tol: 1e-12, fp_max: 100, level_solver: LevelSolver::Dense }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionSolution {
    pub phi_r: FourierTaylorField,
    pub phi_theta: FourierTaylorField,
    /// `Θ_{0;0}`, one real entry per colour.
    pub obstruction: Vec<f64>,
    pub iterations: usize,
    /// Largest `|E_{n;k}|` over all retained coefficients.
    pub residual: f64,
}

impl ExtensionSolution {
    /// Max-abs norm of the obstruction.
    pub fn obstruction_norm(&self) -> f64 {
        self.obstruction.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Unknown {
    R { n: i64, b: usize },
    Theta { c: usize },
}

struct Solver<'a> {
    w: &'a DiskTwoFormFT,
    n: usize,
    cut: Cutoffs,
    level_solver: LevelSolver,
}

impl Solver<'_> {
    /// `E` truncated at level `k_cut`.
    fn residual(&self, r: &FourierTaylorField, th: &FourierTaylorField, k_cut: usize) -> FourierTaylorField {
        let nm = self.cut.n_max;
        let mut e = FourierTaylorField::zeros(&[self.n], -1, nm, k_cut);
        for a in 0..self.n {
            for n in -(nm as i64)..=nm as i64 {
                for k in 0..=k_cut as i64 {
                    let v = th.get(a, n, k) * (n.abs() + 2 * k) as f64 - Complex64::new(0.0, n as f64) * r.get(a, n, k)
                        + self.w.a_rtheta.get(a, n, k - 1);
                    e.set(a, n, k as usize, v);
                }
            }
        }
        let mul = |x: &FourierTaylorField, y: &FourierTaylorField, n_out: usize| {
            ft_mul(x, y, &[(1, 0)], n_out, k_cut).expect("shapes fixed by construction")
        };
        let parts = [
            (mul(&self.w.b_r, th, nm), 1.0),
            (mul(&self.w.b_theta, r, nm), -1.0),
            (mul(&mul(&self.w.c, r, 2 * nm), th, nm), 1.0),
        ];
        for (p, sign) in &parts {
            for (s, n, k, v) in p.terms() {
                e.add_to(s, n, k, v * *sign);
            }
        }
        e
    }

    fn unknowns(&self, k: usize) -> Vec<Unknown> {
        let nm = self.cut.n_max as i64;
        // Ordered like the rows, so that each unknown sits on its own equation's diagonal.
        let mut u = Vec::new();
        for n in -nm..=nm {
            if n != 0 {
                u.extend((0..self.n).map(|b| Unknown::R { n, b }));
            } else if k > 0 {
                u.extend((0..self.n).map(|c| Unknown::Theta { c }));
            }
        }
        u
    }

    fn row_index(&self, k: usize, n: i64, a: usize) -> Option<usize> {
        let nm = self.cut.n_max as i64;
        if n.abs() > nm || (k == 0 && n == 0) {
            return None;
        }
        let mut pos = (n + nm) as usize;
        if k == 0 && n > 0 {
            pos -= 1;
        }
        Some(pos * self.n + a)
    }

    /// Direct assembly of `∂E_{·;k} / ∂(level-k unknowns)`. Same-level
    /// couplings come only from level-0 partners whose harmonics add
    /// without cancellation (`|p| + |m| = |p + m|`).
    fn jacobian(&self, k: usize, cols: &[Unknown], r: &FourierTaylorField, th: &FourierTaylorField) -> DMatrix<Complex64> {
        let nn = self.n;
        let nm = self.cut.n_max as i64;
        let mut j = DMatrix::from_element(cols.len(), cols.len(), ZERO);
        let (bt, br, c) = (&self.w.b_theta, &self.w.b_r, &self.w.c);
        for (col, u) in cols.iter().enumerate() {
            match *u {
                Unknown::R { n: n0, b } => {
                    let row = self.row_index(k, n0, b).expect("own row exists");
                    j[(row, col)] += Complex64::new(0.0, -(n0 as f64));
                    for p in -nm..=nm {
                        let n = p + n0;
                        if p.abs() + n0.abs() != n.abs() {
                            continue;
                        }
                        if self.row_index(k, n, 0).is_some() {
                            for a in 0..nn {
                                let v = bt.get(a * nn + b, p, 0);
                                if v != ZERO {
                                    j[(self.row_index(k, n, a).unwrap(), col)] -= v;
                                }
                            }
                        }
                        for m in -nm..=nm {
                            let n = p + n0 + m;
                            if p.abs() + n0.abs() + m.abs() != n.abs() {
                                continue;
                            }
                            if self.row_index(k, n, 0).is_none() {
                                continue;
                            }
                            for a in 0..nn {
                                let mut acc = ZERO;
                                for cc in 0..nn {
                                    acc += c.get((a * nn + b) * nn + cc, p, 0) * th.get(cc, m, 0);
                                }
                                if acc != ZERO {
                                    j[(self.row_index(k, n, a).unwrap(), col)] += acc;
                                }
                            }
                        }
                    }
                }
                Unknown::Theta { c: cc } => {
                    let row = self.row_index(k, 0, cc).expect("own row exists");
                    j[(row, col)] += Complex64::new(2.0 * k as f64, 0.0);
                    for p in -nm..=nm {
                        for a in 0..nn {
                            let v = br.get(a * nn + cc, p, 0);
                            if v != ZERO {
                                j[(self.row_index(k, p, a).unwrap(), col)] += v;
                            }
                        }
                        for m in -nm..=nm {
                            let n = p + m;
                            if p.abs() + m.abs() != n.abs() || n.abs() > nm {
                                continue;
                            }
                            for a in 0..nn {
                                let mut acc = ZERO;
                                for b in 0..nn {
                                    acc += c.get((a * nn + b) * nn + cc, p, 0) * r.get(b, m, 0);
                                }
                                if acc != ZERO {
                                    j[(self.row_index(k, n, a).unwrap(), col)] += acc;
                                }
                            }
                        }
                    }
                }
            }
        }
        j
    }

    fn write_unknowns(k: usize, cols: &[Unknown], x: &[Complex64], r: &mut FourierTaylorField, th: &mut FourierTaylorField) {
        for (u, &v) in cols.iter().zip(x) {
            match *u {
                Unknown::R { n, b } => r.set(b, n, k, v),
                Unknown::Theta { c } => th.set(c, 0, k, v),
            }
        }
    }

    fn solve_level(&self, k: usize, r: &mut FourierTaylorField, th: &mut FourierTaylorField) -> Result<(), DiskError> {
        let cols = self.unknowns(k);
        Self::write_unknowns(k, &cols, &vec![ZERO; cols.len()], r, th);
        let e = self.residual(r, th, k);
        let mut rhs = DVector::from_element(cols.len(), ZERO);
        for n in -(self.cut.n_max as i64)..=self.cut.n_max as i64 {
            for a in 0..self.n {
                if let Some(row) = self.row_index(k, n, a) {
                    rhs[row] = -e.get(a, n, k as i64);
                }
            }
        }
        let jac = self.jacobian(k, &cols, r, th);
        let x = match self.level_solver {
            LevelSolver::Dense => {
                let lu = jac.clone().lu();
                let diag = lu.u().diagonal();
                let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.norm()), hi.max(d.norm())));
                if !(lo > 1e-13 * hi) {
                    return Err(DiskError::SingularLevel { k });
                }
                lu.solve(&rhs).ok_or(DiskError::SingularLevel { k })?
            }
            LevelSolver::Neumann { max_sweeps } => {
                let d: Vec<Complex64> = (0..cols.len()).map(|i| jac[(i, i)]).collect();
                if d.iter().any(|v| v.norm() == 0.0) {
                    return Err(DiskError::SingularLevel { k });
                }
                let mut off = jac.clone();
                off.fill_diagonal(ZERO);
                let mut x = DVector::from_element(cols.len(), ZERO);
                let mut done = false;
                for _ in 0..max_sweeps {
                    let next = DVector::from_iterator(
                        cols.len(),
                        (&rhs - &off * &x).iter().zip(&d).map(|(v, d)| v / d),
                    );
                    let change = (&next - &x).norm();
                    x = next;
                    if change <= 1e-15 * (1.0 + x.norm()) {
                        done = true;
                        break;
                    }
                }
                if !done {
                    return Err(DiskError::NeumannDiverged { k });
                }
                x
            }
        };
        Self::write_unknowns(k, &cols, x.as_slice(), r, th);
        Ok(())
    }

    fn sweep(&self, r: &mut FourierTaylorField, th: &mut FourierTaylorField) -> Result<(), DiskError> {
        for k in 0..=self.cut.k_max {
            self.solve_level(k, r, th)?;
        }
        Ok(())
    }
}

/// Solves the extension problem under the ansatz and returns the obstruction.
pub fn solve_extension(
    w: &DiskTwoFormFT,
    boundary: &BoundaryFourier,
    opts: &FixedPointOptions,
) -> Result<ExtensionSolution, DiskError> {
    let n = w.n();
    let cut = w.cutoffs();
    if boundary.colors() != n {
        return Err(DiskError::Inconsistent(format!("boundary has {} colours, ω has {n}", boundary.colors())));
    }
    if !(opts.fp_tol > 0.0) || opts.fp_max == 0 {
        return Err(DiskError::Inconsistent("fp_tol must be positive and fp_max at least 1".into()));
    }
    let solver = Solver { w, n, cut, level_solver: opts.level_solver };
    let mut r = FourierTaylorField::zeros(&[n], -1, cut.n_max, cut.k_max);
    let mut th = FourierTaylorField::zeros(&[n], 0, cut.n_max, cut.k_max);
    for nn in -(cut.n_max as i64)..=cut.n_max as i64 {
        if nn != 0 {
            for a in 0..n {
                th.set(a, nn, 0, boundary.get(nn, a));
            }
        }
    }
    let b0: Vec<Complex64> = (0..n).map(|a| boundary.get(0, a)).collect();
    for a in 0..n {
        th.set(a, 0, 0, b0[a]);
    }

    let feedback = w.b_r.max_abs() != 0.0 || w.c.max_abs() != 0.0;
    let mut iterations = 0;
    loop {
        solver.sweep(&mut r, &mut th)?;
        iterations += 1;
        let mut change: f64 = 0.0;
        for a in 0..n {
            let tail: Complex64 = (1..=cut.k_max as i64).map(|k| th.get(a, 0, k)).sum();
            let next = b0[a] - tail;
            change = change.max((next - th.get(a, 0, 0)).norm());
            th.set(a, 0, 0, next);
        }
        if !feedback {
            break;
        }
        if change <= opts.fp_tol {
            solver.sweep(&mut r, &mut th)?;
            break;
        }
        if iterations >= opts.fp_max {
            return Err(DiskError::NoConvergence { iterations, change });
        }
    }

    let e = solver.residual(&r, &th, cut.k_max);
    let zero_mode = (0..n).fold(0.0f64, |m, a| m.max(e.get(a, 0, 0).norm()));
    if zero_mode > 1e-12 {
        return Err(DiskError::SmoothnessFlag(format!("(0;0) equation does not vanish: {zero_mode:e}")));
    }
    let imag = (0..n).fold(0.0f64, |m, a| m.max(th.get(a, 0, 0).im.abs()));
    if imag > 1e-9 {
        return Err(DiskError::NonReal(imag));
    }
    Ok(ExtensionSolution {
        obstruction: (0..n).map(|a| th.get(a, 0, 0).re).collect(),
        residual: e.max_abs(),
        phi_r: r,
        phi_theta: th,
        iterations,
    })
}

/// Converts a polynomial 2-form under the given cutoffs.
pub fn disk_form_from_cartesian(w: &TwoForm, cut: Cutoffs) -> Result<DiskTwoFormFT, DiskError> {
    DiskTwoFormFT::from_cartesian(w, cut)
}

/// The obstruction of a polynomial 2-form with the given boundary data.
pub fn obstruction_cartesian(
    w: &TwoForm,
    boundary: &BoundaryFourier,
    cut: Cutoffs,
    opts: &FixedPointOptions,
) -> Result<Vec<f64>, DiskError> {
    let disk = DiskTwoFormFT::from_cartesian(w, cut)?;
    Ok(solve_extension(&disk, boundary, opts)?.obstruction)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessViolation {
    pub field: &'static str,
    pub n: i64,
    pub k: usize,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessReport {
    pub violations: Vec<SmoothnessViolation>,
    pub obstruction_norm: f64,
}

/// Coefficients that a smooth splitting cannot carry: `(φ_r)_{0;0}` and `(φ_θ)_{0;0}`.
pub fn smoothness_report(sol: &ExtensionSolution, tol: f64) -> SmoothnessReport {
    let mut violations = Vec::new();
    for (field, f) in [("phi_r", &sol.phi_r), ("phi_theta", &sol.phi_theta)] {
        let magnitude = (0..f.slot_count()).fold(0.0f64, |m, a| m.max(f.get(a, 0, 0).norm()));
        if magnitude > tol {
            violations.push(SmoothnessViolation { field, n: 0, k: 0, magnitude });
        }
    }
    SmoothnessReport { violations, obstruction_norm: sol.obstruction_norm() }
}

/// `(1/2π)(∮ φ_θ dθ + ∫_D A dx dy)` for a scalar 2-form, by Gauss–Legendre
/// in `r` and the trapezoidal rule in `θ`.
pub fn abelian_stokes_oracle(a: &PolyField, boundary: &BoundaryFourier, radial_nodes: usize, angular_nodes: usize) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let (xs, ws) = gauss_legendre(radial_nodes);
    let dth = two_pi / angular_nodes as f64;
    let mut area = 0.0;
    let mut circle = 0.0;
    for j in 0..angular_nodes {
        let th = j as f64 * dth;
        circle += boundary.eval(th)[0] * dth;
        for (x, w) in xs.iter().zip(&ws) {
            let r = 0.5 * (x + 1.0);
            area += 0.5 * w * dth * r * a.eval(r * th.cos(), r * th.sin())[0];
        }
    }
    (circle + area) / two_pi
}

/// `ad_Ω v = C(Ω, v)` for a structure tensor stored as `C[a][b][c]`.
fn ad(c: &[f64], n: usize, omega: &[f64], v: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|a| {
            let mut s = 0.0;
            for b in 0..n {
                for cc in 0..n {
                    s += c[(a * n + b) * n + cc] * omega[b] * v[cc];
                }
            }
            s
        })
        .collect()
}

/// `−Σ_k ad_Ω^k v / (k+1)!`: minus the right-trivialised derivative of `exp Ω`
/// in the direction `v`.
fn minus_dexp(c: &[f64], n: usize, omega: &[f64], v: &[f64]) -> Vec<f64> {
    let mut term = v.to_vec();
    let mut out: Vec<f64> = v.iter().map(|x| -x).collect();
    for k in 1..200 {
        term = ad(c, n, omega, &term).iter().map(|x| x / (k + 1) as f64).collect();
        let size = term.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (o, t) in out.iter_mut().zip(&term) {
            *o -= t;
        }
        if size < 1e-18 {
            break;
        }
    }
    out
}

/// The flat splitting `φ_μ = −(∂_μ G) G⁻¹` of `G = exp Ω(x, y)` at one point,
/// for `ω = (0, 0, C)`.
pub fn pure_gauge_splitting_at(c: &[f64], omega: &PolyField, x: f64, y: f64) -> (Vec<f64>, Vec<f64>) {
    let n = omega.shape()[0];
    let o = omega.eval(x, y);
    let ox = omega.diff(crate::poly::Axis::X).eval(x, y);
    let oy = omega.diff(crate::poly::Axis::Y).eval(x, y);
    (minus_dexp(c, n, &o, &ox), minus_dexp(c, n, &o, &oy))
}

/// Boundary modes of `φ_θ = −y φ_x + x φ_y` for the pure-gauge splitting.
pub fn pure_gauge_boundary(c: &[f64], omega: &PolyField, n_max: usize) -> BoundaryFourier {
    let n = omega.shape()[0];
    BoundaryFourier::from_samples(n, n_max, |th| {
        let (x, y) = (th.cos(), th.sin());
        let (px, py) = pure_gauge_splitting_at(c, omega, x, y);
        (0..n).map(|a| -y * px[a] + x * py[a]).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_form(a: PolyField) -> TwoForm {
        let cap = a.cap();
        TwoForm::new(a, PolyField::zeros(&[1, 1], cap), PolyField::zeros(&[1, 1], cap), PolyField::zeros(&[1, 1, 1], cap))
            .unwrap()
    }

    fn cut(n_max: usize, k_max: usize) -> Cutoffs {
        Cutoffs { n_max, k_max }
    }

    fn levi_civita() -> Vec<f64> {
        let mut c = vec![0.0; 27];
        for (a, b, cc) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            c[(a * 3 + b) * 3 + cc] = 1.0;
            c[(a * 3 + cc) * 3 + b] = -1.0;
        }
        c
    }

    #[test]
    fn zero_form_recovers_boundary_solution() {
        let mut b = BoundaryFourier::zero(1, 3);
        b.set_pair(1, 0, Complex64::new(0.3, -0.2));
        b.set_pair(3, 0, Complex64::new(-0.1, 0.05));
        let w = DiskTwoFormFT::from_cartesian(&TwoForm::zero(1, 2), cut(3, 3)).unwrap();
        let sol = solve_extension(&w, &b, &FixedPointOptions::default()).unwrap();
        assert_eq!(sol.obstruction, vec![0.0]);
        assert_eq!(sol.iterations, 1);
        assert!(sol.residual < 1e-15);
        for n in [-3i64, -1, 1, 3] {
            let expect = Complex64::new(0.0, -(n.abs() as f64) / n as f64) * b.get(n, 0);
            assert!((sol.phi_r.get(0, n, 0) - expect).norm() < 1e-15);
        }
        assert!(smoothness_report(&sol, 1e-12).violations.is_empty());
    }

    #[test]
    fn constant_area_density_gives_one_half() {
        let w = DiskTwoFormFT::from_cartesian(&scalar_form(PolyField::constant(&[1], 0, &[1.0])), cut(2, 3)).unwrap();
        let sol = solve_extension(&w, &BoundaryFourier::zero(1, 2), &FixedPointOptions::default()).unwrap();
        assert!((sol.obstruction[0] - 0.5).abs() < 1e-15);
        let rep = smoothness_report(&sol, 1e-12);
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].field, "phi_theta");
        assert!((rep.violations[0].magnitude - 0.5).abs() < 1e-15);
    }

    #[test]
    fn boundary_mean_passes_through() {
        let mut b = BoundaryFourier::zero(1, 2);
        b.set_pair(0, 0, Complex64::new(0.75, 0.0));
        let w = DiskTwoFormFT::from_cartesian(&TwoForm::zero(1, 1), cut(2, 2)).unwrap();
        let sol = solve_extension(&w, &b, &FixedPointOptions::default()).unwrap();
        assert_eq!(sol.obstruction, vec![0.75]);
        assert_eq!(smoothness_report(&sol, 1e-12).violations[0].magnitude, 0.75);
    }

    #[test]
    fn moments_of_the_disk() {
        let opts = FixedPointOptions::default();
        let zero = BoundaryFourier::zero(1, 2);
        let mut x = PolyField::zeros(&[1], 2);
        x.set(0, 1, 0, 1.0);
        assert!(obstruction_cartesian(&scalar_form(x), &zero, cut(2, 3), &opts).unwrap()[0].abs() < 1e-15);
        let mut r2 = PolyField::zeros(&[1], 2);
        r2.set(0, 2, 0, 1.0);
        r2.set(0, 0, 2, 1.0);
        let v = obstruction_cartesian(&scalar_form(r2), &zero, cut(2, 3), &opts).unwrap()[0];
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn nonabelian_solution_is_self_consistent() {
        let mut w = TwoForm::pure_structure(3, 3, &levi_civita()).unwrap();
        let mut a = PolyField::zeros(&[3], 3);
        a.set(0, 1, 0, 0.2);
        a.set(2, 0, 2, -0.1);
        let mut bx = PolyField::zeros(&[3, 3], 3);
        bx.set(1, 0, 1, 0.15);
        bx.set(5, 1, 0, -0.1);
        w = TwoForm::new(a, bx.clone(), bx.transpose(), w.c().clone()).unwrap();
        let mut b = BoundaryFourier::zero(3, 4);
        b.set_pair(1, 0, Complex64::new(0.1, 0.05));
        b.set_pair(2, 1, Complex64::new(-0.08, 0.02));
        b.set_pair(0, 2, Complex64::new(0.03, 0.0));
        let disk = DiskTwoFormFT::from_cartesian(&w, cut(4, 6)).unwrap();
        let dense = solve_extension(&disk, &b, &FixedPointOptions::default()).unwrap();
        assert!(dense.residual < 1e-12, "residual {}", dense.residual);
        assert!(dense.iterations > 1);

        let neumann = FixedPointOptions { level_solver: LevelSolver::Neumann { max_sweeps: 500 }, ..Default::default() };
        let jac = solve_extension(&disk, &b, &neumann).unwrap();
        for (p, q) in dense.obstruction.iter().zip(&jac.obstruction) {
            assert!((p - q).abs() < 1e-11);
        }
    }

    #[test]
    fn pure_gauge_splitting_is_flat() {
        let c = levi_civita();
        let mut om = PolyField::zeros(&[3], 3);
        om.set(0, 1, 0, 0.3);
        om.set(1, 0, 1, -0.2);
        om.set(2, 1, 1, 0.25);
        om.set(0, 0, 2, 0.1);
        let (x, y, h) = (0.3, -0.2, 1e-4);
        let (px0, py0) = pure_gauge_splitting_at(&c, &om, x, y);
        let dpy_dx: Vec<f64> = {
            let (_, p) = pure_gauge_splitting_at(&c, &om, x + h, y);
            let (_, m) = pure_gauge_splitting_at(&c, &om, x - h, y);
            p.iter().zip(&m).map(|(p, m)| (p - m) / (2.0 * h)).collect()
        };
        let dpx_dy: Vec<f64> = {
            let (p, _) = pure_gauge_splitting_at(&c, &om, x, y + h);
            let (m, _) = pure_gauge_splitting_at(&c, &om, x, y - h);
            p.iter().zip(&m).map(|(p, m)| (p - m) / (2.0 * h)).collect()
        };
        let cross = ad(&c, 3, &px0, &py0);
        for a in 0..3 {
            assert!((dpy_dx[a] - dpx_dy[a] + cross[a]).abs() < 1e-7);
        }
    }

    #[test]
    fn stokes_oracle_matches_closed_form() {
        let mut r2 = PolyField::zeros(&[1], 2);
        r2.set(0, 2, 0, 1.0);
        r2.set(0, 0, 2, 1.0);
        let mut b = BoundaryFourier::zero(1, 2);
        b.set_pair(0, 0, Complex64::new(0.5, 0.0));
        b.set_pair(2, 0, Complex64::new(0.1, 0.3));
        assert!((abelian_stokes_oracle(&r2, &b, 12, 32) - 0.75).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonreal_boundary() {
        let mut modes = vec![vec![ZERO]; 3];
        modes[2][0] = Complex64::new(1.0, 0.0);
        assert!(matches!(BoundaryFourier::new(1, modes), Err(DiskError::NonReal(_))));
    }
}
