//! Dense matrix helpers: exponential, square root and principal logarithm.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular")]
    Singular,
    #[error("square-root iteration did not converge")]
    SqrtNoConvergence,
    #[error("logarithm series did not converge")]
    LogNoConvergence,
}

pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().exp()
}

/// Largest singular value.
pub fn norm2(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

/// Principal square root by the Denman–Beavers iteration.
pub fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..100 {
        let y_inv = y.clone().try_inverse().ok_or(LinalgError::Singular)?;
        let z_inv = z.clone().try_inverse().ok_or(LinalgError::Singular)?;
        let y_next = (&y + z_inv) * 0.5;
        let z_next = (&z + y_inv) * 0.5;
        let change = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if change <= 1e-15 * y.norm().max(1.0) {
            return Ok(y);
        }
    }
    Err(LinalgError::SqrtNoConvergence)
}

/// Principal logarithm by inverse scaling and squaring.
///
/// Square roots are taken until `‖X − I‖_F ≤ 1/4`; the logarithm of the
/// remaining factor is summed from `log X = 2 Σ_{k odd} Z^k / k` with
/// `Z = (X − I)(X + I)⁻¹`.
pub fn logm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut x = a.clone();
    let mut halvings = 0;
    while (&x - &id).norm() > 0.25 {
        if halvings >= 60 {
            return Err(LinalgError::LogNoConvergence);
        }
        x = sqrtm(&x)?;
        halvings += 1;
    }
    let denom = (&x + &id).try_inverse().ok_or(LinalgError::Singular)?;
    let z = (&x - &id) * denom;
    let z2 = &z * &z;
    let mut term = z.clone();
    let mut sum = z.clone();
    let mut k = 1.0;
    loop {
        term = &term * &z2;
        k += 2.0;
        let piece = &term / k;
        sum += &piece;
        if piece.norm() <= 1e-18 * sum.norm().max(1e-300) || k > 401.0 {
            break;
        }
    }
    if k > 401.0 {
        return Err(LinalgError::LogNoConvergence);
    }
    Ok(sum * (2.0 * 2f64.powi(halvings)))
}

/// Least-squares solution of `a x = b` with the extreme singular values of `a`.
pub struct LeastSquares {
    pub x: DVector<f64>,
    pub residual: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LeastSquares, LinalgError> {
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    let x = svd.solve(b, sigma_max * 1e-14).map_err(|_| LinalgError::Singular)?;
    let residual = (a * &x - b).norm();
    Ok(LeastSquares { x, residual, sigma_min, sigma_max })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pn1) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}
