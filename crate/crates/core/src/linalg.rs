//! Spectral radius and linear solves for dense matrices and matrix-free operators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative residual accepted by the solvers.
pub const SOLVE_TOL: f64 = 1e-10;

/// Relative deflation tolerance of the Schur decomposition.
const SCHUR_TOL: f64 = 1e-14;

/// Largest dimension for which dense eigenvalue and LU routines are used.
pub const DENSE_LIMIT: usize = 1600;

/// A square linear map `y = T x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            m.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        m
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let col = &self.as_slice()[j * n..(j + 1) * n];
            for (yi, &a) in y.iter_mut().zip(col) {
                *yi += a * xj;
            }
        }
    }
}

/// `I − T` for an operator `T`.
pub struct IdentityMinus<'a, T: LinearOperator + ?Sized>(pub &'a T);

impl<T: LinearOperator + ?Sized> LinearOperator for IdentityMinus<'_, T> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply(x, y);
        for (yi, &xi) in y.iter_mut().zip(x) {
            *yi = xi - *yi;
        }
    }
}

/// Spectral radius from the full complex spectrum.
///
/// Deflation uses a relative tolerance of `1e-14`; at machine epsilon the QR
/// sweeps can stall on clustered spectra. A failed decomposition is retried
/// on `m + cI` and shifted back, and power iteration is the last resort.
pub fn spectral_radius_dense(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let n = m.nrows();
    let cap = 50 * n;
    if let Some(schur) = m.clone().try_schur(SCHUR_TOL, cap) {
        return schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    let shift = 1.0 + m.amax();
    let shifted = m + DMatrix::identity(n, n) * shift;
    if let Some(schur) = shifted.try_schur(SCHUR_TOL, cap) {
        return schur
            .complex_eigenvalues()
            .iter()
            .map(|z| (z - shift).norm())
            .fold(0.0, f64::max);
    }
    log::debug!("Schur iteration did not converge for n = {n}, using power iteration");
    spectral_radius_power(m, 1e-12, 100_000)
}

/// Spectral radius estimated from the growth rate of `‖Tᵏ x‖`.
///
/// The estimate averages the log growth over the second half of the
/// iterates so that complex dominant pairs do not make it oscillate.
pub fn spectral_radius_power<T: LinearOperator + ?Sized>(op: &T, tol: f64, max_iter: usize) -> f64 {
    let n = op.dim();
    if n == 0 {
        return 0.0;
    }
    // deterministic start vector with components in every direction
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    normalize(&mut x);
    let mut y = vec![0.0; n];
    let mut logs: Vec<f64> = Vec::with_capacity(max_iter.min(10_000));
    let mut last = f64::NAN;
    for it in 0..max_iter {
        op.apply(&x, &mut y);
        let nrm = norm(&y);
        if nrm == 0.0 || !nrm.is_finite() {
            return if nrm == 0.0 { 0.0 } else { f64::INFINITY };
        }
        logs.push(nrm.ln());
        std::mem::swap(&mut x, &mut y);
        x.iter_mut().for_each(|v| *v /= nrm);
        if it >= 20 && it % 10 == 0 {
            let half = &logs[logs.len() / 2..];
            let est = (half.iter().sum::<f64>() / half.len() as f64).exp();
            if (est - last).abs() <= tol * est.max(1e-300) {
                return est;
            }
            last = est;
        }
    }
    let half = &logs[logs.len() / 2..];
    (half.iter().sum::<f64>() / half.len() as f64).exp()
}

/// Dense spectrum up to [`DENSE_LIMIT`], power iteration (tolerance `1e-10`,
/// `10⁴` iterations) above.
pub fn spectral_radius<T: LinearOperator + ?Sized>(op: &T) -> f64 {
    if op.dim() <= DENSE_LIMIT {
        spectral_radius_dense(&op.to_dense())
    } else {
        spectral_radius_power(op, 1e-10, 10_000)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn normalize(x: &mut [f64]) {
    let n = norm(x);
    x.iter_mut().for_each(|v| *v /= n);
}

fn check_residual<T: LinearOperator + ?Sized>(op: &T, x: &[f64], b: &[f64]) -> Result<()> {
    let mut r = vec![0.0; b.len()];
    op.apply(x, &mut r);
    let res = r.iter().zip(b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    let bn = norm(b);
    if !(res <= SOLVE_TOL * bn.max(f64::MIN_POSITIVE)) {
        return Err(Error::SolveFailed(format!("residual {res:.3e} exceeds {SOLVE_TOL:e}·‖rhs‖ = {:.3e}", SOLVE_TOL * bn)));
    }
    Ok(())
}

/// Dense LU solve with a residual check.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::DimensionMismatch("solve needs a square system".into()));
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::SolveFailed("singular matrix".into()))?;
    check_residual(a, x.as_slice(), b.as_slice())?;
    Ok(x)
}

/// Restarted GMRES with modified Gram–Schmidt and Givens rotations.
pub fn gmres<T: LinearOperator + ?Sized>(
    op: &T,
    b: &DVector<f64>,
    restart: usize,
    max_iter: usize,
) -> Result<DVector<f64>> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch("right-hand side has the wrong length".into()));
    }
    let bn = b.norm();
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok(DVector::zeros(n));
    }
    // iterate a little below the acceptance threshold
    let target = 0.1 * SOLVE_TOL * bn;
    let m = restart.max(1).min(n);
    let mut total = 0;
    let mut ax = vec![0.0; n];
    while total < max_iter {
        op.apply(&x, &mut ax);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        if beta <= target {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut w = vec![0.0; n];
            op.apply(&basis[k], &mut w);
            for (j, v) in basis.iter().enumerate() {
                let hjk: f64 = w.iter().zip(v).map(|(a, c)| a * c).sum();
                h[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= hjk * vi;
                }
            }
            let wn = norm(&w);
            h[k + 1][k] = wn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            cs[k] = if d == 0.0 { 1.0 } else { h[k][k] / d };
            sn[k] = if d == 0.0 { 0.0 } else { h[k + 1][k] / d };
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            if g[k + 1].abs() <= target || wn == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
    }
    check_residual(op, &x, b.as_slice())?;
    Ok(DVector::from_vec(x))
}

/// Solves `T x = b`, densely when small and by GMRES otherwise.
pub fn solve<T: LinearOperator + ?Sized>(op: &T, b: &DVector<f64>) -> Result<DVector<f64>> {
    if op.dim() <= DENSE_LIMIT {
        solve_dense(&op.to_dense(), b)
    } else {
        gmres(op, b, 80, 50_000)
    }
}
