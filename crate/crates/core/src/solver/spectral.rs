use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::cg::{conjugate_gradient, CgConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, LinearOperator};
use crate::rng;

/// `½ pᵀHp − gᵀp`
pub fn quadratic_phi<Op: LinearOperator + ?Sized>(h: &Op, g: &[f64], p: &[f64]) -> f64 {
    0.5 * linalg::dot(p, &h.apply(p)) - linalg::dot(g, p)
}

/// Orthonormal basis of the column span of `m` (an `n × r` matrix, `r` the
/// numerical rank), by modified Gram-Schmidt with one reorthogonalization
/// pass. Columns whose residual falls below `1e-10` of their original norm
/// are treated as dependent and dropped.
pub fn orthonormal_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = m.shape();
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    for c in 0..d {
        let mut v: Vec<f64> = m.column(c).iter().copied().collect();
        let orig = linalg::norm(&v);
        if orig == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &basis {
                let proj = linalg::dot(q, &v);
                linalg::axpy(-proj, q, &mut v);
            }
        }
        let nrm = linalg::norm(&v);
        if nrm > 1e-10 * orig && nrm > 1e-14 * scale {
            linalg::scale(1.0 / nrm, &mut v);
            basis.push(v);
        }
    }
    DMatrix::from_fn(n, basis.len(), |i, k| basis[k][i])
}

/// Row coherence `(n/r) · max_i ‖u_i‖²` where `U` is an orthonormal basis of
/// the column span and `r` its rank (`r = d` for full-rank input).
pub fn coherence(m: &DMatrix<f64>) -> Result<f64> {
    let u = orthonormal_basis(m);
    let r = u.ncols();
    if r == 0 {
        return Err(Error::Domain("coherence of a zero matrix is undefined".into()));
    }
    let n = u.nrows();
    let max_row = u.row_iter().map(|row| row.norm_squared()).fold(0.0, f64::max);
    Ok(n as f64 / r as f64 * max_row)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub max: f64,
    pub min: f64,
    /// False when either iteration ran out of budget before settling.
    pub converged: bool,
}

impl SpectralEstimate {
    pub fn condition_number(&self) -> f64 {
        (self.max / self.min).max(1.0)
    }
}

/// Largest eigenvalue by power iteration and smallest by inverse iteration
/// (each inverse step is a CG solve), for a symmetric positive definite
/// operator. Returns the best estimate reached within `iters`, flagged when
/// not converged.
pub fn spectral_extremes<Op: LinearOperator + ?Sized>(h: &Op, iters: usize) -> SpectralEstimate {
    const REL_TOL: f64 = 1e-8;
    let d = h.dim();
    let mut r = rng::stream(0x5eed, &[d as u64]);
    let start: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();

    let (max, max_ok) = rayleigh_iteration(&start, iters, REL_TOL, |v| Some(h.apply(v)));
    let cg = CgConfig { tol: 1e-13, max_iters: Some(20 * d.max(1)) };
    let (inv, min_ok) = rayleigh_iteration(&start, iters, REL_TOL, |v| conjugate_gradient(h, v, &cg).ok().map(|o| o.x));
    let min = if inv > 0.0 { 1.0 / inv } else { max };
    SpectralEstimate { max, min: min.min(max), converged: max_ok && min_ok }
}

/// Power iteration on `apply`; returns the dominant Rayleigh quotient. Stops
/// once the eigen-residual `‖Av − θv‖` is below `tol · |θ|`.
fn rayleigh_iteration(start: &[f64], iters: usize, tol: f64, apply: impl Fn(&[f64]) -> Option<Vec<f64>>) -> (f64, bool) {
    let mut v = start.to_vec();
    linalg::scale(1.0 / linalg::norm(&v), &mut v);
    let mut theta = 0.0;
    for _ in 0..iters {
        let Some(av) = apply(&v) else { return (theta, false) };
        theta = linalg::dot(&v, &av);
        let mut resid = av.clone();
        linalg::axpy(-theta, &v, &mut resid);
        let nrm = linalg::norm(&av);
        if nrm == 0.0 {
            return (0.0, true);
        }
        if linalg::norm(&resid) <= tol * theta.abs() {
            return (theta, true);
        }
        v = av;
        linalg::scale(1.0 / nrm, &mut v);
    }
    (theta, false)
}
