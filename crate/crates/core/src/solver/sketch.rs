//! Monte-Carlo checks of the two sketching facts the analysis leans on:
//! uniformly sampled shards approximate the full gradient within
//! `(1 + √(2 ln(1/δ))) √(1/s) max‖b_i‖`, and their Hessians satisfy
//! `‖UᵀSSᵀU − I‖₂ ≤ η` once `s` is large relative to the coherence.

use nalgebra::DMatrix;
use rand::Rng as _;

use super::spectral::orthonormal_basis;
use crate::error::{Error, Result};
use crate::exec;
use crate::linalg;
use crate::objective::{scaled_matrices, LossKind, Scope};
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq)]
pub struct SketchCheck {
    /// Declared failure probability `δ`.
    pub declared: f64,
    pub samples: usize,
    pub failures: usize,
    /// The deviation threshold being tested.
    pub threshold: f64,
    /// Empirical `(1 − δ)`-quantile of the observed deviation.
    pub quantile: f64,
}

impl SketchCheck {
    pub fn rate(&self) -> f64 {
        self.failures as f64 / self.samples as f64
    }

    /// Monte-Carlo standard error of a Bernoulli(`δ`) rate.
    pub fn std_error(&self) -> f64 {
        (self.declared * (1.0 - self.declared) / self.samples as f64).sqrt()
    }

    /// Rate within `δ` plus three standard errors.
    pub fn passes(&self) -> bool {
        self.rate() <= self.declared + 3.0 * self.std_error()
    }
}

fn quantile(mut xs: Vec<f64>, q: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = ((xs.len() as f64 * q).ceil() as usize).clamp(1, xs.len());
    xs[k - 1]
}

/// Draws `trials · m` independent with-replacement sketches of size `s` and
/// counts those whose sketched gradient term strays past the bound.
#[allow(clippy::too_many_arguments)]
pub fn validate_gradient_sketch(
    scope: &Scope<'_>,
    w: &[f64],
    kind: LossKind,
    s: usize,
    m: usize,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<SketchCheck> {
    if !(delta > 0.0 && delta < 1.0) || s == 0 || m == 0 || trials == 0 {
        return Err(Error::Domain("gradient sketch check needs delta in (0,1) and s, m, trials >= 1".into()));
    }
    let b = scaled_matrices(scope, w, kind)?.b_cols;
    let n = b.len();
    let d = w.len();
    let mut full = vec![0.0; d];
    for col in &b {
        linalg::axpy(1.0 / n as f64, col, &mut full);
    }
    let max_b = b.iter().map(|c| linalg::norm(c)).fold(0.0, f64::max);
    let threshold = (1.0 + (2.0 * (1.0 / delta).ln()).sqrt()) * (1.0 / s as f64).sqrt() * max_b;

    let deviations: Vec<f64> = exec::map_indexed(trials * m, |k| {
        let mut r = rng::stream(seed, &[tag::SKETCH, k as u64]);
        let mut est = vec![0.0; d];
        for _ in 0..s {
            linalg::axpy(1.0 / s as f64, &b[r.random_range(0..n)], &mut est);
        }
        linalg::norm(&linalg::sub(&est, &full))
    });
    let failures = deviations.iter().filter(|&&x| x > threshold).count();
    Ok(SketchCheck { declared: delta, samples: deviations.len(), failures, threshold, quantile: quantile(deviations, 1.0 - delta) })
}

/// Per trial draws `m` sketches of `a`'s rows (size `s`, scaled by
/// `√(n/s)`); the trial fails if any of them has `‖UᵀSSᵀU − I‖₂ > η`.
#[allow(clippy::too_many_arguments)]
pub fn validate_hessian_sketch(
    a: &DMatrix<f64>,
    s: usize,
    m: usize,
    eta: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<SketchCheck> {
    if !(delta > 0.0 && delta < 1.0) || eta <= 0.0 || s == 0 || m == 0 || trials == 0 {
        return Err(Error::Domain("hessian sketch check needs eta > 0, delta in (0,1) and s, m, trials >= 1".into()));
    }
    let u = orthonormal_basis(a);
    let (n, r) = u.shape();
    if r == 0 {
        return Err(Error::Domain("matrix has rank 0".into()));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| u.row(i).iter().copied().collect()).collect();
    let scale = n as f64 / s as f64;

    let worst: Vec<f64> = exec::map_indexed(trials, |t| {
        let mut rg = rng::stream(seed, &[tag::SKETCH, t as u64]);
        (0..m)
            .map(|_| {
                let mut g = DMatrix::<f64>::zeros(r, r);
                for _ in 0..s {
                    let row = &rows[rg.random_range(0..n)];
                    for i in 0..r {
                        let ri = row[i] * scale;
                        for k in 0..=i {
                            g[(i, k)] += ri * row[k];
                        }
                    }
                }
                for i in 0..r {
                    for k in 0..i {
                        g[(k, i)] = g[(i, k)];
                    }
                    g[(i, i)] -= 1.0;
                }
                g.symmetric_eigen().eigenvalues.iter().fold(0.0f64, |acc, e| acc.max(e.abs()))
            })
            .fold(0.0, f64::max)
    });
    let failures = worst.iter().filter(|&&x| x > eta).count();
    Ok(SketchCheck { declared: delta, samples: trials, failures, threshold: eta, quantile: quantile(worst, 1.0 - delta) })
}
