//! Regularized empirical risk `(1/|S|) Σ_{j∈S} ℓ_j(wᵀx_j) + (λ/2)‖w‖²` over an
//! index set `S`, with its gradient and Hessian.

use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{self, LinearOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `ln(1 + exp(-y z))`
    Logistic,
    /// `½ (z - y)²`
    Squared,
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(Self::Logistic),
            "squared" => Ok(Self::Squared),
            _ => Err(Error::Config(format!("unknown loss {s:?}"))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Logistic => "logistic",
            Self::Squared => "squared",
        })
    }
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(t))` without overflow.
#[inline]
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

impl LossKind {
    #[inline]
    pub fn value(self, z: f64, y: f64) -> f64 {
        match self {
            Self::Logistic => softplus(-y * z),
            Self::Squared => 0.5 * (z - y) * (z - y),
        }
    }

    #[inline]
    pub fn first(self, z: f64, y: f64) -> f64 {
        match self {
            Self::Logistic => -y * sigmoid(-y * z),
            Self::Squared => z - y,
        }
    }

    #[inline]
    pub fn second(self, z: f64, y: f64) -> f64 {
        match self {
            Self::Logistic => {
                let p = sigmoid(y * z);
                p * (1.0 - p)
            }
            Self::Squared => 1.0,
        }
    }
}

/// A set of samples to evaluate the objective over, optionally with labels
/// that replace the dataset's (used by label attacks).
#[derive(Debug, Clone, Copy)]
pub struct Scope<'a> {
    data: &'a Dataset,
    indices: Option<&'a [usize]>,
    labels: Option<&'a [f64]>,
}

impl<'a> Scope<'a> {
    pub fn full(data: &'a Dataset) -> Self {
        Self { data, indices: None, labels: None }
    }

    pub fn subset(data: &'a Dataset, indices: &'a [usize]) -> Self {
        Self { data, indices: Some(indices), labels: None }
    }

    /// `labels[k]` is used for the `k`-th sample of the scope.
    pub fn with_labels(mut self, labels: &'a [f64]) -> Self {
        debug_assert_eq!(labels.len(), self.len());
        self.labels = Some(labels);
        self
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.data
    }

    pub fn len(&self) -> usize {
        self.indices.map_or(self.data.n(), <[usize]>::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(row index, label)` pairs in scope order.
    pub fn samples(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len()).map(move |k| {
            let j = self.indices.map_or(k, |ix| ix[k]);
            let y = self.labels.map_or_else(|| self.data.labels()[j], |l| l[k]);
            (j, y)
        })
    }

    fn check(&self, w: &[f64]) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Domain("empty scope".into()));
        }
        if w.len() != self.data.d() {
            return Err(Error::Dimension(format!("w has length {}, expected {}", w.len(), self.data.d())));
        }
        Ok(())
    }
}

pub fn loss_value(scope: &Scope<'_>, w: &[f64], lambda: f64, kind: LossKind) -> Result<f64> {
    scope.check(w)?;
    let data = scope.dataset();
    let sum: f64 = scope.samples().map(|(j, y)| kind.value(data.row_dot(j, w), y)).sum();
    Ok(sum / scope.len() as f64 + 0.5 * lambda * linalg::dot(w, w))
}

pub fn gradient(scope: &Scope<'_>, w: &[f64], lambda: f64, kind: LossKind) -> Result<Vec<f64>> {
    scope.check(w)?;
    let data = scope.dataset();
    let mut g = vec![0.0; w.len()];
    for (j, y) in scope.samples() {
        data.row_axpy(j, kind.first(data.row_dot(j, w), y), &mut g);
    }
    let inv = 1.0 / scope.len() as f64;
    for (gi, wi) in g.iter_mut().zip(w) {
        *gi = *gi * inv + lambda * wi;
    }
    Ok(g)
}

/// Dense Hessian. `O(|S| d²)`; use [`HessianOperator`] on the hot path.
pub fn hessian(scope: &Scope<'_>, w: &[f64], lambda: f64, kind: LossKind) -> Result<DMatrix<f64>> {
    scope.check(w)?;
    let data = scope.dataset();
    let d = w.len();
    let mut h = DMatrix::<f64>::zeros(d, d);
    for (j, y) in scope.samples() {
        let c = kind.second(data.row_dot(j, w), y);
        let x = nalgebra::DVector::from_vec(data.row_dense(j));
        h.ger(c, &x, &x, 1.0);
    }
    h /= scope.len() as f64;
    for i in 0..d {
        h[(i, i)] += lambda;
    }
    Ok(h)
}

pub fn hessian_matvec(scope: &Scope<'_>, w: &[f64], lambda: f64, kind: LossKind, v: &[f64]) -> Result<Vec<f64>> {
    Ok(HessianOperator::new(*scope, w, lambda, kind)?.apply(v))
}

/// Matrix-free Hessian at a fixed `w`: the curvatures `ℓ''_j(wᵀx_j)` are
/// computed once, each application is `O(nnz(S))`.
#[derive(Debug, Clone)]
pub struct HessianOperator<'a> {
    scope: Scope<'a>,
    curvature: Vec<f64>,
    lambda: f64,
}

impl<'a> HessianOperator<'a> {
    pub fn new(scope: Scope<'a>, w: &[f64], lambda: f64, kind: LossKind) -> Result<Self> {
        scope.check(w)?;
        let data = scope.dataset();
        let curvature = scope.samples().map(|(j, y)| kind.second(data.row_dot(j, w), y)).collect();
        Ok(Self { scope, curvature, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl LinearOperator for HessianOperator<'_> {
    fn dim(&self) -> usize {
        self.scope.dataset().d()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let data = self.scope.dataset();
        let mut out = vec![0.0; v.len()];
        for ((j, _), &c) in self.scope.samples().zip(&self.curvature) {
            if c != 0.0 {
                data.row_axpy(j, c * data.row_dot(j, v), &mut out);
            }
        }
        let inv = 1.0 / self.scope.len() as f64;
        for (o, vi) in out.iter_mut().zip(v) {
            *o = *o * inv + self.lambda * vi;
        }
        out
    }
}

/// `A` rows `a_j = sqrt(ℓ''_j) x_j` and `B` columns `b_j = ℓ'_j x_j`, both
/// stored one sample per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMatrices {
    pub a_rows: Vec<Vec<f64>>,
    pub b_cols: Vec<Vec<f64>>,
}

impl ScaledMatrices {
    /// `A` as an `|S| × d` matrix.
    pub fn a_matrix(&self) -> DMatrix<f64> {
        let d = self.a_rows.first().map_or(0, Vec::len);
        DMatrix::from_fn(self.a_rows.len(), d, |i, k| self.a_rows[i][k])
    }

    pub fn max_b_norm(&self) -> f64 {
        self.b_cols.iter().map(|b| linalg::norm(b)).fold(0.0, f64::max)
    }
}

pub fn scaled_matrices(scope: &Scope<'_>, w: &[f64], kind: LossKind) -> Result<ScaledMatrices> {
    scope.check(w)?;
    let data = scope.dataset();
    let mut a_rows = Vec::with_capacity(scope.len());
    let mut b_cols = Vec::with_capacity(scope.len());
    for (j, y) in scope.samples() {
        let z = data.row_dot(j, w);
        let x = data.row_dense(j);
        let sa = kind.second(z, y).max(0.0).sqrt();
        let sb = kind.first(z, y);
        a_rows.push(x.iter().map(|v| sa * v).collect());
        b_cols.push(x.iter().map(|v| sb * v).collect());
    }
    Ok(ScaledMatrices { a_rows, b_cols })
}

/// Fraction of samples with `sign(xᵀw) = y`; `xᵀw = 0` counts as wrong.
pub fn accuracy(scope: &Scope<'_>, w: &[f64]) -> f64 {
    let data = scope.dataset();
    let correct = scope
        .samples()
        .filter(|&(j, y)| {
            let z = data.row_dot(j, w);
            z != 0.0 && (z > 0.0) == (y > 0.0)
        })
        .count();
    correct as f64 / scope.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use std::f64::consts::LN_2;

    fn ds(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Dataset {
        Dataset::from_dense(rows, labels).unwrap()
    }

    #[test]
    fn logistic_at_zero_is_ln2() {
        let data = ds(vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![3.0, 3.0]], vec![1.0, -1.0, 1.0]);
        let v = loss_value(&Scope::full(&data), &[0.0, 0.0], 0.0, LossKind::Logistic).unwrap();
        assert!((v - LN_2).abs() < 1e-15);
    }

    #[test]
    fn squared_values() {
        let data = ds(vec![vec![1.0]], vec![1.0]);
        let s = Scope::full(&data);
        assert_eq!(loss_value(&s, &[1.0], 0.0, LossKind::Squared).unwrap(), 0.0);
        assert_eq!(loss_value(&s, &[3.0], 2.0, LossKind::Squared).unwrap(), 11.0);
    }

    #[test]
    fn gradient_examples() {
        let data = ds(vec![vec![1.0, 0.0]], vec![1.0]);
        let g = gradient(&Scope::full(&data), &[0.0, 0.0], 0.0, LossKind::Logistic).unwrap();
        assert_eq!(g, vec![-0.5, 0.0]);
        // y = 0 is not a valid stored label; override it through the scope
        let data = ds(vec![vec![1.0]], vec![1.0]);
        let zero = [0.0];
        let g = gradient(&Scope::full(&data).with_labels(&zero), &[2.0], 0.0, LossKind::Squared).unwrap();
        assert_eq!(g, vec![2.0]);
    }

    #[test]
    fn hessian_examples() {
        let data = ds(vec![vec![1.0, 0.0]], vec![1.0]);
        let h = hessian(&Scope::full(&data), &[0.0, 0.0], 0.1, LossKind::Logistic).unwrap();
        assert!((h[(0, 0)] - 0.35).abs() < 1e-15);
        assert_eq!(h[(1, 1)], 0.1);
        assert_eq!(h[(0, 1)], 0.0);

        let data = ds(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, -1.0]);
        let h = hessian(&Scope::full(&data), &[0.3, -0.2], 0.0, LossKind::Squared).unwrap();
        assert_eq!(h, DMatrix::identity(2, 2) * 0.5);
    }

    #[test]
    fn empty_scope_is_an_error() {
        let data = ds(vec![vec![1.0]], vec![1.0]);
        let empty: [usize; 0] = [];
        let s = Scope::subset(&data, &empty);
        assert!(matches!(loss_value(&s, &[0.0], 0.0, LossKind::Squared), Err(Error::Domain(_))));
        assert!(gradient(&s, &[0.0], 0.0, LossKind::Squared).is_err());
        assert!(hessian(&s, &[0.0], 0.0, LossKind::Squared).is_err());
    }

    #[test]
    fn scaled_rows_match_definitions() {
        let data = ds(vec![vec![1.0, -2.0], vec![0.5, 4.0]], vec![1.0, -1.0]);
        let s = Scope::full(&data);
        let sq = scaled_matrices(&s, &[0.7, 0.1], LossKind::Squared).unwrap();
        assert_eq!(sq.a_rows, vec![vec![1.0, -2.0], vec![0.5, 4.0]]);
        let lg = scaled_matrices(&s, &[0.0, 0.0], LossKind::Logistic).unwrap();
        assert_eq!(lg.a_rows, vec![vec![0.5, -1.0], vec![0.25, 2.0]]);
    }

    #[test]
    fn scaled_matrices_reconstruct_hessian_and_gradient() {
        let (data, _) = generate_synthetic(&SyntheticSpec { noise_std: 0.5, ..SyntheticSpec::new(40, 4, 9) }).unwrap();
        let idx: Vec<usize> = (5..30).collect();
        let s = Scope::subset(&data, &idx);
        let w = [0.3, -0.4, 0.1, 0.9];
        let lambda = 0.05;
        for kind in [LossKind::Logistic, LossKind::Squared] {
            let m = scaled_matrices(&s, &w, kind).unwrap();
            let a = m.a_matrix();
            let mut h = a.transpose() * &a / s.len() as f64;
            for i in 0..4 {
                h[(i, i)] += lambda;
            }
            let want = hessian(&s, &w, lambda, kind).unwrap();
            assert!((h - &want).abs().max() < 1e-12);

            let mut g: Vec<f64> = vec![0.0; 4];
            for b in &m.b_cols {
                linalg::axpy(1.0 / s.len() as f64, b, &mut g);
            }
            linalg::axpy(lambda, &w, &mut g);
            let want = gradient(&s, &w, lambda, kind).unwrap();
            assert!(g.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn accuracy_counts_ties_as_wrong() {
        let data = ds(vec![vec![1.0], vec![-1.0], vec![0.0]], vec![1.0, 1.0, 1.0]);
        let a = accuracy(&Scope::full(&data), &[1.0]);
        assert!((a - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn logistic_is_stable_for_large_margins() {
        let k = LossKind::Logistic;
        assert!(k.value(1e4, 1.0) >= 0.0 && k.value(1e4, 1.0) < 1e-300);
        assert!((k.value(-1e4, 1.0) - 1e4).abs() < 1e-9);
        assert!(k.second(800.0, 1.0).is_finite());
    }
}
