use crate::error::{Error, Result};
use crate::linalg::{self, LinearOperator};
use crate::objective::{self, HessianOperator, LossKind, Scope};

/// Stopping rule for conjugate gradient: `‖Hx − b‖ ≤ tol · ‖b‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgConfig {
    pub tol: f64,
    /// `None` means `10 · d`.
    pub max_iters: Option<usize>,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: None }
    }
}

impl CgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("cg tol must be in (0, 1), got {}", self.tol)));
        }
        if self.max_iters == Some(0) {
            return Err(Error::Config("cg max iterations must be >= 1".into()));
        }
        Ok(())
    }

    pub fn iteration_budget(&self, d: usize) -> usize {
        self.max_iters.unwrap_or(10 * d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iters: usize,
    pub relative_residual: f64,
}

/// Solves `op · x = b` for symmetric positive (semi)definite `op`, starting
/// from zero so iterates stay in the Krylov space of `b`.
pub fn conjugate_gradient<Op: LinearOperator + ?Sized>(op: &Op, b: &[f64], cfg: &CgConfig) -> Result<CgOutcome> {
    let d = op.dim();
    let b_norm = linalg::norm(b);
    let mut x = vec![0.0; d];
    if b_norm == 0.0 {
        return Ok(CgOutcome { x, iters: 0, relative_residual: 0.0 });
    }
    let target = cfg.tol * b_norm;
    let budget = cfg.iteration_budget(d);

    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = linalg::dot(&r, &r);
    let mut iters = 0;
    loop {
        if rr.sqrt() <= target || iters == budget {
            // the recursive residual drifts; confirm against the true one
            r = linalg::sub(b, &op.apply(&x));
            rr = linalg::dot(&r, &r);
            if rr.sqrt() <= target || iters == budget {
                break;
            }
            p.clone_from(&r);
        }
        let hp = op.apply(&p);
        let php = linalg::dot(&p, &hp);
        if !(php > 0.0) {
            // zero curvature along p: singular system, b not in range
            break;
        }
        let step = rr / php;
        linalg::axpy(step, &p, &mut x);
        linalg::axpy(-step, &hp, &mut r);
        let rr_next = linalg::dot(&r, &r);
        let beta = rr_next / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_next;
        iters += 1;
    }

    let rel = linalg::norm(&linalg::sub(b, &op.apply(&x))) / b_norm;
    if rel <= cfg.tol {
        Ok(CgOutcome { x, iters, relative_residual: rel })
    } else {
        Err(Error::NonConvergence { residual: rel, iters })
    }
}

/// `H_i⁻¹ g_i` for the shard `scope`, computed matrix-free.
pub fn local_newton_direction(scope: &Scope<'_>, w: &[f64], lambda: f64, kind: LossKind, cfg: &CgConfig) -> Result<Vec<f64>> {
    let g = objective::gradient(scope, w, lambda, kind)?;
    let h = HessianOperator::new(*scope, w, lambda, kind)?;
    Ok(conjugate_gradient(&h, &g, cfg)?.x)
}

/// Reference minimizer of the objective over `scope`: damped Newton with
/// Armijo backtracking, run until `‖g‖ ≤ grad_tol`.
pub fn solve_optimum(scope: &Scope<'_>, lambda: f64, kind: LossKind, grad_tol: f64) -> Result<Vec<f64>> {
    let d = scope.dataset().d();
    let cfg = CgConfig { tol: 1e-12, max_iters: Some(50 * d.max(1)) };
    let mut w = vec![0.0; d];
    let mut f = objective::loss_value(scope, &w, lambda, kind)?;
    for _ in 0..200 {
        let g = objective::gradient(scope, &w, lambda, kind)?;
        let gn = linalg::norm(&g);
        if gn <= grad_tol {
            return Ok(w);
        }
        let h = HessianOperator::new(*scope, &w, lambda, kind)?;
        let p = conjugate_gradient(&h, &g, &cfg)?.x;
        let slope = linalg::dot(&g, &p);
        let mut t = 1.0;
        loop {
            let mut cand = w.clone();
            linalg::axpy(-t, &p, &mut cand);
            let fc = objective::loss_value(scope, &cand, lambda, kind)?;
            if fc <= f - 1e-4 * t * slope || t < 1e-10 {
                w = cand;
                f = fc;
                break;
            }
            t *= 0.5;
        }
    }
    let g = objective::gradient(scope, &w, lambda, kind)?;
    if linalg::norm(&g) <= grad_tol * 1e3 {
        Ok(w)
    } else {
        Err(Error::NonConvergence { residual: linalg::norm(&g), iters: 200 })
    }
}
