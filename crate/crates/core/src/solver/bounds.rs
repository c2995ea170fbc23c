//! Closed-form constants from the convergence guarantees: the Hessian
//! approximation factor `ζ`, the gradient error floor `ε`, the per-worker
//! sample requirement, and their Byzantine / compressed counterparts.

use crate::error::{Error, Result};

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}

fn open_unit(name: &str, x: f64) -> Result<()> {
    check(x > 0.0 && x < 1.0, || format!("{name} must be in (0, 1), got {x}"))
}

/// `σ / (σ + nλ)` where `σ = σ_max(AᵀA)`.
pub fn nu(sigma_max_ata: f64, n: usize, lambda: f64) -> Result<f64> {
    check(sigma_max_ata >= 0.0 && lambda >= 0.0, || "nu inputs must be >= 0".into())?;
    let denom = sigma_max_ata + n as f64 * lambda;
    check(denom > 0.0, || "nu is undefined when sigma and n*lambda are both zero".into())?;
    Ok(sigma_max_ata / denom)
}

/// `ν (η/√m + η²/(1−η))`
pub fn zeta(nu: f64, eta: f64, m_effective: f64) -> Result<f64> {
    check((0.0..1.0).contains(&eta), || format!("eta must be in [0, 1), got {eta}"))?;
    check(m_effective >= 1.0, || format!("effective m must be >= 1, got {m_effective}"))?;
    Ok(nu * (eta / m_effective.sqrt() + eta * eta / (1.0 - eta)))
}

/// Gradient-approximation error floor:
/// `1/(1−η) · 1/√σ_min · (1 + √(2 ln(m/δ))) · √(1/s) · max‖b_i‖`.
pub fn epsilon_floor(eta: f64, sigma_min: f64, m: usize, delta: f64, s: usize, max_b_norm: f64) -> Result<f64> {
    open_unit("eta", eta)?;
    open_unit("delta", delta)?;
    check(sigma_min > 0.0, || format!("sigma_min must be > 0, got {sigma_min}"))?;
    check(m >= 1 && s >= 1, || "m and s must be >= 1".into())?;
    check(max_b_norm >= 0.0, || "max ‖b‖ must be >= 0".into())?;
    let tail = 1.0 + (2.0 * (m as f64 / delta).ln()).sqrt();
    Ok(1.0 / (1.0 - eta) / sigma_min.sqrt() * tail * (1.0 / s as f64).sqrt() * max_b_norm)
}

/// `⌈(3μd/η²) · ln(md/δ)⌉`
pub fn sample_size_bound(mu: f64, d: usize, m: usize, eta: f64, delta: f64) -> Result<u64> {
    open_unit("eta", eta)?;
    open_unit("delta", delta)?;
    check(mu >= 1.0 - 1e-9, || format!("coherence must be >= 1, got {mu}"))?;
    check(d >= 1 && m >= 1, || "d and m must be >= 1".into())?;
    let raw = 3.0 * mu * d as f64 / (eta * eta) * ((m * d) as f64 / delta).ln();
    Ok(raw.max(0.0).ceil() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ByzantineConstants {
    pub eps_sq: f64,
    pub zeta_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressedConstants {
    pub eps_sq: f64,
    pub zeta_sq: f64,
}

/// Shared pieces of the Byzantine formulas.
struct Terms {
    /// `((1−α)/(1−β))²`
    honest: f64,
    /// `4κ (α/(1−β))²`
    adversarial: f64,
    /// `(ν/(1−η))²`
    zeta_one_sq: f64,
    /// `[ν (η/√((1−α)m) + η²/(1−η))]²`
    zeta_m_sq: f64,
}

fn terms(alpha: f64, beta: f64, kappa: f64, eps: f64, nu: f64, eta: f64, m: usize) -> Result<Terms> {
    check((0.0..0.5).contains(&beta) && alpha >= 0.0 && alpha < beta, || {
        format!("requires 0 <= alpha < beta < 1/2 (alpha={alpha}, beta={beta})")
    })?;
    check(kappa >= 1.0, || format!("kappa must be >= 1, got {kappa}"))?;
    check(eps >= 0.0, || format!("eps must be >= 0, got {eps}"))?;
    check((0.0..=1.0).contains(&nu), || format!("nu must be in [0, 1], got {nu}"))?;
    open_unit("eta", eta)?;
    check(m >= 1, || "m must be >= 1".into())?;

    let r = (1.0 - alpha) / (1.0 - beta);
    let a = alpha / (1.0 - beta);
    let zeta_one = nu / (1.0 - eta);
    let zeta_m = nu * (eta / ((1.0 - alpha) * m as f64).sqrt() + eta * eta / (1.0 - eta));
    Ok(Terms { honest: r * r, adversarial: 4.0 * kappa * (a * a), zeta_one_sq: zeta_one * zeta_one, zeta_m_sq: zeta_m * zeta_m })
}

/// `ε_byz²` and `ζ_byz²` for norm-trimmed aggregation with an `α` fraction
/// of Byzantine workers and trim fraction `β`.
pub fn byzantine_constants(alpha: f64, beta: f64, kappa: f64, eps: f64, nu: f64, eta: f64, m: usize) -> Result<ByzantineConstants> {
    let t = terms(alpha, beta, kappa, eps, nu, eta, m)?;
    let eps_sq = (3.0 * t.honest + t.adversarial) * (eps * eps);
    let zeta_sq =
        2.0 * t.honest * t.zeta_one_sq + t.honest * t.zeta_m_sq + t.adversarial * (2.0 + t.zeta_one_sq);
    Ok(ByzantineConstants { eps_sq, zeta_sq })
}

/// Byzantine constants when every update passes through a `ρ`-approximate
/// compressor. At `ρ = 1` this reproduces [`byzantine_constants`] exactly.
#[allow(clippy::too_many_arguments)]
pub fn compressed_constants(
    alpha: f64,
    beta: f64,
    kappa: f64,
    eps: f64,
    nu: f64,
    eta: f64,
    m: usize,
    rho: f64,
) -> Result<CompressedConstants> {
    check((0.0..=1.0).contains(&rho), || format!("rho must be in [0, 1], got {rho}"))?;
    let t = terms(alpha, beta, kappa, eps, nu, eta, m)?;
    let loss = kappa * (1.0 - rho);
    let inflation = loss * (1.0 + t.zeta_one_sq);
    let eps_sq = (3.0 * t.honest + t.adversarial) * (1.0 + loss) * (eps * eps);
    let zeta_sq = 2.0 * t.honest * (t.zeta_one_sq + inflation)
        + t.honest * (t.zeta_m_sq + inflation)
        + t.adversarial * (2.0 + (t.zeta_one_sq + inflation));
    Ok(CompressedConstants { eps_sq, zeta_sq })
}

/// Every constant entering the convergence guarantees, evaluated for one
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub eta: f64,
    pub delta: f64,
    pub mu: f64,
    pub nu: f64,
    pub kappa: f64,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub zeta: f64,
    pub eps: f64,
    pub rho: f64,
    /// `None` unless `0 <= α < β < ½`.
    pub byzantine: Option<ByzantineConstants>,
    pub compressed: Option<CompressedConstants>,
    pub s: usize,
    pub s_min: u64,
    /// Hessian Lipschitz constant; echoed, never estimated.
    pub lipschitz: Option<f64>,
}

impl BoundReport {
    pub fn sample_size_ok(&self) -> bool {
        self.s as u64 >= self.s_min
    }

    /// `key = value` lines, 12 significant digits.
    pub fn to_key_value(&self) -> String {
        fn num(x: f64) -> String {
            format!("{x:.11e}")
        }
        let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), num);
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("eta", num(self.eta));
        line("delta", num(self.delta));
        line("mu", num(self.mu));
        line("nu", num(self.nu));
        line("kappa", num(self.kappa));
        line("sigma_max", num(self.sigma_max));
        line("sigma_min", num(self.sigma_min));
        line("zeta", num(self.zeta));
        line("eps", num(self.eps));
        line("rho", num(self.rho));
        line("eps_byz_sq", opt(self.byzantine.map(|b| b.eps_sq)));
        line("zeta_byz_sq", opt(self.byzantine.map(|b| b.zeta_sq)));
        line("eps_comp_byz_sq", opt(self.compressed.map(|c| c.eps_sq)));
        line("zeta_comp_byz_sq", opt(self.compressed.map(|c| c.zeta_sq)));
        line("lipschitz", opt(self.lipschitz));
        line("s", self.s.to_string());
        line("s_min", self.s_min.to_string());
        line("sample_size_check", if self.sample_size_ok() { "PASS".into() } else { "FAIL".into() });
        out
    }
}
