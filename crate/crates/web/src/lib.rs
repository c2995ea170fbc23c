//! wasm-bindgen surface for `www/index.html`.

use comrade::byzantine::{AttackKind, AttackSpec};
use comrade::compression::{self, CompressorSpec};
use comrade::data::{generate_synthetic, SyntheticSpec};
use comrade::protocol::{self, Algorithm, RunConfig};
use comrade::{rng, solver};
use wasm_bindgen::prelude::*;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Training accuracy per iteration for the trimmed one-round method followed
/// by the untrimmed average, on the same synthetic data and attack. Returns
/// `2 · iterations` values.
#[allow(clippy::too_many_arguments)]
pub fn accuracy_traces(
    n: usize,
    d: usize,
    m: usize,
    alpha: f64,
    attack: &str,
    compressor: &str,
    iterations: usize,
    seed: u64,
) -> comrade::Result<Vec<f64>> {
    let (ds, _) = generate_synthetic(&SyntheticSpec::new(n, d, seed))?;
    let kind: AttackKind = attack.parse()?;
    let beta = if alpha > 0.0 { alpha + 2.0 / m as f64 } else { 0.0 };
    let base = RunConfig {
        m,
        beta: beta.min(0.49),
        lambda: 1e-3,
        iterations,
        compressor: compressor.parse()?,
        attack: AttackSpec { kind, alpha, seed },
        seed,
        ..Default::default()
    };
    let mut out = Vec::with_capacity(2 * iterations);
    for algorithm in [Algorithm::Comrade, Algorithm::PlainAverage] {
        let trace = protocol::run(&RunConfig { algorithm, ..base.clone() }, &ds, None)?;
        out.extend(trace.records.iter().map(|r| r.accuracy));
    }
    Ok(out)
}

/// `[compressed..., rho, bits]` for one vector.
pub fn compress_values(values: &[f64], spec: &str, seed: u64) -> comrade::Result<Vec<f64>> {
    let spec: CompressorSpec = spec.parse()?;
    let mut r = rng::stream(seed, &[rng::tag::COMPRESS]);
    let mut out = compression::compress(&spec, values, &mut r)?;
    out.push(compression::rho_of(&spec, values.len(), Some(values)));
    out.push(spec.payload_bits(values.len()) as f64);
    Ok(out)
}

/// `[α, ε_byz², ε_comp,byz²]` triples on an even grid of `α ∈ [0, β)`.
#[allow(clippy::too_many_arguments)]
pub fn bound_curve(beta: f64, kappa: f64, eps: f64, nu: f64, eta: f64, m: usize, rho: f64, points: usize) -> comrade::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(3 * points);
    for k in 0..points {
        let alpha = beta * k as f64 / points as f64;
        let byz = solver::byzantine_constants(alpha, beta, kappa, eps, nu, eta, m)?;
        let comp = solver::compressed_constants(alpha, beta, kappa, eps, nu, eta, m, rho)?;
        out.extend([alpha, byz.eps_sq, comp.eps_sq]);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = accuracyTraces)]
#[allow(clippy::too_many_arguments)]
pub fn accuracy_traces_js(
    n: usize,
    d: usize,
    m: usize,
    alpha: f64,
    attack: &str,
    compressor: &str,
    iterations: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    accuracy_traces(n, d, m, alpha, attack, compressor, iterations, seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = compressValues)]
pub fn compress_values_js(values: Vec<f64>, spec: &str, seed: u32) -> Result<Vec<f64>, JsError> {
    compress_values(&values, spec, seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = boundCurve)]
#[allow(clippy::too_many_arguments)]
pub fn bound_curve_js(beta: f64, kappa: f64, eps: f64, nu: f64, eta: f64, m: usize, rho: f64, points: usize) -> Result<Vec<f64>, JsError> {
    bound_curve(beta, kappa, eps, nu, eta, m, rho, points).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn traces_have_both_algorithms() {
        let v = accuracy_traces(400, 5, 4, 0.0, "none", "identity", 3, 1).unwrap();
        assert_eq!(v.len(), 6);
        assert!(v.iter().all(|a| (0.0..=1.0).contains(a)));
        // without attack and trimming both algorithms coincide
        assert_eq!(v[..3], v[3..]);
    }

    #[test]
    fn compress_reports_rho_and_bits() {
        let v = compress_values(&[3.0, 4.0], "top-k:1", 0).unwrap();
        assert_eq!(v, vec![0.0, 4.0, 0.5, 96.0]);
        assert!(compress_values(&[1.0], "nope", 0).is_err());
    }

    #[test]
    fn curve_shape() {
        let c = bound_curve(0.2, 2.0, 1.0, 0.5, 0.2, 10, 1.0, 4).unwrap();
        assert_eq!(c.len(), 12);
        for t in c.chunks(3) {
            assert_eq!(t[1], t[2]);
        }
    }
}
