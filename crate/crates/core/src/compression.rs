//! `ρ`-approximate compressors: operators `Q` with
//! `‖Q(x) − x‖² ≤ (1 − ρ)‖x‖²`, pointwise for the deterministic kinds and in
//! expectation for the randomized ones.
//!
//! Wire sizes used for communication accounting (`d` = dimension):
//!
//! | kind            | bits                                    |
//! |-----------------|-----------------------------------------|
//! | `identity`      | `64 d`                                  |
//! | `top-k`,`rand-k`| `k (32 + 64)` (u32 index + f64 value)   |
//! | `sign-l1`       | `64 + 2 d` (scale + ternary sign)       |
//! | `quantize:s`    | `64 + d (1 + ⌈log2(s + 1)⌉)`            |

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{self, tag, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressorSpec {
    Identity,
    /// Keep the `k` largest-magnitude coordinates; ties go to the lower index.
    TopK(usize),
    /// Keep `k` coordinates chosen uniformly without replacement, unscaled.
    RandK(usize),
    /// `(‖x‖₁ / d) · sign(x)`
    SignL1,
    /// Stochastic rounding to `levels` magnitude levels per unit of `‖x‖₂`,
    /// shrunk by `1/(1+τ)` with `τ = min(d/s², √d/s)`.
    Quantize(u32),
}

impl CompressorSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        match *self {
            Self::TopK(k) | Self::RandK(k) if k == 0 || k > d => {
                Err(Error::Compressor(format!("k = {k} must be in [1, {d}]")))
            }
            Self::Quantize(0) => Err(Error::Compressor("quantize needs at least 1 level".into())),
            _ => Ok(()),
        }
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self, Self::RandK(_) | Self::Quantize(_))
    }

    pub fn payload_bits(&self, d: usize) -> u64 {
        let d = d as u64;
        match *self {
            Self::Identity => 64 * d,
            Self::TopK(k) | Self::RandK(k) => k as u64 * (32 + 64),
            Self::SignL1 => 64 + 2 * d,
            Self::Quantize(levels) => {
                let level_bits = 64 - u64::from(levels).leading_zeros() as u64; // ⌈log2(levels+1)⌉
                64 + d * (1 + level_bits)
            }
        }
    }
}

impl FromStr for CompressorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let count = || -> Result<usize> {
            arg.ok_or_else(|| Error::Compressor(format!("{kind} needs a parameter, e.g. {kind}:10")))?
                .parse()
                .map_err(|_| Error::Compressor(format!("bad parameter in {s:?}")))
        };
        match kind {
            "identity" if arg.is_none() => Ok(Self::Identity),
            "sign-l1" if arg.is_none() => Ok(Self::SignL1),
            "top-k" => Ok(Self::TopK(count()?)),
            "rand-k" => Ok(Self::RandK(count()?)),
            "quantize" => Ok(Self::Quantize(count()? as u32)),
            _ => Err(Error::Compressor(format!("unknown compressor {s:?}"))),
        }
    }
}

impl fmt::Display for CompressorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "identity"),
            Self::TopK(k) => write!(f, "top-k:{k}"),
            Self::RandK(k) => write!(f, "rand-k:{k}"),
            Self::SignL1 => write!(f, "sign-l1"),
            Self::Quantize(l) => write!(f, "quantize:{l}"),
        }
    }
}

fn qsgd_variance(levels: u32, d: usize) -> f64 {
    let s = f64::from(levels);
    let d = d as f64;
    (d / (s * s)).min(d.sqrt() / s)
}

/// Guaranteed compression factor. For `sign-l1` the factor depends on `x`;
/// without it the worst case `1/d` is returned.
pub fn rho_of(spec: &CompressorSpec, d: usize, x: Option<&[f64]>) -> f64 {
    match *spec {
        CompressorSpec::Identity => 1.0,
        CompressorSpec::TopK(k) | CompressorSpec::RandK(k) => k.min(d) as f64 / d as f64,
        CompressorSpec::SignL1 => match x {
            Some(x) if linalg::dot(x, x) > 0.0 => {
                let l1: f64 = x.iter().map(|v| v.abs()).sum();
                l1 * l1 / (d as f64 * linalg::dot(x, x))
            }
            _ => 1.0 / d as f64,
        },
        CompressorSpec::Quantize(levels) => 1.0 / (1.0 + qsgd_variance(levels, d)),
    }
}

/// Applies the compressor. `rng` is only consumed by randomized kinds.
pub fn compress(spec: &CompressorSpec, x: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
    let d = x.len();
    spec.validate(d)?;
    Ok(match *spec {
        CompressorSpec::Identity => x.to_vec(),
        CompressorSpec::TopK(k) => {
            let mut order: Vec<usize> = (0..d).collect();
            order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
            let mut out = vec![0.0; d];
            for &i in &order[..k] {
                out[i] = x[i];
            }
            out
        }
        CompressorSpec::RandK(k) => {
            let mut out = vec![0.0; d];
            for i in rand::seq::index::sample(rng, d, k) {
                out[i] = x[i];
            }
            out
        }
        CompressorSpec::SignL1 => {
            let scale = x.iter().map(|v| v.abs()).sum::<f64>() / d as f64;
            x.iter().map(|&v| if v == 0.0 { 0.0 } else { scale * v.signum() }).collect()
        }
        CompressorSpec::Quantize(levels) => {
            let nrm = linalg::norm(x);
            if nrm == 0.0 {
                return Ok(vec![0.0; d]);
            }
            let s = f64::from(levels);
            let shrink = 1.0 / (1.0 + qsgd_variance(levels, d));
            x.iter()
                .map(|&v| {
                    let level = s * v.abs() / nrm;
                    let lower = level.floor();
                    let q = if rng.random::<f64>() < level - lower { lower + 1.0 } else { lower };
                    shrink * nrm * v.signum() * q / s
                })
                .collect()
        }
    })
}

/// Empirical check of `‖Q(x) − x‖² ≤ (1 − ρ)‖x‖²` over a seeded corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractCheck {
    pub spec: CompressorSpec,
    pub samples: usize,
    /// Deterministic kinds: allowed violation rate (0). Randomized kinds:
    /// the guaranteed mean of `‖Q(x) − x‖² / ‖x‖²`, i.e. `1 − ρ`.
    pub declared: f64,
    /// Violation rate, or the observed mean normalized error.
    pub empirical: f64,
    /// Standard error of `empirical` (0 for deterministic kinds).
    pub std_error: f64,
}

impl ContractCheck {
    pub fn passes(&self) -> bool {
        if self.spec.is_randomized() {
            self.empirical <= self.declared + 3.0 * self.std_error
        } else {
            self.empirical == 0.0
        }
    }
}

/// Corpus vector `k` of dimension `d`: Gaussian with random scale, a
/// sprinkling of exact zeros, and every fourth vector made of repeated
/// small integers so magnitude ties occur.
pub fn corpus_vector(seed: u64, k: usize, d: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, &[tag::CORPUS, k as u64]);
    let scale = 10f64.powf(r.random_range(-3.0..3.0));
    (0..d)
        .map(|_| {
            if k % 4 == 3 {
                f64::from(r.random_range(-2i32..=2))
            } else if r.random::<f64>() < 0.1 {
                0.0
            } else {
                scale * r.sample::<f64, _>(StandardNormal)
            }
        })
        .collect()
}

/// Runs `samples` corpus vectors through `spec` (one draw each).
pub fn check_contract(spec: &CompressorSpec, d: usize, samples: usize, seed: u64) -> Result<ContractCheck> {
    spec.validate(d)?;
    if samples == 0 {
        return Err(Error::Compressor("contract check needs at least one sample".into()));
    }
    let mut draw = rng::stream(seed, &[tag::COMPRESS]);
    let mut violations = 0usize;
    let mut ratios = Vec::with_capacity(samples);
    for k in 0..samples {
        let x = corpus_vector(seed, k, d);
        let q = compress(spec, &x, &mut draw)?;
        let sq = linalg::dot(&x, &x);
        let err: f64 = q.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
        let rho = rho_of(spec, d, Some(&x));
        if err > (1.0 - rho) * sq * (1.0 + 1e-12) + 1e-300 {
            violations += 1;
        }
        if sq > 0.0 {
            ratios.push(err / sq);
        }
    }
    if !spec.is_randomized() {
        return Ok(ContractCheck {
            spec: *spec,
            samples,
            declared: 0.0,
            empirical: violations as f64 / samples as f64,
            std_error: 0.0,
        });
    }
    let n = ratios.len().max(1) as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let var = ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(ContractCheck {
        spec: *spec,
        samples,
        declared: 1.0 - rho_of(spec, d, None),
        empirical: mean,
        std_error: (var / n).sqrt(),
    })
}
