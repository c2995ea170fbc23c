//! Attack models and the choice of which workers misbehave.
//!
//! Label attacks rewrite a Byzantine worker's shard labels once, at setup.
//! Update attacks rewrite the direction a Byzantine worker sends, every
//! iteration, before any compression.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{self, tag, Rng};

/// Slack for `⌊αm⌋` / `⌈βm⌉` so that e.g. `0.29 · 100` counts as 29.
const COUNT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackKind {
    None,
    /// `y → −y` on the worker's shard.
    FlippedLabel,
    /// Send `−c · p̂` with `c ∈ (0, 1)`.
    NegativeUpdate { c: f64 },
    /// Send `p̂ + z`, `z ~ N(mean, std²)` per coordinate. Without an explicit
    /// std, 10× the median honest update norm of the first iteration is used.
    Gaussian { mean: f64, std: Option<f64> },
    /// Replace each label by a fair coin flip.
    RandomLabel,
}

impl AttackKind {
    pub fn is_data_attack(&self) -> bool {
        matches!(self, Self::FlippedLabel | Self::RandomLabel)
    }

    pub fn is_update_attack(&self) -> bool {
        matches!(self, Self::NegativeUpdate { .. } | Self::Gaussian { .. })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::FlippedLabel => "flipped-label",
            Self::NegativeUpdate { .. } => "negative-update",
            Self::Gaussian { .. } => "gaussian",
            Self::RandomLabel => "random-label",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::NegativeUpdate { c } if !(c > 0.0 && c < 1.0) => {
                Err(Error::Config(format!("negative-update c must be in (0, 1), got {c}")))
            }
            Self::Gaussian { mean, std } if !mean.is_finite() || std.is_some_and(|s| !(s >= 0.0 && s.is_finite())) => {
                Err(Error::Config("gaussian attack needs finite mean and std >= 0".into()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Parses the bare kind name; parameters come from separate config keys.
impl FromStr for AttackKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "flipped-label" => Ok(Self::FlippedLabel),
            "negative-update" => Ok(Self::NegativeUpdate { c: 0.9 }),
            "gaussian" => Ok(Self::Gaussian { mean: 0.0, std: None }),
            "random-label" => Ok(Self::RandomLabel),
            _ => Err(Error::Config(format!("unknown attack {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Byzantine fraction, `[0, ½)`.
    pub alpha: f64,
    pub seed: u64,
}

impl AttackSpec {
    pub fn none() -> Self {
        Self { kind: AttackKind::None, alpha: 0.0, seed: 0 }
    }

    pub fn is_active(&self) -> bool {
        self.kind != AttackKind::None && self.alpha > 0.0
    }
}

/// `⌊αm⌋`
pub fn byzantine_count(m: usize, alpha: f64) -> usize {
    (alpha * m as f64 + COUNT_SLACK).floor() as usize
}

/// `⌈βm⌉`
pub fn trim_count(m: usize, beta: f64) -> usize {
    ((beta * m as f64 - COUNT_SLACK).ceil().max(0.0) as usize).min(m)
}

/// Picks `⌊αm⌋` distinct worker ids uniformly at random.
pub fn designate(m: usize, alpha: f64, seed: u64) -> Result<BTreeSet<usize>> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::Domain(format!("alpha must be in [0, 1/2), got {alpha}")));
    }
    if m == 0 {
        return Err(Error::Domain("m must be >= 1".into()));
    }
    let mut r = rng::stream(seed, &[tag::DESIGNATE]);
    Ok(index::sample(&mut r, m, byzantine_count(m, alpha)).into_iter().collect())
}

/// Label attack on one shard's labels.
pub fn corrupt_data(labels: &[f64], kind: &AttackKind, rng: &mut Rng) -> Vec<f64> {
    match kind {
        AttackKind::FlippedLabel => labels.iter().map(|y| -y).collect(),
        AttackKind::RandomLabel => labels.iter().map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
        _ => labels.to_vec(),
    }
}

/// Update attack on one outgoing direction. `gaussian_std` supplies the std
/// when the attack spec leaves it open.
pub fn corrupt_update(p: &[f64], kind: &AttackKind, gaussian_std: f64, rng: &mut Rng) -> Vec<f64> {
    match *kind {
        AttackKind::NegativeUpdate { c } => p.iter().map(|v| -c * v).collect(),
        AttackKind::Gaussian { mean, std } => {
            let std = std.unwrap_or(gaussian_std);
            if std == 0.0 {
                return p.iter().map(|v| v + mean).collect();
            }
            let noise = Normal::new(mean, std).expect("std validated finite and >= 0");
            p.iter().map(|v| v + noise.sample(rng)).collect()
        }
        _ => p.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    #[test]
    fn designation_sizes() {
        assert!(designate(20, 0.0, 1).unwrap().is_empty());
        assert_eq!(designate(20, 0.1, 1).unwrap().len(), 2);
        assert_eq!(designate(20, 0.15, 1).unwrap().len(), 3);
        assert_eq!(designate(100, 0.29, 1).unwrap().len(), 29);
        assert_eq!(designate(20, 0.2, 5).unwrap(), designate(20, 0.2, 5).unwrap());
        assert!(designate(20, 0.5, 1).is_err());
    }

    #[test]
    fn trim_counts() {
        assert_eq!(trim_count(20, 0.1 + 2.0 / 20.0), 4);
        assert_eq!(trim_count(20, 0.15 + 0.1), 5);
        assert_eq!(trim_count(6, 1.0 / 3.0), 2);
        assert_eq!(trim_count(7, 0.2), 2);
        assert_eq!(trim_count(7, 0.0), 0);
    }

    #[test]
    fn flipping_is_an_involution() {
        let mut r = rng::stream(0, &[]);
        let y = [1.0, -1.0, 1.0];
        let once = corrupt_data(&y, &AttackKind::FlippedLabel, &mut r);
        assert_eq!(once, vec![-1.0, 1.0, -1.0]);
        assert_eq!(corrupt_data(&once, &AttackKind::FlippedLabel, &mut r), y.to_vec());
    }

    #[test]
    fn random_labels_differ_about_half_the_time() {
        let mut r = rng::stream(3, &[]);
        let y = vec![1.0; 10_000];
        let z = corrupt_data(&y, &AttackKind::RandomLabel, &mut r);
        let diff = z.iter().filter(|v| **v != 1.0).count() as f64;
        // binomial(10⁴, ½): 4σ = 200
        assert!((diff - 5000.0).abs() < 200.0, "{diff}");
    }

    #[test]
    fn negative_update_scales() {
        let mut r = rng::stream(0, &[]);
        let out = corrupt_update(&[1.0, 2.0], &AttackKind::NegativeUpdate { c: 0.9 }, 0.0, &mut r);
        assert_eq!(out, vec![-0.9, -1.8]);
        let p = [3.0, -4.0, 12.0];
        let out = corrupt_update(&p, &AttackKind::NegativeUpdate { c: 0.3 }, 0.0, &mut r);
        assert!((norm(&out) - 0.3 * norm(&p)).abs() < 1e-14);
    }

    #[test]
    fn gaussian_noise_statistics() {
        let mut r = rng::stream(0, &[]);
        let p = [1.0, 2.0];
        let same = corrupt_update(&p, &AttackKind::Gaussian { mean: 0.0, std: Some(0.0) }, 5.0, &mut r);
        assert_eq!(same, p.to_vec());

        let zeros = vec![0.0; 10_000];
        let noisy = corrupt_update(&zeros, &AttackKind::Gaussian { mean: 0.0, std: Some(1.0) }, 0.0, &mut r);
        let mean = noisy.iter().sum::<f64>() / 1e4;
        assert!(mean.abs() < 3.0 / 100.0, "{mean}");
    }

    #[test]
    fn kind_validation() {
        assert!(AttackKind::NegativeUpdate { c: 1.0 }.validate().is_err());
        assert!(AttackKind::Gaussian { mean: 0.0, std: Some(-1.0) }.validate().is_err());
        assert!(AttackKind::NegativeUpdate { c: 0.9 }.validate().is_ok());
        assert_eq!("random-label".parse::<AttackKind>().unwrap(), AttackKind::RandomLabel);
    }
}
