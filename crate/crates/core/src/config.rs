//! Experiment config files: one `key = value` per line, `#` starts a comment.
//!
//! ```text
//! seed = 7
//! algorithm = comrade
//! m = 20
//! alpha = 0.1
//! beta = 0.2
//! attack = negative-update
//! attack_c = 0.9
//! synthetic_n = 20000
//! synthetic_d = 50
//! ```
//!
//! `seed` is mandatory. `attack_seed` and `synthetic_seed` default to it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::byzantine::{AttackKind, AttackSpec};
use crate::data::SyntheticSpec;
use crate::error::{Error, Result};
use crate::protocol::RunConfig;
use crate::solver::CgConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Libsvm { path: PathBuf, dims: Option<usize> },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    pub data: DataSource,
    pub output: Option<PathBuf>,
    /// Solve for `w*` up front and report `‖w_t − w*‖`.
    pub track_delta: bool,
    /// Sketch closeness for the bound report and the Hessian sketch check.
    pub eta: f64,
    pub delta: f64,
    pub lipschitz: Option<f64>,
    pub validate_trials: usize,
}

const KEYS: &[&str] = &[
    "algorithm",
    "m",
    "alpha",
    "beta",
    "gamma",
    "lambda",
    "iterations",
    "loss",
    "compressor",
    "attack",
    "attack_c",
    "attack_mean",
    "attack_std",
    "attack_seed",
    "cg_tol",
    "cg_max_iters",
    "partition",
    "shard_size",
    "seed",
    "data",
    "libsvm_dim",
    "synthetic_n",
    "synthetic_d",
    "synthetic_seed",
    "synthetic_margin",
    "synthetic_noise",
    "output",
    "track_delta",
    "eta",
    "delta",
    "lipschitz",
    "validate_trials",
];

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.0.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: bad value {v:?} for {key}"))),
        }
    }

    fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.take(key)?.unwrap_or(default))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`", k + 1)));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key {key:?}", k + 1)));
            }
            if map.insert(key.to_string(), (k + 1, value.to_string())).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", k + 1)));
            }
        }
        Self::from_entries(Entries(map))
    }

    fn from_entries(mut e: Entries) -> Result<Self> {
        let seed: u64 = e.take("seed")?.ok_or_else(|| Error::Config("missing required key `seed`".into()))?;
        let defaults = RunConfig::default();

        let mut kind: AttackKind = e.take_or("attack", AttackKind::None)?;
        let c: Option<f64> = e.take("attack_c")?;
        let mean: Option<f64> = e.take("attack_mean")?;
        let std: Option<f64> = e.take("attack_std")?;
        match &mut kind {
            AttackKind::NegativeUpdate { c: slot } => *slot = c.unwrap_or(*slot),
            AttackKind::Gaussian { mean: mu, std: sd } => {
                *mu = mean.unwrap_or(*mu);
                *sd = std.or(*sd);
            }
            _ => {}
        }
        let stray = match kind {
            AttackKind::NegativeUpdate { .. } => mean.is_some() || std.is_some(),
            AttackKind::Gaussian { .. } => c.is_some(),
            _ => c.is_some() || mean.is_some() || std.is_some(),
        };
        if stray {
            return Err(Error::Config(format!("attack parameters given that do not apply to {kind}")));
        }
        let attack = AttackSpec { kind, alpha: e.take_or("alpha", 0.0)?, seed: e.take_or("attack_seed", seed)? };

        let run = RunConfig {
            algorithm: e.take_or("algorithm", defaults.algorithm)?,
            m: e.take_or("m", defaults.m)?,
            beta: e.take_or("beta", defaults.beta)?,
            gamma: e.take_or("gamma", defaults.gamma)?,
            lambda: e.take_or("lambda", defaults.lambda)?,
            iterations: e.take_or("iterations", defaults.iterations)?,
            loss: e.take_or("loss", defaults.loss)?,
            compressor: e.take_or("compressor", defaults.compressor)?,
            attack,
            cg: CgConfig { tol: e.take_or("cg_tol", defaults.cg.tol)?, max_iters: e.take("cg_max_iters")? },
            partition: e.take_or("partition", defaults.partition)?,
            shard_size: e.take("shard_size")?,
            seed,
        };
        run.validate()?;

        let path: Option<PathBuf> = e.take("data")?;
        let dims: Option<usize> = e.take("libsvm_dim")?;
        let synth_n: Option<usize> = e.take("synthetic_n")?;
        let synth_d: Option<usize> = e.take("synthetic_d")?;
        let synth_seed: Option<u64> = e.take("synthetic_seed")?;
        let margin: Option<f64> = e.take("synthetic_margin")?;
        let noise: Option<f64> = e.take("synthetic_noise")?;
        let any_synth = synth_n.is_some() || synth_d.is_some() || synth_seed.is_some() || margin.is_some() || noise.is_some();
        let data = match (path, synth_n, synth_d) {
            (Some(_), ..) if any_synth => return Err(Error::Config("give either `data` or synthetic_* keys, not both".into())),
            (Some(path), ..) => DataSource::Libsvm { path, dims },
            (None, Some(n), Some(d)) if dims.is_none() => {
                let base = SyntheticSpec::new(n, d, synth_seed.unwrap_or(seed));
                DataSource::Synthetic(SyntheticSpec {
                    margin: margin.unwrap_or(base.margin),
                    noise_std: noise.unwrap_or(base.noise_std),
                    ..base
                })
            }
            _ => return Err(Error::Config("need `data = <path>` or both synthetic_n and synthetic_d".into())),
        };

        let cfg = Self {
            run,
            data,
            output: e.take("output")?,
            track_delta: e.take_or("track_delta", false)?,
            eta: e.take_or("eta", 0.5)?,
            delta: e.take_or("delta", 0.1)?,
            lipschitz: e.take("lipschitz")?,
            validate_trials: e.take_or("validate_trials", 1000)?,
        };
        debug_assert!(e.0.is_empty(), "unconsumed keys {:?}", e.0.keys());
        if !(cfg.eta > 0.0 && cfg.eta < 1.0) || !(cfg.delta > 0.0 && cfg.delta < 1.0) {
            return Err(Error::Config("eta and delta must lie in (0, 1)".into()));
        }
        if cfg.validate_trials == 0 {
            return Err(Error::Config("validate_trials must be >= 1".into()));
        }
        Ok(cfg)
    }

    /// Every key written explicitly, so that `parse(dump())` is the identity.
    pub fn dump(&self) -> String {
        let r = &self.run;
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("seed", &r.seed);
        kv("algorithm", &r.algorithm);
        kv("m", &r.m);
        kv("alpha", &r.attack.alpha);
        kv("beta", &r.beta);
        kv("gamma", &r.gamma);
        kv("lambda", &r.lambda);
        kv("iterations", &r.iterations);
        kv("loss", &r.loss);
        kv("compressor", &r.compressor);
        kv("attack", &r.attack.kind);
        match r.attack.kind {
            AttackKind::NegativeUpdate { c } => kv("attack_c", &c),
            AttackKind::Gaussian { mean, std } => {
                kv("attack_mean", &mean);
                if let Some(s) = std {
                    kv("attack_std", &s);
                }
            }
            _ => {}
        }
        kv("attack_seed", &r.attack.seed);
        kv("cg_tol", &r.cg.tol);
        if let Some(k) = r.cg.max_iters {
            kv("cg_max_iters", &k);
        }
        kv("partition", &r.partition);
        if let Some(s) = r.shard_size {
            kv("shard_size", &s);
        }
        match &self.data {
            DataSource::Libsvm { path, dims } => {
                kv("data", &path.display());
                if let Some(d) = dims {
                    kv("libsvm_dim", d);
                }
            }
            DataSource::Synthetic(s) => {
                kv("synthetic_n", &s.n);
                kv("synthetic_d", &s.d);
                kv("synthetic_seed", &s.seed);
                kv("synthetic_margin", &s.margin);
                kv("synthetic_noise", &s.noise_std);
            }
        }
        if let Some(p) = &self.output {
            kv("output", &p.display());
        }
        kv("track_delta", &self.track_delta);
        kv("eta", &self.eta);
        kv("delta", &self.delta);
        if let Some(l) = self.lipschitz {
            kv("lipschitz", &l);
        }
        kv("validate_trials", &self.validate_trials);
        out
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}
