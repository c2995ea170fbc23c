//! Simulated parameter server.
//!
//! Each iteration the center broadcasts `w_t`; workers answer with messages;
//! the center sorts the messages by norm, keeps the `m − ⌈βm⌉` smallest and
//! steps along their mean. The one-round method has every worker send its
//! local Newton direction `H_i⁻¹ g_i` (optionally compressed). The two-round
//! baselines first average local gradients, then ask workers for
//! `H_i⁻¹ g`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::byzantine::{self, AttackSpec};
use crate::compression::{self, CompressorSpec};
use crate::data::{self, Dataset, PartitionMode, ShardAssignment};
use crate::error::{Error, Result};
use crate::exec;
use crate::linalg;
use crate::objective::{self, HessianOperator, LossKind, Scope};
use crate::rng::{self, tag};
use crate::solver::{self, CgConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// One round per iteration, norm-trimmed local Newton directions.
    Comrade,
    /// Two rounds: exact gradient, then averaged `H_i⁻¹ g`.
    Giant,
    /// Two rounds with norm trimming on the first-round gradients.
    RobustGiant,
    /// One round, no trimming.
    PlainAverage,
}

impl Algorithm {
    pub fn trims(&self) -> bool {
        matches!(self, Self::Comrade | Self::RobustGiant)
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "comrade" => Ok(Self::Comrade),
            "giant" => Ok(Self::Giant),
            "robust-giant" => Ok(Self::RobustGiant),
            "plain-average" => Ok(Self::PlainAverage),
            _ => Err(Error::Config(format!("unknown algorithm {s:?}"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Comrade => "comrade",
            Self::Giant => "giant",
            Self::RobustGiant => "robust-giant",
            Self::PlainAverage => "plain-average",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub m: usize,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub loss: LossKind,
    pub compressor: CompressorSpec,
    pub attack: AttackSpec,
    pub cg: CgConfig,
    pub partition: PartitionMode,
    /// Per-worker sample count; `⌊n/m⌋` when unset.
    pub shard_size: Option<usize>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Comrade,
            m: 20,
            beta: 0.0,
            gamma: 1.0,
            lambda: 1e-4,
            iterations: 30,
            loss: LossKind::Logistic,
            compressor: CompressorSpec::Identity,
            attack: AttackSpec::none(),
            cg: CgConfig::default(),
            partition: PartitionMode::Disjoint,
            shard_size: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn alpha(&self) -> f64 {
        self.attack.alpha
    }

    /// Trim fraction actually applied by the center.
    pub fn effective_beta(&self) -> f64 {
        if self.algorithm.trims() {
            self.beta
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m == 0 {
            return bad("m must be >= 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be > 0, got {}", self.gamma));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(0.0..0.5).contains(&self.beta) {
            return bad(format!("beta must be in [0, 1/2), got {}", self.beta));
        }
        if !(0.0..0.5).contains(&self.attack.alpha) {
            return bad(format!("alpha must be in [0, 1/2), got {}", self.attack.alpha));
        }
        if self.attack.is_active() && self.algorithm.trims() && self.attack.alpha >= self.beta {
            return bad(format!("trimming requires alpha < beta (alpha={}, beta={})", self.attack.alpha, self.beta));
        }
        if self.shard_size == Some(0) {
            return bad("shard size must be >= 1".into());
        }
        self.attack.kind.validate()?;
        self.cg.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerReport {
    pub worker: usize,
    pub direction: Vec<f64>,
    pub bits: u64,
}

impl WorkerReport {
    pub fn is_valid(&self) -> bool {
        linalg::is_finite(&self.direction)
    }

    /// Sort key; non-finite payloads rank last.
    fn norm_key(&self) -> f64 {
        let n = linalg::norm(&self.direction);
        if n.is_finite() {
            n
        } else {
            f64::INFINITY
        }
    }
}

/// Outcome of norm-based trimming.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    /// Ascending worker ids.
    pub kept: Vec<usize>,
    /// Ascending worker ids.
    pub trimmed: Vec<usize>,
    pub direction: Vec<f64>,
}

/// Keeps the `m − ⌈βm⌉` reports of smallest norm (ties to the lower worker
/// id, non-finite last) and averages them in ascending id order.
pub fn trim_by_norm(reports: &[WorkerReport], beta: f64) -> Result<Aggregate> {
    let Some(first) = reports.first() else {
        return Err(Error::Aggregation("no reports".into()));
    };
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::Aggregation(format!("beta must be in [0, 1), got {beta}")));
    }
    let m = reports.len();
    let drop = byzantine::trim_count(m, beta);
    let keep = m - drop;
    if keep == 0 {
        return Err(Error::Aggregation("trimming leaves no reports".into()));
    }
    let mut order: Vec<(f64, usize, usize)> =
        reports.iter().enumerate().map(|(k, r)| (r.norm_key(), r.worker, k)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut kept: Vec<(usize, usize)> = order[..keep].iter().map(|&(_, w, k)| (w, k)).collect();
    if kept.iter().any(|&(_, k)| !reports[k].is_valid()) {
        let bad = reports.iter().filter(|r| !r.is_valid()).count();
        return Err(Error::Aggregation(format!("{bad} non-finite reports exceed the {drop} trimmed slots")));
    }
    kept.sort_unstable();
    let mut trimmed: Vec<usize> = order[keep..].iter().map(|&(_, w, _)| w).collect();
    trimmed.sort_unstable();

    let mut direction = vec![0.0; first.direction.len()];
    for &(_, k) in &kept {
        linalg::axpy(1.0, &reports[k].direction, &mut direction);
    }
    linalg::scale(1.0 / keep as f64, &mut direction);
    Ok(Aggregate { kept: kept.into_iter().map(|(w, _)| w).collect(), trimmed, direction })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub w: Vec<f64>,
    /// Completed iterations.
    pub t: usize,
    pub w_star: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration index; metrics below are evaluated at the new iterate.
    pub t: usize,
    pub w: Vec<f64>,
    pub kept: Vec<usize>,
    pub trimmed: Vec<usize>,
    pub loss: f64,
    pub accuracy: f64,
    pub grad_norm: f64,
    pub delta_norm: Option<f64>,
    /// Worker → center messages sent this iteration.
    pub messages: usize,
    pub bits: u64,
    pub bits_cumulative: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<IterationRecord>,
    pub final_w: Vec<f64>,
}

/// Setup plus mutable state of one run.
#[derive(Debug)]
pub struct Simulation<'a> {
    dataset: &'a Dataset,
    config: RunConfig,
    shards: ShardAssignment,
    byzantine: BTreeSet<usize>,
    /// Per-worker label overrides from data attacks.
    labels: Vec<Option<Vec<f64>>>,
    gaussian_std: Option<f64>,
    state: ModelState,
    bits: u64,
}

impl<'a> Simulation<'a> {
    /// Partitions the data, designates Byzantine workers and applies label
    /// attacks. Starts from `w₀ = 0`.
    pub fn new(dataset: &'a Dataset, config: RunConfig, w_star: Option<Vec<f64>>) -> Result<Self> {
        config.validate()?;
        config.compressor.validate(dataset.d())?;
        if w_star.as_ref().is_some_and(|w| w.len() != dataset.d()) {
            return Err(Error::Dimension("w* has the wrong length".into()));
        }
        let shards = data::partition(dataset, config.m, config.partition, config.shard_size, config.seed)?;
        let attack = config.attack;
        let byzantine = if attack.is_active() {
            byzantine::designate(config.m, attack.alpha, attack.seed)?
        } else {
            BTreeSet::new()
        };
        let labels = (0..config.m)
            .map(|i| {
                (byzantine.contains(&i) && attack.kind.is_data_attack()).then(|| {
                    let mut r = rng::stream(attack.seed, &[tag::DATA_ATTACK, i as u64]);
                    let ys: Vec<f64> = shards.shards[i].iter().map(|&j| dataset.labels()[j]).collect();
                    byzantine::corrupt_data(&ys, &attack.kind, &mut r)
                })
            })
            .collect();
        let state = ModelState { w: vec![0.0; dataset.d()], t: 0, w_star };
        Ok(Self { dataset, config, shards, byzantine, labels, gaussian_std: None, state, bits: 0 })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn shards(&self) -> &ShardAssignment {
        &self.shards
    }

    pub fn byzantine(&self) -> &BTreeSet<usize> {
        &self.byzantine
    }

    /// The samples worker `i` trains on, with any attacked labels.
    pub fn worker_scope(&self, i: usize) -> Scope<'_> {
        let scope = Scope::subset(self.dataset, &self.shards.shards[i]);
        match &self.labels[i] {
            Some(ys) => scope.with_labels(ys),
            None => scope,
        }
    }

    fn full_scope(&self) -> Scope<'a> {
        Scope::full(self.dataset)
    }

    pub fn step(&mut self) -> Result<IterationRecord> {
        match self.config.algorithm {
            Algorithm::Comrade | Algorithm::PlainAverage => self.comrade_step(),
            Algorithm::Giant => self.giant_step(),
            Algorithm::RobustGiant => self.robust_giant_step(),
        }
    }

    fn is_update_attacker(&self, i: usize) -> bool {
        self.byzantine.contains(&i) && self.config.attack.kind.is_update_attack()
    }

    /// Resolves the default Gaussian attack std from the first honest round.
    fn resolve_gaussian_std(&mut self, raw: &[Vec<f64>]) {
        if self.gaussian_std.is_some() {
            return;
        }
        let mut norms: Vec<f64> =
            (0..raw.len()).filter(|i| !self.byzantine.contains(i)).map(|i| linalg::norm(&raw[i])).collect();
        norms.sort_by(f64::total_cmp);
        let median = match norms.len() {
            0 => 0.0,
            n if n % 2 == 1 => norms[n / 2],
            n => 0.5 * (norms[n / 2 - 1] + norms[n / 2]),
        };
        self.gaussian_std = Some(10.0 * median);
    }

    /// Applies update attacks in place on worker messages.
    fn attack_messages(&mut self, messages: &mut [Vec<f64>], round: u64) {
        if !self.config.attack.is_active() || !self.config.attack.kind.is_update_attack() {
            return;
        }
        self.resolve_gaussian_std(messages);
        let std = self.gaussian_std.unwrap_or(0.0);
        let t = self.state.t as u64;
        for (i, msg) in messages.iter_mut().enumerate() {
            if self.is_update_attacker(i) {
                let mut r = rng::stream(self.config.attack.seed, &[tag::UPDATE_ATTACK, i as u64, t, round]);
                *msg = byzantine::corrupt_update(msg, &self.config.attack.kind, std, &mut r);
            }
        }
    }

    fn local_directions(&self, workers: &[usize], g: Option<&[f64]>) -> Result<Vec<Vec<f64>>> {
        let w = &self.state.w;
        let cfg = &self.config;
        exec::map_indexed(workers.len(), |k| {
            let scope = self.worker_scope(workers[k]);
            match g {
                None => solver::local_newton_direction(&scope, w, cfg.lambda, cfg.loss, &cfg.cg),
                Some(g) => {
                    let h = HessianOperator::new(scope, w, cfg.lambda, cfg.loss)?;
                    Ok(solver::conjugate_gradient(&h, g, &cfg.cg)?.x)
                }
            }
        })
        .into_iter()
        .collect()
    }

    /// One-round update: local Newton directions, attacks, compression,
    /// trimming by received norm, step.
    pub fn comrade_step(&mut self) -> Result<IterationRecord> {
        let m = self.config.m;
        let all: Vec<usize> = (0..m).collect();
        let mut messages = self.local_directions(&all, None)?;
        self.attack_messages(&mut messages, 0);

        let spec = self.config.compressor;
        let d = self.dataset.d();
        let t = self.state.t as u64;
        let seed = self.config.seed;
        let reports = messages
            .into_iter()
            .enumerate()
            .map(|(i, msg)| {
                let mut r = rng::stream(seed, &[tag::COMPRESS, i as u64, t]);
                let direction = compression::compress(&spec, &msg, &mut r)?;
                Ok(WorkerReport { worker: i, direction, bits: spec.payload_bits(d) })
            })
            .collect::<Result<Vec<_>>>()?;
        let bits = reports.iter().map(|r| r.bits).sum();
        let agg = trim_by_norm(&reports, self.config.effective_beta())?;
        self.apply(agg, m, bits)
    }

    /// Two-round update without trimming.
    pub fn giant_step(&mut self) -> Result<IterationRecord> {
        self.two_round_step(0.0)
    }

    /// Two-round update, trimming on first-round gradient norms; only kept
    /// workers answer the second round.
    pub fn robust_giant_step(&mut self) -> Result<IterationRecord> {
        self.two_round_step(self.config.beta)
    }

    fn two_round_step(&mut self, beta: f64) -> Result<IterationRecord> {
        let m = self.config.m;
        let d = self.dataset.d();
        let full_bits = CompressorSpec::Identity.payload_bits(d);
        let (w, lambda, loss) = (&self.state.w, self.config.lambda, self.config.loss);
        let mut grads = exec::map_indexed(m, |i| objective::gradient(&self.worker_scope(i), w, lambda, loss))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        self.attack_messages(&mut grads, 0);
        let round1: Vec<WorkerReport> =
            grads.into_iter().enumerate().map(|(i, g)| WorkerReport { worker: i, direction: g, bits: full_bits }).collect();
        let gathered = trim_by_norm(&round1, beta)?;

        let mut answers = self.local_directions(&gathered.kept, Some(&gathered.direction))?;
        // attacks index messages by worker id
        let mut by_worker: Vec<Vec<f64>> = vec![Vec::new(); m];
        for (k, &i) in gathered.kept.iter().enumerate() {
            by_worker[i] = std::mem::take(&mut answers[k]);
        }
        self.attack_messages(&mut by_worker, 1);
        let round2: Vec<WorkerReport> = gathered
            .kept
            .iter()
            .map(|&i| WorkerReport { worker: i, direction: std::mem::take(&mut by_worker[i]), bits: full_bits })
            .collect();
        let mut agg = trim_by_norm(&round2, 0.0)?;
        agg.trimmed = gathered.trimmed;
        let bits = full_bits * (m + round2.len()) as u64;
        let messages = m + round2.len();
        self.apply(agg, messages, bits)
    }

    fn apply(&mut self, agg: Aggregate, messages: usize, bits: u64) -> Result<IterationRecord> {
        linalg::axpy(-self.config.gamma, &agg.direction, &mut self.state.w);
        self.state.t += 1;
        self.bits += bits;
        let full = self.full_scope();
        let w = &self.state.w;
        let cfg = &self.config;
        Ok(IterationRecord {
            t: self.state.t,
            w: w.clone(),
            kept: agg.kept,
            trimmed: agg.trimmed,
            loss: objective::loss_value(&full, w, cfg.lambda, cfg.loss)?,
            accuracy: objective::accuracy(&full, w),
            grad_norm: linalg::norm(&objective::gradient(&full, w, cfg.lambda, cfg.loss)?),
            delta_norm: self.state.w_star.as_ref().map(|ws| linalg::norm(&linalg::sub(w, ws))),
            messages,
            bits,
            bits_cumulative: self.bits,
        })
    }
}

/// Runs `config.iterations` steps from `w₀ = 0`.
pub fn run(config: &RunConfig, dataset: &Dataset, w_star: Option<Vec<f64>>) -> Result<Trace> {
    let mut sim = Simulation::new(dataset, config.clone(), w_star)?;
    let records = (0..config.iterations).map(|_| sim.step()).collect::<Result<Vec<_>>>()?;
    Ok(Trace { records, final_w: sim.state.w })
}

/// Minimizer of the full-data objective, for `‖Δ_t‖` tracking.
pub fn reference_optimum(dataset: &Dataset, lambda: f64, loss: LossKind) -> Result<Vec<f64>> {
    solver::solve_optimum(&Scope::full(dataset), lambda, loss, 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(worker: usize, norm: f64) -> WorkerReport {
        WorkerReport { worker, direction: vec![norm, 0.0], bits: 128 }
    }

    #[test]
    fn trims_largest_norms() {
        let reports: Vec<_> = [5.0, 1.0, 3.0, 2.0, 100.0, 4.0].iter().enumerate().map(|(i, &n)| report(i, n)).collect();
        let agg = trim_by_norm(&reports, 1.0 / 3.0).unwrap();
        assert_eq!(agg.kept, vec![1, 2, 3, 5]);
        assert_eq!(agg.trimmed, vec![0, 4]);
        assert_eq!(agg.direction, vec![(1.0 + 3.0 + 2.0 + 4.0) / 4.0, 0.0]);
    }

    #[test]
    fn beta_zero_is_plain_mean() {
        let reports: Vec<_> = (0..4).map(|i| report(i, i as f64)).collect();
        let agg = trim_by_norm(&reports, 0.0).unwrap();
        assert_eq!(agg.kept.len(), 4);
        assert_eq!(agg.direction[0], 1.5);
    }

    #[test]
    fn nan_report_sorts_last() {
        let mut reports: Vec<_> = (0..5).map(|i| report(i, 1.0 + i as f64)).collect();
        reports[0].direction = vec![f64::NAN, f64::NAN];
        let agg = trim_by_norm(&reports, 0.2).unwrap();
        assert_eq!(agg.trimmed, vec![0]);
        assert!(agg.direction.iter().all(|v| v.is_finite()));

        reports[1].direction[0] = f64::INFINITY;
        assert!(matches!(trim_by_norm(&reports, 0.2), Err(Error::Aggregation(_))));
        assert!(trim_by_norm(&[], 0.1).is_err());
    }

    #[test]
    fn ties_prefer_lower_ids() {
        let reports: Vec<_> = (0..4).map(|i| report(i, 1.0)).collect();
        assert_eq!(trim_by_norm(&reports, 0.25).unwrap().kept, vec![0, 1, 2]);
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        let active = AttackSpec { kind: crate::byzantine::AttackKind::FlippedLabel, alpha: 0.2, seed: 0 };
        assert!(RunConfig { attack: active, beta: 0.1, ..Default::default() }.validate().is_err());
        assert!(RunConfig { attack: active, beta: 0.1, algorithm: Algorithm::PlainAverage, ..Default::default() }.validate().is_ok());
        assert!(RunConfig { gamma: 0.0, ..Default::default() }.validate().is_err());
        assert!(RunConfig { m: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in [Algorithm::Comrade, Algorithm::Giant, Algorithm::RobustGiant, Algorithm::PlainAverage] {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
    }
}
