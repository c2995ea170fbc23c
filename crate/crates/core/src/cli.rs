//! Command implementations behind the `comrade` binary: `run`, `bounds` and
//! `validate`. Everything here works on strings and paths so the binary
//! only parses arguments and maps [`CliError`] to an exit code.

use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use crate::compression::{self, CompressorSpec};
use crate::config::{DataSource, ExperimentConfig};
use crate::data::{self, Dataset};
use crate::error::Error;
use crate::objective::{self, scaled_matrices, Scope};
use crate::protocol::{self, IterationRecord};
use crate::solver::{self, BoundReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config = 1,
    Data = 2,
    Runtime = 3,
    Validation = 4,
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    fn new(kind: ExitKind, err: impl std::fmt::Display) -> Self {
        Self { kind, message: err.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn runtime(e: Error) -> CliError {
    match e {
        Error::Config(_) | Error::Compressor(_) | Error::Capacity(_) => CliError::new(ExitKind::Config, e),
        _ => CliError::new(ExitKind::Runtime, e),
    }
}

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::new(ExitKind::Config, format!("{}: {e}", path.display())))?;
    ExperimentConfig::parse(&text).map_err(|e| CliError::new(ExitKind::Config, format!("{}: {e}", path.display())))
}

/// Loads the configured data. Relative paths resolve against `base`, the
/// directory of the config file.
pub fn load_dataset(cfg: &ExperimentConfig, base: &Path) -> CliResult<Dataset> {
    match &cfg.data {
        DataSource::Libsvm { path, dims } => {
            let full = if path.is_relative() { base.join(path) } else { path.clone() };
            let file = fs::File::open(&full).map_err(|e| CliError::new(ExitKind::Data, format!("{}: {e}", full.display())))?;
            data::parse_libsvm(BufReader::new(file), *dims)
                .map_err(|e| CliError::new(ExitKind::Data, format!("{}: {e}", full.display())))
        }
        DataSource::Synthetic(spec) => data::generate_synthetic(spec).map(|(ds, _)| ds).map_err(|e| CliError::new(ExitKind::Data, e)),
    }
}

fn join_ids(ids: &[usize]) -> String {
    ids.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

pub const CSV_HEADER: &str = "t,loss,accuracy,grad_norm,delta_norm,bits_cumulative,kept_ids,trimmed_ids";

/// One header line plus one row per iteration.
pub fn trace_csv(records: &[IterationRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let delta = r.delta_norm.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.t,
            r.loss,
            r.accuracy,
            r.grad_norm,
            delta,
            r.bits_cumulative,
            join_ids(&r.kept),
            join_ids(&r.trimmed)
        );
    }
    out
}

/// Every bound constant for `cfg` evaluated on `dataset` at `w₀ = 0`.
pub fn bound_report(cfg: &ExperimentConfig, dataset: &Dataset) -> crate::Result<BoundReport> {
    let run = &cfg.run;
    let (n, d) = (dataset.n(), dataset.d());
    let w0 = vec![0.0; d];
    let full = Scope::full(dataset);
    let h = objective::hessian(&full, &w0, run.lambda, run.loss)?;
    let spec = solver::spectral_extremes(&h, 2000);
    let scaled = scaled_matrices(&full, &w0, run.loss)?;
    let sigma_ata = (n as f64 * (spec.max - run.lambda)).max(0.0);
    let nu = solver::nu(sigma_ata, n, run.lambda)?;
    let mu = solver::coherence(&scaled.a_matrix())?;
    let kappa = spec.condition_number();
    let s = run.shard_size.unwrap_or(n / run.m).max(1);
    let eps = solver::epsilon_floor(cfg.eta, spec.min, run.m, cfg.delta, s, scaled.max_b_norm())?;
    let zeta = solver::zeta(nu, cfg.eta, run.m as f64)?;
    let rho = compression::rho_of(&run.compressor, d, None);
    let (alpha, beta) = (run.alpha(), run.beta);
    let valid = alpha >= 0.0 && alpha < beta && beta < 0.5;
    let byzantine = valid
        .then(|| solver::byzantine_constants(alpha, beta, kappa, eps, nu, cfg.eta, run.m))
        .transpose()?;
    let compressed = valid
        .then(|| solver::compressed_constants(alpha, beta, kappa, eps, nu, cfg.eta, run.m, rho))
        .transpose()?;
    Ok(BoundReport {
        eta: cfg.eta,
        delta: cfg.delta,
        mu,
        nu,
        kappa,
        sigma_max: spec.max,
        sigma_min: spec.min,
        zeta,
        eps,
        rho,
        byzantine,
        compressed,
        s,
        s_min: solver::sample_size_bound(mu, d, run.m, cfg.eta, cfg.delta)?,
        lipschitz: cfg.lipschitz,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationLine {
    pub name: String,
    pub declared: f64,
    pub empirical: f64,
    /// `None` when the check was skipped.
    pub pass: Option<bool>,
}

impl ValidationLine {
    pub fn render(&self) -> String {
        let verdict = match self.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        format!("{}, {}, {}, {}", self.name, self.declared, self.empirical, verdict)
    }
}

/// Gradient and Hessian sketch checks at `w₀ = 0` plus the contract check of
/// the configured compressor and of identity.
pub fn validation_suite(cfg: &ExperimentConfig, dataset: &Dataset) -> crate::Result<Vec<ValidationLine>> {
    let run = &cfg.run;
    let (n, d) = (dataset.n(), dataset.d());
    let w0 = vec![0.0; d];
    let full = Scope::full(dataset);
    let s = run.shard_size.unwrap_or(n / run.m).max(1);
    let trials = cfg.validate_trials;
    let mut lines = Vec::new();

    let g = solver::validate_gradient_sketch(&full, &w0, run.loss, s, 1, cfg.delta, trials, run.seed)?;
    lines.push(ValidationLine {
        name: "gradient_sketch".into(),
        declared: g.declared,
        empirical: g.rate(),
        pass: Some(g.passes()),
    });

    let a = scaled_matrices(&full, &w0, run.loss)?.a_matrix();
    let mu = solver::coherence(&a)?;
    let s_min = solver::sample_size_bound(mu, d, run.m, cfg.eta, cfg.delta)?;
    let s_hess = (s as u64).max(s_min);
    if s_hess <= n as u64 {
        let h = solver::validate_hessian_sketch(&a, s_hess as usize, run.m, cfg.eta, cfg.delta, trials, run.seed)?;
        lines.push(ValidationLine {
            name: format!("hessian_sketch(s={s_hess})"),
            declared: h.declared,
            empirical: h.rate(),
            pass: Some(h.passes()),
        });
    } else {
        lines.push(ValidationLine { name: format!("hessian_sketch(s_min={s_min}>n)"), declared: cfg.delta, empirical: f64::NAN, pass: None });
    }

    let mut specs = vec![CompressorSpec::Identity];
    if run.compressor != CompressorSpec::Identity {
        specs.push(run.compressor);
    }
    for spec in specs {
        let c = compression::check_contract(&spec, d, trials.max(1), run.seed)?;
        lines.push(ValidationLine {
            name: format!("compressor({spec})"),
            declared: c.declared,
            empirical: c.empirical,
            pass: Some(c.passes()),
        });
    }
    Ok(lines)
}

fn write_output(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::new(ExitKind::Runtime, format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn config_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

fn prepare(config: &Path) -> CliResult<(ExperimentConfig, Dataset)> {
    let cfg = load_config(config)?;
    let ds = load_dataset(&cfg, &config_dir(config))?;
    cfg.run.compressor.validate(ds.d()).map_err(|e| CliError::new(ExitKind::Config, e))?;
    Ok((cfg, ds))
}

/// Runs the configured algorithm and writes the trace CSV to `out`, the
/// config's `output` (relative to the config file), or stdout.
pub fn cmd_run(config: &Path, out: Option<&Path>) -> CliResult<()> {
    let (cfg, ds) = prepare(config)?;
    let w_star = if cfg.track_delta {
        Some(protocol::reference_optimum(&ds, cfg.run.lambda, cfg.run.loss).map_err(runtime)?)
    } else {
        None
    };
    let trace = protocol::run(&cfg.run, &ds, w_star).map_err(runtime)?;
    let target = out.map(Path::to_path_buf).or_else(|| cfg.output.as_ref().map(|p| config_dir(config).join(p)));
    write_output(&trace_csv(&trace.records), target.as_deref())
}

/// Writes the bound report as `key = value` lines.
pub fn cmd_bounds(config: &Path, out: Option<&Path>) -> CliResult<()> {
    let (cfg, ds) = prepare(config)?;
    let report = bound_report(&cfg, &ds).map_err(runtime)?;
    write_output(&report.to_key_value(), out)
}

/// Prints `name, declared, empirical, verdict` per check; fails with
/// [`ExitKind::Validation`] if any check fails.
pub fn cmd_validate(config: &Path, out: Option<&Path>) -> CliResult<()> {
    let (cfg, ds) = prepare(config)?;
    let lines = validation_suite(&cfg, &ds).map_err(runtime)?;
    let mut text = String::from("name, declared, empirical, verdict\n");
    for l in &lines {
        text.push_str(&l.render());
        text.push('\n');
    }
    write_output(&text, out)?;
    let failed: Vec<&str> = lines.iter().filter(|l| l.pass == Some(false)).map(|l| l.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(ExitKind::Validation, format!("failed checks: {}", failed.join(", "))))
    }
}
