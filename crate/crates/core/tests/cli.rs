use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use comrade::data::{generate_synthetic, SyntheticSpec};
use nalgebra::DMatrix;
use tempfile::TempDir;

fn comrade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_comrade")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = "seed = 5\nm = 4\nlambda = 0.01\nsynthetic_n = 400\nsynthetic_d = 5\nsynthetic_noise = 0.3\n";

fn run_csv(dir: &Path, body: &str) -> String {
    let cfg = write_config(dir, "run.cfg", body);
    let out = dir.join("trace.csv");
    let res = comrade(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    fs::read_to_string(out).unwrap()
}

#[test]
fn run_writes_strict_csv() {
    let dir = TempDir::new().unwrap();
    let text = run_csv(dir.path(), &format!("{SMALL}iterations = 3\nalpha = 0.25\nbeta = 0.3\nattack = flipped-label\n"));
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header.join(","), "t,loss,accuracy,grad_norm,delta_norm,bits_cumulative,kept_ids,trimmed_ids");
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0].parse::<usize>().unwrap(), i + 1);
        for k in 1..4 {
            assert!(row[k].parse::<f64>().unwrap().is_finite());
        }
        assert_eq!(&row[4], "");
        assert_eq!(row[5].parse::<u64>().unwrap(), (i as u64 + 1) * 4 * 64 * 5);
        let kept: Vec<usize> = row[6].split(';').map(|s| s.parse().unwrap()).collect();
        let trimmed: Vec<usize> = row[7].split(';').map(|s| s.parse().unwrap()).collect();
        assert_eq!((kept.len(), trimmed.len()), (2, 2));
    }
}

#[test]
fn rerun_is_byte_identical_and_tracks_delta() {
    let dir = TempDir::new().unwrap();
    let body = format!("{SMALL}iterations = 4\ntrack_delta = true\ncompressor = rand-k:2\n");
    let a = run_csv(dir.path(), &body);
    let b = run_csv(dir.path(), &body);
    assert_eq!(a, b);
    let last = a.lines().last().unwrap();
    assert!(last.split(',').nth(4).unwrap().parse::<f64>().unwrap() >= 0.0);
}

#[test]
fn output_key_and_override() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", &format!("{SMALL}iterations = 1\noutput = from_config.csv\n"));
    assert!(comrade(&["run", "--config", cfg.to_str().unwrap()]).status.success());
    assert!(dir.path().join("from_config.csv").exists());
    let over = dir.path().join("over.csv");
    assert!(comrade(&["run", "--config", cfg.to_str().unwrap(), "--out", over.to_str().unwrap()]).status.success());
    assert!(over.exists());
}

fn key_values(text: &str) -> HashMap<String, String> {
    text.lines()
        .map(|l| {
            let (k, v) = l.split_once(" = ").unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn bounds(dir: &Path, body: &str) -> HashMap<String, String> {
    let cfg = write_config(dir, "b.cfg", body);
    let res = comrade(&["bounds", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    key_values(&String::from_utf8(res.stdout).unwrap())
}

#[test]
fn bounds_special_cases() {
    let dir = TempDir::new().unwrap();
    let kv = bounds(dir.path(), &SMALL.replace("lambda = 0.01", "lambda = 0"));
    assert_eq!(kv["nu"], "1.00000000000e0");
    assert_eq!(kv["eps_byz_sq"], "n/a");
    assert_eq!(kv.len(), 18);

    let kv = bounds(dir.path(), &format!("{SMALL}alpha = 0.1\nbeta = 0.3\nattack = flipped-label\n"));
    assert_eq!(kv["eps_comp_byz_sq"], kv["eps_byz_sq"]);
    assert_eq!(kv["zeta_comp_byz_sq"], kv["zeta_byz_sq"]);
}

fn num(kv: &HashMap<String, String>, k: &str) -> f64 {
    kv[k].parse().unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn bounds_match_independent_evaluation() {
    let dir = TempDir::new().unwrap();
    let (eta, delta, m, s, lambda) = (0.4, 0.05, 4usize, 100usize, 0.01);
    let body = format!(
        "seed = 5\nm = {m}\nlambda = {lambda}\nshard_size = {s}\nalpha = 0.1\nbeta = 0.3\nattack = flipped-label\n\
         compressor = top-k:2\neta = {eta}\ndelta = {delta}\nlipschitz = 2.5\nsynthetic_n = 400\nsynthetic_d = 5\n"
    );
    let kv = bounds(dir.path(), &body);

    let (ds, _) = generate_synthetic(&SyntheticSpec::new(400, 5, 5)).unwrap();
    let (n, d) = (ds.n(), ds.d());
    let x = DMatrix::from_fn(n, d, |i, j| ds.row_dense(i)[j]);
    // logistic at w = 0: ℓ'' = 1/4, |ℓ'| = 1/2
    let a = &x * 0.5;
    let h = a.transpose() * &a / n as f64 + DMatrix::identity(d, d) * lambda;
    let eig = h.symmetric_eigen().eigenvalues;
    let (smax, smin) = (eig.max(), eig.min());
    let u = a.clone().svd(true, false).u.unwrap();
    let mu = (0..n).map(|i| u.row(i).norm_squared()).fold(0.0, f64::max) * n as f64 / d as f64;
    let max_b = (0..n).map(|i| x.row(i).norm() * 0.5).fold(0.0, f64::max);

    let nu = (smax - lambda) / smax;
    let kappa = smax / smin;
    let zeta = nu * (eta / (m as f64).sqrt() + eta * eta / (1.0 - eta));
    let eps = (1.0 + (2.0 * (m as f64 / delta).ln()).sqrt()) * max_b / ((1.0 - eta) * smin.sqrt() * (s as f64).sqrt());
    let s_min = (3.0 * mu * d as f64 / (eta * eta) * ((m * d) as f64 / delta).ln()).ceil();
    let (alpha, beta, rho) = (0.1f64, 0.3f64, 2.0 / 5.0);
    let r2 = ((1.0 - alpha) / (1.0 - beta)).powi(2);
    let a2 = (alpha / (1.0 - beta)).powi(2);
    let eps_byz = (3.0 * r2 + 4.0 * kappa * a2) * eps * eps;
    let z1 = (nu / (1.0 - eta)).powi(2);
    let zm = (nu * (eta / ((1.0 - alpha) * m as f64).sqrt() + eta * eta / (1.0 - eta))).powi(2);
    let zeta_byz = 2.0 * r2 * z1 + r2 * zm + 4.0 * kappa * a2 * (2.0 + z1);
    let infl = kappa * (1.0 - rho) * (1.0 + z1);
    let eps_comp = eps_byz * (1.0 + kappa * (1.0 - rho));
    let zeta_comp = 2.0 * r2 * (z1 + infl) + r2 * (zm + infl) + 4.0 * kappa * a2 * (2.0 + z1 + infl);

    let checks = [
        ("sigma_max", smax, 1e-8),
        ("sigma_min", smin, 1e-6),
        ("kappa", kappa, 1e-6),
        ("nu", nu, 1e-8),
        ("mu", mu, 1e-8),
        ("zeta", zeta, 1e-8),
        ("eps", eps, 1e-6),
        ("rho", rho, 1e-11),
        ("eps_byz_sq", eps_byz, 1e-6),
        ("zeta_byz_sq", zeta_byz, 1e-6),
        ("eps_comp_byz_sq", eps_comp, 1e-6),
        ("zeta_comp_byz_sq", zeta_comp, 1e-6),
        ("eta", eta, 1e-11),
        ("delta", delta, 1e-11),
        ("lipschitz", 2.5, 1e-11),
    ];
    for (k, want, tol) in checks {
        assert!(close(num(&kv, k), want, tol), "{k}: printed {} vs oracle {want}", kv[k]);
    }
    assert_eq!(num(&kv, "s_min"), s_min);
    assert_eq!(kv["s"], "100");
    assert_eq!(kv["sample_size_check"], if s as f64 >= s_min { "PASS" } else { "FAIL" });
    for v in kv.values() {
        if let Some((mantissa, _)) = v.split_once('e') {
            assert_eq!(mantissa.replace(['.', '-'], "").len(), 12, "{v}");
        }
    }
}

#[test]
fn validate_reports_each_check() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "v.cfg", &format!("{SMALL}validate_trials = 300\ncompressor = top-k:2\n"));
    let res = comrade(&["validate", "--config", cfg.to_str().unwrap()]);
    let out = String::from_utf8(res.stdout).unwrap();
    assert!(res.status.success(), "{out}\n{}", String::from_utf8_lossy(&res.stderr));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "name, declared, empirical, verdict");
    let identity = lines.iter().find(|l| l.starts_with("compressor(identity)")).unwrap();
    assert_eq!(*identity, "compressor(identity), 0, 0, PASS");
    let topk = lines.iter().find(|l| l.starts_with("compressor(top-k:2)")).unwrap();
    assert!(topk.ends_with(", 0, PASS"));
    assert!(lines.iter().any(|l| l.starts_with("gradient_sketch")));
    assert!(lines.iter().any(|l| l.starts_with("hessian_sketch")));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let p = |c: &PathBuf| c.to_str().unwrap().to_string();

    let bad_key = write_config(dir.path(), "k.cfg", &format!("{SMALL}frobnicate = 1\n"));
    assert_eq!(comrade(&["run", "--config", &p(&bad_key)]).status.code(), Some(1));
    let missing = dir.path().join("nope.cfg");
    assert_eq!(comrade(&["bounds", "--config", &p(&missing)]).status.code(), Some(1));
    let bad_k = write_config(dir.path(), "t.cfg", &format!("{SMALL}compressor = top-k:9\n"));
    assert_eq!(comrade(&["run", "--config", &p(&bad_k)]).status.code(), Some(1));

    let no_data = write_config(dir.path(), "d.cfg", "seed = 1\nm = 2\ndata = absent.svm\n");
    assert_eq!(comrade(&["run", "--config", &p(&no_data)]).status.code(), Some(2));
    fs::write(dir.path().join("broken.svm"), "+1 1:0.5\n-1 0:2\n").unwrap();
    let broken = write_config(dir.path(), "b.cfg", "seed = 1\nm = 2\ndata = broken.svm\n");
    let res = comrade(&["run", "--config", &p(&broken)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));

    let stalls = write_config(dir.path(), "s.cfg", &format!("{SMALL}iterations = 1\ncg_tol = 1e-15\ncg_max_iters = 1\n"));
    assert_eq!(comrade(&["run", "--config", &p(&stalls)]).status.code(), Some(3));

    assert_eq!(comrade(&["run"]).status.code(), Some(1));
    assert_eq!(comrade(&["--help"]).status.code(), Some(0));
}

#[test]
fn libsvm_data_source() {
    let dir = TempDir::new().unwrap();
    let (ds, _) = generate_synthetic(&SyntheticSpec::new(120, 4, 9)).unwrap();
    let mut buf = Vec::new();
    ds.write_libsvm(&mut buf).unwrap();
    fs::write(dir.path().join("train.svm"), buf).unwrap();
    let text = run_csv(dir.path(), "seed = 1\nm = 3\niterations = 2\ndata = train.svm\nlibsvm_dim = 6\n");
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().split(',').nth(5).unwrap() == (3 * 64 * 6).to_string());
}
