//! Datasets, LIBSVM ingestion, synthetic problem generation and worker
//! partitioning.
//!
//! Labels are always stored as `-1.0` / `+1.0`. Files labelled `{0, 1}` (or
//! any other real values) are mapped on ingestion: anything `<= 0` becomes
//! `-1`, everything else `+1`.
//!
//! ```text
//! +1 1:0.5 3:2   # comment
//! 0 2:1
//! ```

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Rows denser than this fraction are stored densely.
const DENSE_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone)]
enum Features {
    /// Row-major `n * d`.
    Dense(Vec<f64>),
    /// CSR with 0-based column indices.
    Sparse {
        indptr: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f64>,
    },
}

/// Feature matrix plus `±1` labels. Immutable once built.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Features,
    labels: Vec<f64>,
    d: usize,
}

impl Dataset {
    /// Builds a dataset from dense rows. Storage switches to sparse when fewer
    /// than a quarter of the entries are nonzero.
    pub fn from_dense(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("ragged feature rows".into()));
        }
        let sparse = rows
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, v)| (k as u32, *v)).collect())
            .collect();
        Self::from_sparse_rows(sparse, labels, d)
    }

    /// Builds a dataset from `(column, value)` rows with 0-based, strictly
    /// increasing columns.
    pub fn from_sparse_rows(rows: Vec<Vec<(u32, f64)>>, labels: Vec<f64>, d: usize) -> Result<Self> {
        let n = rows.len();
        if n == 0 || d == 0 {
            return Err(Error::Dimension(format!("dataset must have n >= 1 and d >= 1 (got n={n}, d={d})")));
        }
        if labels.len() != n {
            return Err(Error::Dimension(format!("{} labels for {n} rows", labels.len())));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::Domain(format!("label {bad} is not in {{-1, +1}}")));
        }
        let nnz: usize = rows.iter().map(Vec::len).sum();
        for row in &rows {
            for (k, &(c, v)) in row.iter().enumerate() {
                if c as usize >= d {
                    return Err(Error::Dimension(format!("column {c} out of range for d={d}")));
                }
                if k > 0 && row[k - 1].0 >= c {
                    return Err(Error::Dimension("row columns must be strictly increasing".into()));
                }
                if !v.is_finite() {
                    return Err(Error::Domain(format!("non-finite feature value {v}")));
                }
            }
        }
        let density = nnz as f64 / (n as f64 * d as f64);
        let features = if density < DENSE_THRESHOLD {
            let mut indptr = Vec::with_capacity(n + 1);
            let mut indices = Vec::with_capacity(nnz);
            let mut values = Vec::with_capacity(nnz);
            indptr.push(0);
            for row in rows {
                for (c, v) in row {
                    indices.push(c);
                    values.push(v);
                }
                indptr.push(indices.len());
            }
            Features::Sparse { indptr, indices, values }
        } else {
            let mut dense = vec![0.0; n * d];
            for (j, row) in rows.into_iter().enumerate() {
                for (c, v) in row {
                    dense[j * d + c as usize] = v;
                }
            }
            Features::Dense(dense)
        };
        Ok(Self { features, labels, d })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.features, Features::Sparse { .. })
    }

    /// `x_jᵀ w`
    #[inline]
    pub fn row_dot(&self, j: usize, w: &[f64]) -> f64 {
        match &self.features {
            Features::Dense(v) => crate::linalg::dot(&v[j * self.d..(j + 1) * self.d], w),
            Features::Sparse { indptr, indices, values } => {
                let (lo, hi) = (indptr[j], indptr[j + 1]);
                indices[lo..hi].iter().zip(&values[lo..hi]).map(|(&c, &v)| v * w[c as usize]).sum()
            }
        }
    }

    /// `out += a * x_j`
    #[inline]
    pub fn row_axpy(&self, j: usize, a: f64, out: &mut [f64]) {
        match &self.features {
            Features::Dense(v) => crate::linalg::axpy(a, &v[j * self.d..(j + 1) * self.d], out),
            Features::Sparse { indptr, indices, values } => {
                let (lo, hi) = (indptr[j], indptr[j + 1]);
                for (&c, &v) in indices[lo..hi].iter().zip(&values[lo..hi]) {
                    out[c as usize] += a * v;
                }
            }
        }
    }

    pub fn row_norm_sq(&self, j: usize) -> f64 {
        let mut s = 0.0;
        self.for_each_nonzero(j, |_, v| s += v * v);
        s
    }

    pub fn row_dense(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.row_axpy(j, 1.0, &mut out);
        out
    }

    fn for_each_nonzero(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        match &self.features {
            Features::Dense(v) => {
                for (c, &x) in v[j * self.d..(j + 1) * self.d].iter().enumerate() {
                    if x != 0.0 {
                        f(c, x);
                    }
                }
            }
            Features::Sparse { indptr, indices, values } => {
                for k in indptr[j]..indptr[j + 1] {
                    f(indices[k] as usize, values[k]);
                }
            }
        }
    }

    /// Writes the dataset in LIBSVM text form. Values use the shortest
    /// round-trip representation, so parsing the output reproduces the data.
    pub fn write_libsvm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for j in 0..self.n() {
            let mut line = String::from(if self.labels[j] > 0.0 { "+1" } else { "-1" });
            self.for_each_nonzero(j, |c, v| {
                line.push_str(&format!(" {}:{}", c + 1, v));
            });
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
            && self.labels == other.labels
            && (0..self.n()).all(|j| self.row_dense(j) == other.row_dense(j))
    }
}

/// Parses LIBSVM text. `dims` forces the feature dimension; without it the
/// largest index seen is used.
pub fn parse_libsvm<R: BufRead>(reader: R, dims: Option<usize>) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_idx = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut tokens = body.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("label {label_tok:?} is not a number"),
        })?;
        if !label.is_finite() {
            return Err(Error::Parse { line: lineno, msg: format!("label {label_tok:?} is not finite") });
        }

        let mut row: Vec<(u32, f64)> = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("feature {tok:?} is missing ':'"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("feature index {idx:?} is not a positive integer"),
            })?;
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("feature value {val:?} is not a number"),
            })?;
            if idx <= prev {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("feature index {idx} is not strictly increasing (1-based)"),
                });
            }
            if !val.is_finite() {
                return Err(Error::Parse { line: lineno, msg: format!("feature value {val} is not finite") });
            }
            prev = idx;
            if val != 0.0 {
                row.push(((idx - 1) as u32, val));
            }
        }
        max_idx = max_idx.max(prev);
        labels.push(if label <= 0.0 { -1.0 } else { 1.0 });
        rows.push(row);
    }

    let d = match dims {
        Some(d) if d < max_idx => {
            return Err(Error::Dimension(format!("forced dimension {d} is smaller than max index {max_idx}")))
        }
        Some(d) => d,
        None => max_idx,
    };
    Dataset::from_sparse_rows(rows, labels, d)
}

pub fn parse_libsvm_str(text: &str, dims: Option<usize>) -> Result<Dataset> {
    parse_libsvm(text.as_bytes(), dims)
}

/// Parameters of a synthetic linear classification problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Every sample is pushed at least this far from the planted hyperplane.
    pub margin: f64,
    /// Std of the Gaussian noise added to `xᵀw` before taking the sign.
    pub noise_std: f64,
    pub planted_w: Option<Vec<f64>>,
}

impl SyntheticSpec {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        Self { n, d, seed, margin: 0.5, noise_std: 0.0, planted_w: None }
    }
}

/// Gaussian features, labels `sign(xᵀw + noise)`. A pure function of `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Vec<f64>)> {
    let SyntheticSpec { n, d, seed, margin, noise_std, .. } = *spec;
    if d == 0 || n < d {
        return Err(Error::Domain(format!("synthetic spec requires n >= d >= 1 (n={n}, d={d})")));
    }
    if !(margin >= 0.0 && noise_std >= 0.0) {
        return Err(Error::Domain("margin and noise std must be >= 0".into()));
    }
    let mut rng = rng::stream(seed, &[tag::SYNTHETIC]);

    let planted = match &spec.planted_w {
        Some(w) if w.len() != d => return Err(Error::Dimension(format!("planted w has length {}, expected {d}", w.len()))),
        Some(w) => w.clone(),
        None => loop {
            let w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let nrm = crate::linalg::norm(&w);
            if nrm > 0.0 {
                break w.into_iter().map(|x| x / nrm).collect();
            }
        },
    };
    let w_norm_sq = crate::linalg::dot(&planted, &planted);

    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut z = crate::linalg::dot(&x, &planted);
        if margin > 0.0 && w_norm_sq > 0.0 {
            // shift along w so that |xᵀw| grows by `margin`
            let dir = if z >= 0.0 { 1.0 } else { -1.0 };
            crate::linalg::axpy(dir * margin / w_norm_sq, &planted, &mut x);
            z += dir * margin;
        }
        let noise: f64 = if noise_std > 0.0 { noise_std * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
        labels.push(if z + noise >= 0.0 { 1.0 } else { -1.0 });
        rows.push(x);
    }
    Ok((Dataset::from_dense(rows, labels)?, planted))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMode {
    Disjoint,
    WithReplacement,
}

impl std::str::FromStr for PartitionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disjoint" => Ok(Self::Disjoint),
            "with-replacement" => Ok(Self::WithReplacement),
            _ => Err(Error::Config(format!("unknown partition mode {s:?}"))),
        }
    }
}

impl std::fmt::Display for PartitionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Disjoint => "disjoint",
            Self::WithReplacement => "with-replacement",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardAssignment {
    pub shards: Vec<Vec<usize>>,
    pub mode: PartitionMode,
    pub s: usize,
}

impl ShardAssignment {
    pub fn m(&self) -> usize {
        self.shards.len()
    }
}

/// Splits sample indices across `m` workers. `s` defaults to `⌊n/m⌋`;
/// leftover samples are dropped in disjoint mode.
pub fn partition(dataset: &Dataset, m: usize, mode: PartitionMode, s: Option<usize>, seed: u64) -> Result<ShardAssignment> {
    let n = dataset.n();
    if m == 0 {
        return Err(Error::Domain("m must be >= 1".into()));
    }
    let s = s.unwrap_or(n / m);
    if s == 0 {
        return Err(Error::Capacity(format!("shard size is 0 (n={n}, m={m})")));
    }
    let mut rng = rng::stream(seed, &[tag::PARTITION]);
    let shards = match mode {
        PartitionMode::Disjoint => {
            if m * s > n {
                return Err(Error::Capacity(format!("m*s = {} exceeds n = {n}", m * s)));
            }
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            perm[..m * s].chunks(s).map(<[usize]>::to_vec).collect()
        }
        PartitionMode::WithReplacement => {
            (0..m).map(|_| (0..s).map(|_| rng.random_range(0..n)).collect()).collect()
        }
    };
    Ok(ShardAssignment { shards, mode, s })
}
