//! Simulated parameter-server training with one-round, norm-trimmed local
//! Newton directions, plus two-round baselines, attack models, compression
//! operators and the constants of the matching convergence bounds.
//!
//! ```
//! use comrade::{data, protocol};
//!
//! let (ds, _) = data::generate_synthetic(&data::SyntheticSpec::new(400, 5, 1)).unwrap();
//! let cfg = protocol::RunConfig { m: 4, iterations: 3, ..Default::default() };
//! let trace = protocol::run(&cfg, &ds, None).unwrap();
//! assert_eq!(trace.records.len(), 3);
//! ```

pub mod byzantine;
pub mod cli;
pub mod compression;
pub mod config;
pub mod data;
mod error;
pub mod exec;
pub mod linalg;
pub mod objective;
pub mod protocol;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
