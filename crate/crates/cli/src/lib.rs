//! Harness around `wtap-core`: dataset generation, training, evaluation
//! against the oracle and GSVD baselines, latency benchmarks and plots.

pub mod app;
pub mod bench;
pub mod error;
pub mod eval;
pub mod plot;

pub use bench::{bench, BenchConfig, Latencies};
pub use error::{CliError, CliResult};
pub use eval::{evaluate, EvalReport, EvalRow};
