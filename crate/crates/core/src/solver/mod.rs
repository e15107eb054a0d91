//! Classical covariance solvers used as training labels and baselines.

mod gsvd;
mod pg;

pub use gsvd::{gsvd, gsvd_precode, gsvd_subchannels, secrecy_waterfill, Gsvd, SubchannelGains};
pub use pg::{solve_covariance_pg, solve_covariance_pg_traced, SolveOutcome};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub step_init: f64,
    /// Stop once an accepted step improves the rate by less than this (bits).
    pub tol_rate: f64,
    /// Water-filling bisection tolerance on total power.
    pub tol_power: f64,
    /// Seeds the random feasible start.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            step_init: 1.0,
            tol_rate: 1e-7,
            tol_power: 1e-8,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::contract("max_iters must be at least 1"));
        }
        for (name, v) in [
            ("step_init", self.step_init),
            ("tol_rate", self.tol_rate),
            ("tol_power", self.tol_power),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::contract(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}
