//! Multi-start projected gradient ascent on the secrecy rate.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{gsvd_precode, SolverConfig};
use crate::error::{Error, Result};
use crate::secrecy::{project_euclidean, rate_gradient, secrecy_rate, ChannelPair, Covariance};

const MIN_STEP: f64 = 1e-14;
const MAX_STEP: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub cov: Covariance,
    pub rate: f64,
    /// Accepted ascent steps summed over all starts.
    pub iters: usize,
    /// False when the winning start hit `max_iters` before the rate
    /// improvement fell below `tol_rate`.
    pub converged: bool,
}

struct Ascent {
    cov: Covariance,
    rate: f64,
    iters: usize,
    converged: bool,
}

/// Backtracking projected gradient ascent from one feasible start.
///
/// A step is only accepted if it does not lower the rate, so the retained
/// objective sequence is non-decreasing. The step doubles after every
/// accepted move and halves on every rejected one.
fn ascend(
    ch: &ChannelPair,
    start: Covariance,
    cfg: &SolverConfig,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<Ascent> {
    let power = start.power();
    let mut rate = secrecy_rate(ch, &start)?;
    let mut cov = start;
    let mut step = cfg.step_init;
    if let Some(t) = trace.as_deref_mut() {
        t.push(rate);
    }

    for iter in 0..cfg.max_iters {
        let grad = rate_gradient(ch, &cov)?;
        let accepted = loop {
            let raw = cov.matrix() + &grad * step;
            let cand = project_euclidean(&raw, power)?;
            let cand_rate = secrecy_rate(ch, &cand)?;
            if cand_rate >= rate {
                break Some((cand, cand_rate));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((cand, cand_rate)) = accepted else {
            // No ascent direction left at any resolvable step size.
            return Ok(Ascent { cov, rate, iters: iter, converged: true });
        };
        let gain = cand_rate - rate;
        cov = cand;
        rate = cand_rate;
        if let Some(t) = trace.as_deref_mut() {
            t.push(rate);
        }
        if gain < cfg.tol_rate {
            return Ok(Ascent { cov, rate, iters: iter + 1, converged: true });
        }
        step = (step * 2.0).min(MAX_STEP);
    }
    Ok(Ascent {
        cov,
        rate,
        iters: cfg.max_iters,
        converged: false,
    })
}

fn random_start(n_t: usize, power: f64, seed: u64) -> Result<Covariance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n_t, n_t, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let mut q: DMatrix<f64> = &a * a.transpose();
    let scale = power / q.trace();
    q *= scale;
    let q = 0.5 * (&q + q.transpose());
    project_euclidean(&q, power)
}

/// Near-optimal covariance for the wiretap rate under `tr Q <= power`.
///
/// Runs [`ascend`] from three feasible starts (the GSVD precoder, uniform
/// power `(P/n_t) I`, and a random point drawn from `cfg.seed`) and keeps
/// the best. The result is never worse than the GSVD baseline and never
/// below zero.
pub fn solve_covariance_pg(ch: &ChannelPair, power: f64, cfg: &SolverConfig) -> Result<SolveOutcome> {
    solve(ch, power, cfg, None)
}

/// [`solve_covariance_pg`] that also returns the retained objective sequence
/// of each start, in start order.
pub fn solve_covariance_pg_traced(
    ch: &ChannelPair,
    power: f64,
    cfg: &SolverConfig,
) -> Result<(SolveOutcome, Vec<Vec<f64>>)> {
    let mut traces = Vec::new();
    let out = solve(ch, power, cfg, Some(&mut traces))?;
    Ok((out, traces))
}

fn solve(
    ch: &ChannelPair,
    power: f64,
    cfg: &SolverConfig,
    mut traces: Option<&mut Vec<Vec<f64>>>,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::contract(format!("power budget must be positive, got {power}")));
    }
    let n_t = ch.n_t();
    let uniform = Covariance::new(DMatrix::identity(n_t, n_t) * (power / n_t as f64), power)?;
    let starts = [
        gsvd_precode(ch, power, cfg)?.0,
        uniform,
        random_start(n_t, power, cfg.seed)?,
    ];

    let mut best: Option<Ascent> = None;
    let mut total_iters = 0;
    for start in starts {
        let mut trace = Vec::new();
        let run = ascend(ch, start, cfg, traces.is_some().then_some(&mut trace))?;
        if let Some(t) = traces.as_deref_mut() {
            t.push(trace);
        }
        total_iters += run.iters;
        if best.as_ref().is_none_or(|b| run.rate > b.rate) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one start");

    // Q = 0 is always feasible and scores zero.
    if best.rate < 0.0 {
        best.cov = Covariance::zeros(n_t, power)?;
        best.rate = 0.0;
    }
    Ok(SolveOutcome {
        cov: best.cov,
        rate: best.rate,
        iters: total_iters,
        converged: best.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(h: f64, g: f64) -> ChannelPair {
        ChannelPair::from_row_slices(1, 1, 1, &[h], &[g]).unwrap()
    }

    #[test]
    fn scalar_gainful_uses_full_power() {
        let out = solve_covariance_pg(&scalar(2.0, 1.0), 20.0, &SolverConfig::default()).unwrap();
        assert!((out.cov.matrix()[(0, 0)] - 20.0).abs() < 1e-9);
        assert!((out.rate - 0.5 * (81.0f64 / 21.0).log2()).abs() < 1e-9);
    }

    #[test]
    fn scalar_lossy_stays_silent() {
        let out = solve_covariance_pg(&scalar(1.0, 2.0), 20.0, &SolverConfig::default()).unwrap();
        assert_eq!(out.cov.matrix()[(0, 0)], 0.0);
        assert_eq!(out.rate, 0.0);
    }

    #[test]
    fn traced_objective_is_non_decreasing() {
        let h = DMatrix::from_row_slice(2, 3, &[0.3, -1.2, 0.5, 2.0, 0.1, -0.7]);
        let g = DMatrix::from_row_slice(1, 3, &[1.1, 0.4, -0.9]);
        let ch = ChannelPair::new(h, g).unwrap();
        let (out, traces) = solve_covariance_pg_traced(&ch, 20.0, &SolverConfig::default()).unwrap();
        assert_eq!(traces.len(), 3);
        for t in &traces {
            assert!(t.windows(2).all(|w| w[1] >= w[0]));
        }
        let best = traces.iter().flat_map(|t| t.last()).copied().fold(f64::MIN, f64::max);
        assert_eq!(out.rate, best.max(0.0));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SolverConfig { max_iters: 0, ..SolverConfig::default() };
        assert!(solve_covariance_pg(&scalar(2.0, 1.0), 20.0, &cfg).is_err());
        assert!(solve_covariance_pg(&scalar(2.0, 1.0), -1.0, &SolverConfig::default()).is_err());
    }
}
