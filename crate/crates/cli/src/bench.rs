//! Single-threaded per-realization latency of the three precoders.
//!
//! Realizations are processed in batches; the network sees each batch as a
//! single matrix, the classical solvers run once per realization.

use std::io::Write;
use std::time::Instant;

use wtap_core::nn::{Network, Workspace};
use wtap_core::{decode_cov, gsvd_precode, solve_covariance_pg, DatasetRecord, FeatureVector, SolverConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    /// Timed realizations per method; rounded up to whole batches.
    pub realizations: usize,
    pub batch: usize,
    /// Untimed realizations run first for each method.
    pub warmup: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            realizations: 1000,
            batch: 100,
            warmup: 20,
        }
    }
}

/// Median over batches of the mean milliseconds per realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Latencies {
    /// Network inference over each batch in one pass, plus decoding.
    pub dl_ms: f64,
    /// Network inference one realization at a time, plus decoding.
    pub dl_single_ms: f64,
    pub oracle_ms: f64,
    pub gsvd_ms: f64,
}

impl Latencies {
    pub fn oracle_over_dl(&self) -> f64 {
        self.oracle_ms / self.dl_ms
    }

    pub fn dl_over_gsvd(&self) -> f64 {
        self.dl_ms / self.gsvd_ms
    }

    pub fn summary(&self) -> String {
        format!(
            "latency DL         {:.5} ms\nlatency DL single  {:.5} ms\nlatency oracle     {:.5} ms\n\
             latency GSVD       {:.5} ms\noracle / DL        {:.1}\nDL / GSVD          {:.3}\n",
            self.dl_ms,
            self.dl_single_ms,
            self.oracle_ms,
            self.gsvd_ms,
            self.oracle_over_dl(),
            self.dl_over_gsvd()
        )
    }

    pub fn write_csv(&self, w: impl Write) -> CliResult<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["method", "ms_per_realization", "relative_to_dl"])?;
        let methods = [
            ("dl", self.dl_ms),
            ("dl_single", self.dl_single_ms),
            ("oracle", self.oracle_ms),
            ("gsvd", self.gsvd_ms),
        ];
        for (name, ms) in methods {
            out.write_record([name.to_string(), ms.to_string(), (ms / self.dl_ms).to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Times `run` on consecutive batches of records (cycling through the set)
/// and returns the median over batches of the mean milliseconds per
/// realization. One untimed batch of `cfg.warmup` records goes first.
fn time_batches(records: &[DatasetRecord], cfg: &BenchConfig, mut run: impl FnMut(&[&DatasetRecord])) -> f64 {
    let mut cycle = records.iter().cycle();
    let mut take = |n: usize| -> Vec<&DatasetRecord> { cycle.by_ref().take(n).collect() };
    if cfg.warmup > 0 {
        run(&take(cfg.warmup));
    }
    let batches = cfg.realizations.div_ceil(cfg.batch).max(1);
    let means = (0..batches)
        .map(|_| {
            let batch = take(cfg.batch);
            let start = Instant::now();
            run(&batch);
            start.elapsed().as_secs_f64() * 1e3 / cfg.batch as f64
        })
        .collect();
    median(means)
}

fn each(mut f: impl FnMut(&DatasetRecord)) -> impl FnMut(&[&DatasetRecord]) {
    move |batch| batch.iter().for_each(|r| f(r))
}

/// Times (a) network forward plus decoding, (b) the oracle solve and
/// (c) GSVD precoding on the calling thread.
pub fn bench(net: &Network, records: &[DatasetRecord], power: f64, cfg: &BenchConfig) -> CliResult<Latencies> {
    if records.is_empty() {
        return Err(CliError::Usage("benchmark needs at least one record".into()));
    }
    if cfg.batch == 0 {
        return Err(CliError::Usage("benchmark batch must be positive".into()));
    }
    // Validate once so the timed closures can unwrap.
    for r in records {
        decode_cov(&net.predict(&r.features)?, power)?;
    }
    let solver = SolverConfig::default();
    let mut ws = Workspace::default();
    let dl_ms = time_batches(records, cfg, |batch| {
        let feats: Vec<FeatureVector> = batch.iter().map(|r| r.features).collect();
        let qs = net.predict_many(std::hint::black_box(&feats), &mut ws).expect("validated");
        for q in &qs {
            std::hint::black_box(decode_cov(q, power).expect("validated"));
        }
    });
    let dl_single_ms = time_batches(
        records,
        cfg,
        each(|r| {
            let q = net.predict(std::hint::black_box(&r.features)).expect("validated");
            std::hint::black_box(decode_cov(&q, power).expect("validated"));
        }),
    );
    let oracle_ms = time_batches(
        records,
        cfg,
        each(|r| {
            std::hint::black_box(solve_covariance_pg(&r.channels, power, &solver).expect("valid record"));
        }),
    );
    let gsvd_ms = time_batches(
        records,
        cfg,
        each(|r| {
            std::hint::black_box(gsvd_precode(&r.channels, power, &solver).expect("valid record"));
        }),
    );
    Ok(Latencies {
        dl_ms,
        dl_single_ms,
        oracle_ms,
        gsvd_ms,
    })
}
