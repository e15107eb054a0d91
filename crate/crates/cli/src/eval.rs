//! Per-record comparison of the network against the oracle and GSVD.

use std::io::{Read, Write};

use rayon::prelude::*;
use wtap_core::features::{COV_LEN, COV_NAMES};
use wtap_core::{
    decode_cov, gsvd_precode, secrecy_rate, CovVector, DatasetRecord, FeatureVector, SolverConfig,
};

use crate::bench::Latencies;
use crate::error::{CliError, CliResult};

/// DL mean rates this far above the oracle mean indicate a labelling or
/// evaluation bug rather than noise.
pub const SANITY_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub index: usize,
    pub dl_rate: f64,
    pub oracle_rate: f64,
    pub gsvd_rate: f64,
    /// Raw network output, before projection.
    pub estimate: CovVector,
    pub label: CovVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Per-element MSE of the raw output against the label, in codec order.
    pub mse: [f64; COV_LEN],
    pub mean_rate_dl: f64,
    pub mean_rate_oracle: f64,
    pub mean_rate_gsvd: f64,
    pub latency: Option<Latencies>,
    pub samples: usize,
    /// Free-form `(key, value)` echo of the run configuration.
    pub config: Vec<(String, String)>,
}

impl EvalReport {
    pub fn rate_ratio(&self) -> f64 {
        self.mean_rate_dl / self.mean_rate_oracle
    }

    pub fn max_mse(&self) -> f64 {
        self.mse.iter().copied().fold(0.0, f64::max)
    }

    pub fn sanity_alarm(&self) -> bool {
        self.mean_rate_dl > self.mean_rate_oracle + SANITY_MARGIN
    }

    /// Two-column `metric,value` table.
    pub fn write_csv(&self, w: impl Write) -> CliResult<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "value"])?;
        for (name, m) in COV_NAMES.iter().zip(&self.mse) {
            out.write_record([format!("mse_{name}"), m.to_string()])?;
        }
        out.write_record(["rate_dl".to_string(), self.mean_rate_dl.to_string()])?;
        out.write_record(["rate_oracle".to_string(), self.mean_rate_oracle.to_string()])?;
        out.write_record(["rate_gsvd".to_string(), self.mean_rate_gsvd.to_string()])?;
        if let Some(l) = &self.latency {
            out.write_record(["latency_dl_ms".to_string(), l.dl_ms.to_string()])?;
            out.write_record(["latency_oracle_ms".to_string(), l.oracle_ms.to_string()])?;
            out.write_record(["latency_gsvd_ms".to_string(), l.gsvd_ms.to_string()])?;
        }
        out.write_record(["samples".to_string(), self.samples.to_string()])?;
        for (k, v) in &self.config {
            out.write_record([k.as_str(), v.as_str()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("samples            {}\n", self.samples));
        for (name, m) in COV_NAMES.iter().zip(&self.mse) {
            s.push_str(&format!("mse {name}            {m:.6}\n"));
        }
        s.push_str(&format!("mean rate DL       {:.4}\n", self.mean_rate_dl));
        s.push_str(&format!("mean rate oracle   {:.4}\n", self.mean_rate_oracle));
        s.push_str(&format!("mean rate GSVD     {:.4}\n", self.mean_rate_gsvd));
        s.push_str(&format!("DL / oracle        {:.4}\n", self.rate_ratio()));
        if let Some(l) = &self.latency {
            s.push_str(&l.summary());
        }
        s
    }
}

/// Evaluates `predict` on every record. MSE uses the raw prediction; rates
/// use the projected covariance. The oracle rate is the stored label rate and
/// the GSVD rate is recomputed.
pub fn evaluate<F>(records: &[DatasetRecord], power: f64, predict: F) -> CliResult<(EvalReport, Vec<EvalRow>)>
where
    F: Fn(&FeatureVector) -> wtap_core::Result<CovVector> + Sync,
{
    if records.is_empty() {
        return Err(CliError::Usage("test set is empty".into()));
    }
    let cfg = SolverConfig::default();
    let rows = records
        .par_iter()
        .enumerate()
        .map(|(index, r)| -> wtap_core::Result<EvalRow> {
            let estimate = predict(&r.features)?;
            let cov = decode_cov(&estimate, power)?;
            let (_, gsvd_rate) = gsvd_precode(&r.channels, power, &cfg)?;
            Ok(EvalRow {
                index,
                dl_rate: secrecy_rate(&r.channels, &cov)?,
                oracle_rate: r.rate,
                gsvd_rate,
                estimate,
                label: r.label,
            })
        })
        .collect::<wtap_core::Result<Vec<_>>>()?;

    // Sequential reductions keep the report independent of scheduling.
    let n = rows.len() as f64;
    let mut mse = [0.0; COV_LEN];
    let (mut dl, mut oracle, mut gsvd) = (0.0, 0.0, 0.0);
    for row in &rows {
        for (m, (e, l)) in mse.iter_mut().zip(row.estimate.0.iter().zip(&row.label.0)) {
            *m += (e - l) * (e - l);
        }
        dl += row.dl_rate;
        oracle += row.oracle_rate;
        gsvd += row.gsvd_rate;
    }
    mse.iter_mut().for_each(|m| *m /= n);
    let report = EvalReport {
        mse,
        mean_rate_dl: dl / n,
        mean_rate_oracle: oracle / n,
        mean_rate_gsvd: gsvd / n,
        latency: None,
        samples: rows.len(),
        config: Vec::new(),
    };
    if report.sanity_alarm() {
        log::warn!(
            "DL mean rate {:.4} exceeds the oracle mean {:.4} by more than {SANITY_MARGIN} bits",
            report.mean_rate_dl,
            report.mean_rate_oracle
        );
    }
    Ok((report, rows))
}

fn row_header() -> Vec<String> {
    let mut h: Vec<String> = ["index", "dl_rate", "oracle_rate", "gsvd_rate"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(COV_NAMES.iter().map(|n| format!("{n}_est")));
    h.extend(COV_NAMES.iter().map(|n| format!("{n}_label")));
    h
}

pub fn write_rows(rows: &[EvalRow], w: impl Write) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(row_header())?;
    for r in rows {
        let mut rec = vec![
            r.index.to_string(),
            r.dl_rate.to_string(),
            r.oracle_rate.to_string(),
            r.gsvd_rate.to_string(),
        ];
        rec.extend(r.estimate.0.iter().map(f64::to_string));
        rec.extend(r.label.0.iter().map(f64::to_string));
        out.write_record(rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows(r: impl Read) -> CliResult<Vec<EvalRow>> {
    let mut reader = csv::Reader::from_reader(r);
    let expected = row_header();
    if reader.headers()?.iter().ne(expected.iter().map(String::as_str)) {
        return Err(CliError::Usage("not a per-record evaluation CSV (unexpected header)".into()));
    }
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| CliError::Usage(format!("record {}: malformed {what}", line + 1));
        let num = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad("number"));
        let vec6 = |start: usize| -> CliResult<CovVector> {
            let mut q = [0.0; COV_LEN];
            for (k, slot) in q.iter_mut().enumerate() {
                *slot = num(start + k)?;
            }
            Ok(CovVector(q))
        };
        rows.push(EvalRow {
            index: rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("index"))?,
            dl_rate: num(1)?,
            oracle_rate: num(2)?,
            gsvd_rate: num(3)?,
            estimate: vec6(4)?,
            label: vec6(4 + COV_LEN)?,
        });
    }
    Ok(rows)
}
