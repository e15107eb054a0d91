//! Oracle-labelled training and test sets.
//!
//! A dataset file is little-endian binary: magic `WTDS`, version `u32`,
//! then the header (`sample_count u64`, `n_t u32`, `n_r u32`, `n_e u32`,
//! `power f64`, `seed u64`), then one record per sample: `H` and `G`
//! row-major, the 72 features, the 6 label entries, the oracle rate (all
//! `f64`) and a flag byte. Files that mix antenna settings store
//! `n_r = n_e = 0` in the header and prefix every record with its own
//! `n_r u32`, `n_e u32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::binio::{put_f64s, put_u32, put_u64, Reader};
use crate::error::{Error, Result};
use crate::features::{encode_cov, encode_features, CovVector, FeatureVector, COV_LEN, COV_NAMES, FEATURE_LEN, NT};
use crate::nn::TrainingSet;
use crate::secrecy::{secrecy_rate, ChannelPair};
use crate::solver::{solve_covariance_pg, SolverConfig};

pub const MAGIC: [u8; 4] = *b"WTDS";
pub const VERSION: u32 = 1;

/// Header value of `n_r` and `n_e` for files mixing antenna settings.
pub const MIXED: u32 = 0;

const FLAG_NOT_CONVERGED: u8 = 1;
/// Guards allocations driven by untrusted header fields.
const MAX_ANTENNAS: u32 = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetHeader {
    pub sample_count: u64,
    pub n_t: u32,
    /// [`MIXED`] when records carry their own receiver dimensions.
    pub n_r: u32,
    pub n_e: u32,
    pub power: f64,
    pub seed: u64,
}

impl DatasetHeader {
    pub fn is_mixed(&self) -> bool {
        self.n_r == MIXED || self.n_e == MIXED
    }

    fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::contract("a dataset needs at least one sample"));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::contract(format!("power must be positive, got {}", self.power)));
        }
        if self.n_t as usize != NT {
            return Err(Error::shape(format!("datasets use {NT} transmit antennas, got {}", self.n_t)));
        }
        if (self.n_r == MIXED) != (self.n_e == MIXED) {
            return Err(Error::contract("n_r and n_e must both be set or both be the mixed sentinel"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub channels: ChannelPair,
    pub features: FeatureVector,
    /// Oracle covariance, upper triangle.
    pub label: CovVector,
    /// Secrecy rate of the decoded label.
    pub rate: f64,
    pub converged: bool,
}

impl DatasetRecord {
    /// Draws one standard Gaussian channel pair and labels it with the
    /// oracle solver.
    fn generate(n_r: usize, n_e: usize, power: f64, seed: u64, index: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let h = draw(n_r * NT);
        let g = draw(n_e * NT);
        let channels = ChannelPair::from_row_slices(NT, n_r, n_e, &h, &g)?;
        let cfg = SolverConfig {
            seed: rng.next_u64(),
            ..SolverConfig::default()
        };
        let outcome = solve_covariance_pg(&channels, power, &cfg)?;
        Ok(Self {
            features: encode_features(&channels)?,
            label: encode_cov(&outcome.cov)?,
            rate: secrecy_rate(&channels, &outcome.cov)?,
            converged: outcome.converged,
            channels,
        })
    }

    fn write(&self, w: &mut impl Write, mixed: bool) -> Result<()> {
        if mixed {
            put_u32(w, self.channels.n_r() as u32)?;
            put_u32(w, self.channels.n_e() as u32)?;
        }
        put_f64s(w, &row_major(self.channels.h()))?;
        put_f64s(w, &row_major(self.channels.g()))?;
        put_f64s(w, &self.features.0)?;
        put_f64s(w, &self.label.0)?;
        put_f64s(w, &[self.rate])?;
        let flags = if self.converged { 0 } else { FLAG_NOT_CONVERGED };
        w.write_all(&[flags])?;
        Ok(())
    }
}

fn row_major(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// A dataset held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        if self.header.sample_count != self.records.len() as u64 {
            return Err(Error::contract(format!(
                "header announces {} samples but {} are present",
                self.header.sample_count,
                self.records.len()
            )));
        }
        self.header.validate()?;
        let h = &self.header;
        w.write_all(&MAGIC)?;
        put_u32(w, VERSION)?;
        put_u64(w, h.sample_count)?;
        put_u32(w, h.n_t)?;
        put_u32(w, h.n_r)?;
        put_u32(w, h.n_e)?;
        put_f64s(w, &[h.power])?;
        put_u64(w, h.seed)?;
        for rec in &self.records {
            if !h.is_mixed() && (rec.channels.n_r() != h.n_r as usize || rec.channels.n_e() != h.n_e as usize) {
                return Err(Error::shape("record antenna setting disagrees with the header"));
            }
            rec.write(w, h.is_mixed())?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Features and labels as a row-major [`TrainingSet`].
    pub fn training_set(&self) -> Result<TrainingSet> {
        let inputs = self.records.iter().flat_map(|r| r.features.0).collect();
        let targets = self.records.iter().flat_map(|r| r.label.0).collect();
        TrainingSet::new(inputs, targets, FEATURE_LEN, COV_LEN)
    }

    /// One line per record with a header row. `H` and `G` are written as
    /// space-separated row-major entries in a single field each.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["n_r", "n_e", "h", "g"].iter().map(|s| s.to_string()).collect();
        header.extend((0..FEATURE_LEN).map(|i| format!("v{i}")));
        header.extend(COV_NAMES.iter().map(|s| s.to_string()));
        header.extend(["rate".to_string(), "converged".to_string()]);
        out.write_record(&header)?;
        let join = |xs: Vec<f64>| xs.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        for r in &self.records {
            let mut row = vec![
                r.channels.n_r().to_string(),
                r.channels.n_e().to_string(),
                join(row_major(r.channels.h())),
                join(row_major(r.channels.g())),
            ];
            row.extend(r.features.0.iter().map(f64::to_string));
            row.extend(r.label.0.iter().map(f64::to_string));
            row.push(r.rate.to_string());
            row.push(u8::from(r.converged).to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Generates `count` labelled samples for one antenna setting. Sample `i`
/// draws from its own generator stream `(seed, i)`, so the result does not
/// depend on the number of worker threads.
pub fn generate_set(n_t: usize, n_r: usize, n_e: usize, count: usize, power: f64, seed: u64) -> Result<Dataset> {
    if n_r == 0 || n_e == 0 || n_r > MAX_ANTENNAS as usize || n_e > MAX_ANTENNAS as usize {
        return Err(Error::shape(format!("unsupported antenna setting ({n_t}, {n_r}, {n_e})")));
    }
    let header = DatasetHeader {
        sample_count: count as u64,
        n_t: n_t as u32,
        n_r: n_r as u32,
        n_e: n_e as u32,
        power,
        seed,
    };
    header.validate()?;
    let records = (0..count as u64)
        .into_par_iter()
        .map(|i| DatasetRecord::generate(n_r, n_e, power, seed, i))
        .collect::<Result<Vec<_>>>()?;
    let unconverged = records.iter().filter(|r| !r.converged).count();
    if unconverged > 0 {
        log::warn!("{unconverged} of {count} oracle solves hit the iteration cap");
    }
    Ok(Dataset { header, records })
}

/// Concatenates two sets and shuffles the result with `seed`. The output
/// header is marked mixed unless both inputs share one antenna setting.
pub fn cascade_sets(a: Dataset, b: Dataset, seed: u64) -> Result<Dataset> {
    if a.header.n_t != b.header.n_t {
        return Err(Error::contract(format!(
            "cannot cascade sets with {} and {} transmit antennas",
            a.header.n_t, b.header.n_t
        )));
    }
    if a.header.power != b.header.power {
        return Err(Error::contract(format!(
            "cannot cascade sets with power {} and {}",
            a.header.power, b.header.power
        )));
    }
    let same = !a.header.is_mixed() && a.header.n_r == b.header.n_r && a.header.n_e == b.header.n_e;
    let (n_r, n_e) = if same { (a.header.n_r, a.header.n_e) } else { (MIXED, MIXED) };
    let mut records = a.records;
    records.extend(b.records);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records.shuffle(&mut rng);
    Ok(Dataset {
        header: DatasetHeader {
            sample_count: records.len() as u64,
            n_t: a.header.n_t,
            n_r,
            n_e,
            power: a.header.power,
            seed,
        },
        records,
    })
}

/// Streaming reader yielding records in file order.
pub struct RecordReader<R> {
    reader: Reader<R>,
    header: DatasetHeader,
    remaining: u64,
    failed: bool,
}

impl<R: Read> RecordReader<R> {
    pub fn new(inner: R) -> Result<Self> {
        let mut reader = Reader::new(inner);
        let mut magic = [0u8; 4];
        reader.read_bytes(&mut magic, "magic")?;
        if magic != MAGIC {
            return Err(Error::format(0, format!("bad magic {magic:?}, expected \"WTDS\"")));
        }
        let at = reader.offset();
        let version = reader.u32("version")?;
        if version != VERSION {
            return Err(Error::format(at, format!("unsupported dataset version {version}")));
        }
        let header = DatasetHeader {
            sample_count: reader.u64("sample count")?,
            n_t: reader.u32("n_t")?,
            n_r: reader.u32("n_r")?,
            n_e: reader.u32("n_e")?,
            power: reader.f64("power")?,
            seed: reader.u64("seed")?,
        };
        header
            .validate()
            .map_err(|e| Error::format(reader.offset(), format!("invalid header: {e}")))?;
        Ok(Self {
            reader,
            remaining: header.sample_count,
            header,
            failed: false,
        })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    fn read_record(&mut self) -> Result<DatasetRecord> {
        let r = &mut self.reader;
        let (n_r, n_e) = if self.header.is_mixed() {
            let at = r.offset();
            let dims = (r.u32("record n_r")?, r.u32("record n_e")?);
            if dims.0 == 0 || dims.1 == 0 || dims.0 > MAX_ANTENNAS || dims.1 > MAX_ANTENNAS {
                return Err(Error::format(at, format!("invalid record antenna setting {dims:?}")));
            }
            dims
        } else {
            (self.header.n_r, self.header.n_e)
        };
        let (n_r, n_e) = (n_r as usize, n_e as usize);
        let mut h = vec![0.0; n_r * NT];
        let mut g = vec![0.0; n_e * NT];
        r.f64s(&mut h, "H")?;
        r.f64s(&mut g, "G")?;
        let mut features = [0.0; FEATURE_LEN];
        r.f64s(&mut features, "features")?;
        let mut label = [0.0; COV_LEN];
        r.f64s(&mut label, "label")?;
        let rate = r.f64("rate")?;
        let at = r.offset();
        let flags = r.u8("flags")?;
        if flags & !FLAG_NOT_CONVERGED != 0 {
            return Err(Error::format(at, format!("unknown flag bits {flags:#04x}")));
        }
        let channels = ChannelPair::from_row_slices(NT, n_r, n_e, &h, &g)
            .map_err(|e| Error::format(at, format!("invalid channel entries: {e}")))?;
        Ok(DatasetRecord {
            channels,
            features: FeatureVector(features),
            label: CovVector(label),
            rate,
            converged: flags & FLAG_NOT_CONVERGED == 0,
        })
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<DatasetRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        if self.remaining == 0 {
            let end = self.reader.offset();
            return match self.reader.at_eof() {
                Ok(true) => None,
                Ok(false) => {
                    self.failed = true;
                    Some(Err(Error::format(
                        end,
                        format!("data beyond the {} announced samples", self.header.sample_count),
                    )))
                }
                Err(e) => {
                    self.failed = true;
                    Some(Err(e))
                }
            };
        }
        self.remaining -= 1;
        let rec = self.read_record();
        self.failed = rec.is_err();
        Some(rec)
    }
}

pub fn read_set(path: impl AsRef<Path>) -> Result<RecordReader<BufReader<File>>> {
    RecordReader::new(BufReader::new(File::open(path)?))
}

pub fn load_set(path: impl AsRef<Path>) -> Result<Dataset> {
    let reader = read_set(path)?;
    let header = *reader.header();
    let records = reader.collect::<Result<Vec<_>>>()?;
    Ok(Dataset { header, records })
}
