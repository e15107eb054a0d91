//! Argument parsing and subcommand dispatch for the `wtap` binary.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use wtap_core::nn::{load_checkpoint, train_with, NetArchitecture, TrainSchedule, Variant};
use wtap_core::{cascade_sets, generate_set, load_set, Dataset};

use crate::bench::{bench, BenchConfig};
use crate::error::CliResult;
use crate::eval::{evaluate, read_rows, write_rows};
use crate::plot::render_all;

pub const DATA_DIR_ENV: &str = "WTAP_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "wtap", version, about = "Learned precoding for the MIMO Gaussian wiretap channel")]
pub struct Cli {
    /// Seed for generation, initialization and shuffling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for data-parallel stages (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Increase log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Base directory for relative artifact paths.
    #[arg(long, global = true, env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an oracle-labelled dataset, or cascade two existing ones.
    Gen(GenArgs),
    /// Train a network on a dataset.
    Train(TrainArgs),
    /// Compare a trained network with the oracle and GSVD on a test set.
    Eval(EvalArgs),
    /// Time per-realization cost of the three precoders.
    Bench(BenchArgs),
    /// Render figures from a per-record evaluation CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 3)]
    pub nt: usize,
    #[arg(long, required_unless_present = "cascade")]
    pub nr: Option<usize>,
    #[arg(long, required_unless_present = "cascade")]
    pub ne: Option<usize>,
    #[arg(long, required_unless_present = "cascade")]
    pub count: Option<usize>,
    #[arg(long, default_value_t = 20.0)]
    pub power: f64,
    /// Shuffle two existing datasets together instead of generating.
    #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with_all = ["nr", "ne", "count"])]
    pub cascade: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a CSV export.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Deepnet,
    Deepernet,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Deepnet => Variant::DeepNet,
            VariantArg::Deepernet => Variant::DeeperNet,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::Deepnet)]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 2000)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Optimizer steps per epoch; defaults to one pass over the data.
    #[arg(long)]
    pub steps_per_epoch: Option<usize>,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.8)]
    pub lr_decay: f64,
    #[arg(long, default_value_t = 80)]
    pub decay_every: usize,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss CSV; defaults to the checkpoint path with `.loss.csv`.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Summary CSV (`metric,value`).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-record CSV, the input of `plot`.
    #[arg(long)]
    pub rows: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub realizations: usize,
    #[arg(long, default_value_t = 20)]
    pub warmup: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Per-record CSV written by `eval --rows`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// File-name prefix of the figures.
    #[arg(long, default_value = "eval")]
    pub name: String,
}

/// Resolves relative paths against the data directory, if one is set.
struct Paths(Option<PathBuf>);

impl Paths {
    fn get(&self, p: &Path) -> PathBuf {
        match &self.0 {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn create(&self, p: &Path) -> CliResult<BufWriter<File>> {
        let path = self.get(p);
        if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        Ok(BufWriter::new(File::create(path)?))
    }
}

/// Runs one parsed command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut impl Write) -> CliResult<()> {
    let paths = Paths(cli.data_dir.clone());
    match cli.command {
        Command::Gen(a) => gen(a, cli.seed, &paths, out),
        Command::Train(a) => train_cmd(a, cli.seed, &paths, out),
        Command::Eval(a) => eval_cmd(a, &paths, out),
        Command::Bench(a) => bench_cmd(a, &paths, out),
        Command::Plot(a) => plot_cmd(a, &paths, out),
    }
}

fn gen(a: GenArgs, seed: u64, paths: &Paths, out: &mut impl Write) -> CliResult<()> {
    let set = match &a.cascade {
        Some(files) => cascade_sets(load_set(paths.get(&files[0]))?, load_set(paths.get(&files[1]))?, seed)?,
        None => {
            let (nr, ne, count) = (a.nr.unwrap_or(0), a.ne.unwrap_or(0), a.count.unwrap_or(0));
            generate_set(a.nt, nr, ne, count, a.power, seed)?
        }
    };
    let mut w = paths.create(&a.out)?;
    set.write(&mut w)?;
    w.flush()?;
    if let Some(csv) = &a.csv {
        set.write_csv(paths.create(csv)?)?;
    }
    let h = &set.header;
    writeln!(
        out,
        "wrote {} samples (n_t={}, n_r={}, n_e={}, P={}) to {}",
        h.sample_count,
        h.n_t,
        h.n_r,
        h.n_e,
        h.power,
        paths.get(&a.out).display()
    )?;
    Ok(())
}

fn train_cmd(a: TrainArgs, seed: u64, paths: &Paths, out: &mut impl Write) -> CliResult<()> {
    let data = load_set(paths.get(&a.data))?.training_set()?;
    let arch = NetArchitecture::for_variant(a.variant.into()).expect("named variants have layouts");
    let schedule = TrainSchedule {
        lr_init: a.lr,
        lr_decay: a.lr_decay,
        decay_every: a.decay_every,
        batch_size: a.batch_size,
        epochs: a.epochs,
        steps_per_epoch: a.steps_per_epoch,
        seed,
    };
    let (net, history) = train_with(&arch, &schedule, &data, |r| {
        log::info!("epoch {:>5}  lr {:.3e}  mse {:.6}", r.epoch, r.learning_rate, r.mean_mse);
    })?;
    let mut w = paths.create(&a.out)?;
    wtap_core::nn::write_checkpoint(&net, &mut w)?;
    w.flush()?;
    let loss_path = a.loss_csv.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".loss.csv");
        p.into()
    });
    let mut csv = csv::Writer::from_writer(paths.create(&loss_path)?);
    csv.write_record(["epoch", "learning_rate", "mse"])?;
    for (epoch, mse) in history.iter().enumerate() {
        csv.write_record([
            epoch.to_string(),
            schedule.learning_rate(epoch).to_string(),
            mse.to_string(),
        ])?;
    }
    csv.flush()?;
    writeln!(
        out,
        "trained {} on {} samples; final epoch mse {:.6}",
        arch.variant.name(),
        data.len(),
        history.last().copied().unwrap_or(f64::NAN)
    )?;
    Ok(())
}

fn load_pair(checkpoint: &Path, data: &Path, paths: &Paths) -> CliResult<(wtap_core::Network, Dataset)> {
    let net = load_checkpoint(paths.get(checkpoint))?;
    let set = load_set(paths.get(data))?;
    Ok((net, set))
}

fn eval_cmd(a: EvalArgs, paths: &Paths, out: &mut impl Write) -> CliResult<()> {
    let (net, set) = load_pair(&a.checkpoint, &a.data, paths)?;
    let (mut report, rows) = evaluate(&set.records, set.header.power, |v| net.predict(v))?;
    report.config = vec![
        ("checkpoint".into(), a.checkpoint.display().to_string()),
        ("test_set".into(), a.data.display().to_string()),
        ("variant".into(), net.arch().variant.name().into()),
        ("power".into(), set.header.power.to_string()),
    ];
    if let Some(p) = &a.report {
        report.write_csv(paths.create(p)?)?;
    }
    if let Some(p) = &a.rows {
        write_rows(&rows, paths.create(p)?)?;
    }
    write!(out, "{}", report.summary())?;
    Ok(())
}

fn bench_cmd(a: BenchArgs, paths: &Paths, out: &mut impl Write) -> CliResult<()> {
    let (net, set) = load_pair(&a.checkpoint, &a.data, paths)?;
    let cfg = BenchConfig {
        realizations: a.realizations,
        warmup: a.warmup,
        ..Default::default()
    };
    let lat = bench(&net, &set.records, set.header.power, &cfg)?;
    if let Some(p) = &a.out {
        lat.write_csv(paths.create(p)?)?;
    }
    write!(out, "{}", lat.summary())?;
    Ok(())
}

fn plot_cmd(a: PlotArgs, paths: &Paths, out: &mut impl Write) -> CliResult<()> {
    let rows = read_rows(BufReader::new(File::open(paths.get(&a.input))?))?;
    for f in render_all(&rows, &paths.get(&a.out_dir), &a.name)? {
        writeln!(out, "wrote {}", f.display())?;
    }
    Ok(())
}

/// Parses `args`, configures logging and the thread pool, runs the command
/// and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { crate::error::EXIT_USAGE } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            log::warn!("could not resize the thread pool: {e}");
        }
    }
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
