//! The `eam` command line.
//!
//! Exit status is 0 on success, 1 on usage errors (bad flags or parameter
//! ranges) and 2 on data errors (missing or malformed files).

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{self, Dataset, SynthParams, FILL_PERCENTS, FOLDS};
use crate::error::Error;
use crate::eval::{self, RetrievalConfig};

#[derive(Parser, Debug)]
#[command(
    name = "eam",
    version,
    about = "Entropic associative memory experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded synthetic feature dataset
    Synth(SynthArgs),
    /// Sweep register height 2^m with the full remembered corpus
    SweepRows(SweepRowsArgs),
    /// Sweep the remembered-corpus fill percentage at a fixed m
    SweepFill(SweepFillArgs),
    /// Retrieve test cues at each fill level
    Retrieve(RetrieveArgs),
    /// Retrieve occluded cues at each fill level and tolerance
    OccludeEval(OccludeArgs),
    /// Check a dataset and print summary statistics
    Validate(DataArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Feature CSV file
    #[arg(long)]
    data: PathBuf,
    /// Metadata sidecar (defaults to the data path with a .meta extension)
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output feature CSV; the sidecar is written next to it
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 500)]
    per_class: usize,
    #[arg(long, default_value_t = 64)]
    features: usize,
    #[arg(long, default_value_t = 64)]
    rows_hint: usize,
    /// Noise standard deviation around each class centroid
    #[arg(long, default_value_t = 0.05)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write an occluded copy of the dataset here
    #[arg(long)]
    occluded_out: Option<PathBuf>,
    /// Features overwritten with noise per occluded instance
    #[arg(long, default_value_t = 3)]
    occlude: usize,
}

#[derive(Args, Debug)]
struct SweepCommon {
    #[command(flatten)]
    data: DataArgs,
    /// Folds to run, comma separated (default: all ten)
    #[arg(long, value_delimiter = ',')]
    folds: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    tolerance: usize,
    /// Recorded in the output header; sweeps draw no random numbers
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepRowsArgs {
    #[command(flatten)]
    common: SweepCommon,
    #[arg(long, default_value_t = 0)]
    m_min: u32,
    #[arg(long, default_value_t = 9)]
    m_max: u32,
}

#[derive(Args, Debug)]
struct SweepFillArgs {
    #[command(flatten)]
    common: SweepCommon,
    #[arg(long, default_value_t = 6)]
    m: u32,
    #[arg(long, value_delimiter = ',', default_values_t = FILL_PERCENTS)]
    fills: Vec<u32>,
}

#[derive(Args, Debug)]
struct RetrievalCommon {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 6)]
    m: u32,
    #[arg(long, value_delimiter = ',', default_values_t = FILL_PERCENTS)]
    fills: Vec<u32>,
    #[arg(long, default_value_t = 0)]
    fold: usize,
    /// Cues taken per class from the fold's test corpus
    #[arg(long, default_value_t = 1)]
    cues_per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    #[command(flatten)]
    common: RetrievalCommon,
    #[arg(long, default_value_t = 0)]
    tolerance: usize,
}

#[derive(Args, Debug)]
struct OccludeArgs {
    #[command(flatten)]
    common: RetrievalCommon,
    /// Occluded-cue feature CSV (same shape as --data)
    #[arg(long)]
    cues: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1, 2, 3])]
    tolerances: Vec<usize>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Data(e) => write!(f, "data error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("eam: {e}");
            match e {
                CliError::Usage(_) => 1,
                CliError::Data(_) => 2,
            }
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::SweepRows(a) => sweep_rows(a),
        Command::SweepFill(a) => sweep_fill(a),
        Command::Retrieve(a) => retrieve(a),
        Command::OccludeEval(a) => occlude_eval(a),
        Command::Validate(a) => validate(a),
    }
}

fn load(args: &DataArgs) -> CliResult<Dataset> {
    let meta_path = args
        .meta
        .clone()
        .unwrap_or_else(|| dataset::meta_path(&args.data));
    Ok(dataset::read_dataset_with_meta(&args.data, &meta_path)?)
}

fn check_m(m: u32) -> CliResult<()> {
    if m > 9 {
        return Err(usage(format!("m = {m} outside 0..=9")));
    }
    Ok(())
}

fn check_fills(fills: &[u32]) -> CliResult<()> {
    if fills.is_empty() {
        return Err(usage("no fill percentages given"));
    }
    for &p in fills {
        dataset::check_fill(p).map_err(|e| usage(e.to_string()))?;
    }
    Ok(())
}

fn check_fold(fold: usize) -> CliResult<()> {
    if fold >= FOLDS {
        return Err(usage(format!("fold {fold} outside 0..{FOLDS}")));
    }
    Ok(())
}

fn resolve_folds(folds: &[usize]) -> CliResult<Vec<usize>> {
    if folds.is_empty() {
        return Ok((0..FOLDS).collect());
    }
    for &f in folds {
        check_fold(f)?;
    }
    Ok(folds.to_vec())
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Data(Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

struct Params(Vec<(String, String)>);

impl Params {
    fn new(command: &str, data: &DataArgs) -> Self {
        let mut p = Params(Vec::new());
        p.push("eam_version", env!("CARGO_PKG_VERSION"));
        p.push("command", command);
        p.push("data", data.data.display());
        if let Some(meta) = &data.meta {
            p.push("meta", meta.display());
        }
        p.push(
            "quantizer",
            "min/max of the fold's training corpus, round half up",
        );
        p
    }

    fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }
}

fn synth(a: SynthArgs) -> CliResult<()> {
    if a.classes < 2 || a.per_class < 10 || a.features == 0 || a.rows_hint < 2 {
        return Err(usage(
            "synth needs --classes >= 2, --per-class >= 10, --features >= 1, --rows-hint >= 2",
        ));
    }
    if !(a.separation >= 0.0 && a.separation.is_finite()) {
        return Err(usage(format!("invalid --separation {}", a.separation)));
    }
    if a.occlude > a.features {
        return Err(usage("--occlude exceeds --features"));
    }
    let ds = dataset::synth_generate(&SynthParams {
        classes: a.classes,
        per_class: a.per_class,
        n: a.features,
        rows_hint: a.rows_hint,
        separation: a.separation,
        seed: a.seed,
    })?;
    dataset::write_dataset(&ds, &a.out)?;
    println!(
        "wrote {} instances to {}",
        ds.instances.len(),
        a.out.display()
    );
    if let Some(path) = &a.occluded_out {
        let occ = dataset::synth_occlude(&ds, a.occlude, a.seed.wrapping_add(1))?;
        dataset::write_dataset(&occ, path)?;
        println!("wrote occluded copy to {}", path.display());
    }
    Ok(())
}

fn sweep_params(command: &str, c: &SweepCommon, folds: &[usize]) -> Params {
    let mut p = Params::new(command, &c.data);
    p.push("folds", join(folds));
    p.push("tolerance", c.tolerance);
    p.push("seed", c.seed);
    p.push(
        "register_averaging",
        "uniform over classes with defined values",
    );
    p
}

fn sweep_rows(a: SweepRowsArgs) -> CliResult<()> {
    check_m(a.m_max)?;
    if a.m_min > a.m_max {
        return Err(usage("--m-min exceeds --m-max"));
    }
    let folds = resolve_folds(&a.common.folds)?;
    let ds = load(&a.common.data)?;
    let m_values: Vec<u32> = (a.m_min..=a.m_max).collect();
    let table = eval::experiment_rows_sweep(&ds, &folds, &m_values, a.common.tolerance)?;

    let mut p = sweep_params("sweep-rows", &a.common, &folds);
    p.push("m", join(&m_values));
    ensure_dir(&a.common.out)?;
    let path = a.common.out.join("rows_sweep.csv");
    eval::write_text(&path, &table.to_csv(&p.0))?;
    for r in table.means() {
        println!(
            "m={} entropy={:.3} reg P/R={:.4}/{:.4} sys P/R={:.4}/{:.4} accepting={:.2}",
            r.key,
            r.entropy,
            r.reg_precision,
            r.reg_recall,
            r.sys_precision,
            r.sys_recall,
            r.accepting_avg
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn sweep_fill(a: SweepFillArgs) -> CliResult<()> {
    check_m(a.m)?;
    check_fills(&a.fills)?;
    let folds = resolve_folds(&a.common.folds)?;
    let ds = load(&a.common.data)?;
    let table = eval::experiment_fill_sweep(&ds, &folds, a.m, &a.fills, a.common.tolerance)?;

    let mut p = sweep_params("sweep-fill", &a.common, &folds);
    p.push("m", a.m);
    p.push("fills", join(&a.fills));
    ensure_dir(&a.common.out)?;
    let path = a.common.out.join("fill_sweep.csv");
    eval::write_text(&path, &table.to_csv(&p.0))?;
    for r in table.means() {
        println!(
            "fill={}% entropy={:.3} reg P/R={:.4}/{:.4} sys P/R={:.4}/{:.4}",
            r.key, r.entropy, r.reg_precision, r.reg_recall, r.sys_precision, r.sys_recall
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn retrieval_params(command: &str, c: &RetrievalCommon) -> Params {
    let mut p = Params::new(command, &c.data);
    p.push("m", c.m);
    p.push("fills", join(&c.fills));
    p.push("fold", c.fold);
    p.push("cues_per_class", c.cues_per_class);
    p.push("seed", c.seed);
    p
}

fn check_retrieval(c: &RetrievalCommon) -> CliResult<()> {
    check_m(c.m)?;
    check_fills(&c.fills)?;
    check_fold(c.fold)?;
    if c.cues_per_class == 0 {
        return Err(usage("--cues-per-class must be at least 1"));
    }
    Ok(())
}

fn retrieve(a: RetrieveArgs) -> CliResult<()> {
    let c = &a.common;
    check_retrieval(c)?;
    let ds = load(&c.data)?;
    let cue_ids = eval::select_cues(&ds, c.fold, c.cues_per_class)?;
    let cfg = RetrievalConfig {
        fold: c.fold,
        m: c.m,
        fills: c.fills.clone(),
        tolerances: vec![a.tolerance],
        seed: c.seed,
    };
    let rows = eval::experiment_retrieval(&ds, &ds, &cue_ids, &cfg)?;

    let mut p = retrieval_params("retrieve", c);
    p.push("tolerances", a.tolerance);
    ensure_dir(&c.out)?;
    let path = c.out.join("retrieval.csv");
    eval::write_text(&path, &eval::retrieval_csv(&rows, ds.n(), &p.0))?;
    print_acceptance(&rows, cue_ids.len());
    println!("wrote {}", path.display());
    Ok(())
}

fn occlude_eval(a: OccludeArgs) -> CliResult<()> {
    let c = &a.common;
    check_retrieval(c)?;
    if a.tolerances.is_empty() {
        return Err(usage("no tolerances given"));
    }
    let ds = load(&c.data)?;
    let cues = dataset::read_dataset(&a.cues)?;
    let cue_ids = eval::select_cues(&cues, c.fold, c.cues_per_class)?;
    let cfg = RetrievalConfig {
        fold: c.fold,
        m: c.m,
        fills: c.fills.clone(),
        tolerances: a.tolerances.clone(),
        seed: c.seed,
    };
    let rows = eval::experiment_retrieval(&ds, &cues, &cue_ids, &cfg)?;

    let mut p = retrieval_params("occlude-eval", c);
    p.push("cues", a.cues.display());
    p.push("tolerances", join(&a.tolerances));
    ensure_dir(&c.out)?;
    let path = c.out.join("occlusion.csv");
    eval::write_text(&path, &eval::retrieval_csv(&rows, ds.n(), &p.0))?;
    print_acceptance(&rows, cue_ids.len());
    println!("wrote {}", path.display());
    Ok(())
}

fn print_acceptance(rows: &[eval::RetrievalRow], cues: usize) {
    for ((fill, tol), accepted) in eval::acceptance_counts(rows) {
        println!("fill={fill}% tolerance={tol}: {accepted}/{cues} cues accepted");
    }
}

fn validate(a: DataArgs) -> CliResult<()> {
    let ds = load(&a)?;
    println!("{}", ds.summary());
    Ok(())
}
