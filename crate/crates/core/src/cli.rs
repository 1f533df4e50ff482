//! The `vc` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O or training failure, 2 parse error,
//! 3 invalid value, 4 unknown experiment or generator.
//!
//! A `vc.cfg` file in the working directory (or the file named by
//! `--config`) may preload any long flag as `key=value` lines; flags given
//! on the command line win.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::density::{kde, ratio_csv, Bandwidth};
use crate::experiments::objectives::{generator, generator_domain, GENERATORS};
use crate::experiments::{run_experiment, DensityEvolution, RunOptions, EXPERIMENTS};
use crate::grid::{emit, ingest, Format};
use crate::grid::{BoxDomain, SampledField};
use crate::nn::{train, Batch, Dataset, LossRecord, Mlp, TrainConfig};
use crate::util::{fmt_f64, write_atomic};
use crate::vc::{ivc_distance, vc_field, IvcSpec, WindowSpec, WindowUnit};
use crate::vcp::{run_vcp, Epsilon, VcpPlan};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_UNKNOWN: i32 = 4;

/// Name of the optional flag preload file.
pub const CONFIG_FILE: &str = "vc.cfg";

/// Value-change analysis of sampled functions and neural-network fits.
#[derive(Debug, Parser)]
#[command(name = "vc", version)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Directory for outputs without an explicit path.
    #[arg(long = "out-dir", global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// Field file format for outputs: csv-grid, f64grid or pgm.
    #[arg(long, global = true)]
    pub format: Option<String>,

    /// Flag preload file of key=value lines [default: ./vc.cfg if present].
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute VC fields for one or more window lengths.
    Vc(VcArgs),
    /// IVC distance between two fields on the same grid.
    IvcDist(IvcDistArgs),
    /// Kernel density of a field's VC values, and optionally its ratio to a target's.
    Density(DensityArgs),
    /// Train an MLP on a sampled field.
    Train(TrainArgs),
    /// Train with VC-guided preprocessing.
    Vcp(VcpArgs),
    /// Run a canned experiment.
    Experiment(ExperimentArgs),
    /// Sample an analytic test function onto a grid.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct VcArgs {
    /// Input field (csv-grid, f64grid or PGM).
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Window length, or a comma-separated list of lengths. Per-axis lengths
    /// are joined with `:`, e.g. `0.2:0.2:0`.
    #[arg(long = "L", allow_hyphen_values = true)]
    pub lengths: Option<String>,

    /// Unit of L: domain or cells [default: cells for PGM, domain otherwise].
    #[arg(long)]
    pub unit: Option<String>,

    /// Output path; only valid with a single L.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IvcArgs {
    /// Smallest window length of the IVC average.
    #[arg(long = "l-min", allow_hyphen_values = true)]
    pub l_min: Option<f64>,

    /// Largest window length of the IVC average.
    #[arg(long = "l-max", allow_hyphen_values = true)]
    pub l_max: Option<f64>,

    /// Quadrature nodes over [l-min, l-max].
    #[arg(long = "n-l", default_value_t = 16)]
    pub n_l: usize,
}

impl IvcArgs {
    fn spec(&self) -> Result<IvcSpec> {
        let l_min = self.l_min.ok_or_else(|| missing("--l-min"))?;
        let l_max = self.l_max.ok_or_else(|| missing("--l-max"))?;
        IvcSpec::new(l_min, l_max, self.n_l)
    }
}

#[derive(Debug, Args)]
pub struct IvcDistArgs {
    /// First field.
    pub first: PathBuf,
    /// Second field.
    pub second: PathBuf,
    #[command(flatten)]
    pub ivc: IvcArgs,
    /// Also write the distance to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Field whose VC density is estimated.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Target field; adds its density and the ratio, on the target's bandwidth.
    #[arg(long)]
    pub target: Option<PathBuf>,

    /// Window length.
    #[arg(long = "L", allow_hyphen_values = true)]
    pub length: Option<f64>,

    /// Unit of L: domain or cells [default: cells for PGM, domain otherwise].
    #[arg(long)]
    pub unit: Option<String>,

    /// Bandwidth: silverman or a positive number.
    #[arg(long, default_value = "silverman")]
    pub bandwidth: String,

    /// Output CSV path [default: <out-dir>/density.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    /// adam or sgd.
    #[arg(long, default_value = "adam")]
    pub optimizer: String,

    /// Learning rate.
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,

    /// Training steps.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,

    /// full, or a minibatch size.
    #[arg(long, default_value = "full")]
    pub batch: String,

    /// Record the full-data loss every this many steps.
    #[arg(long = "record-every", default_value_t = 100)]
    pub record_every: usize,
}

impl OptimArgs {
    fn config(&self, seed: u64) -> Result<TrainConfig> {
        let base = match self.optimizer.as_str() {
            "adam" => TrainConfig::adam(self.lr, self.steps),
            "sgd" => TrainConfig::sgd(self.lr, self.steps),
            other => return Err(Error::parse("--optimizer", format!("unknown optimizer `{other}`"))),
        };
        let batch = match self.batch.as_str() {
            "full" => Batch::Full,
            n => Batch::Minibatch(parse_num("--batch", n)?),
        };
        Ok(base
            .with_batch(batch)
            .with_seed(seed)
            .with_record_every(self.record_every))
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training field.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Layer sizes, e.g. 1,20,20,1.
    #[arg(long)]
    pub arch: Option<String>,

    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct VcpArgs {
    /// Training field.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// nn (pre-train and widen) or sur (surrogate residual).
    #[arg(long, default_value = "nn")]
    pub mode: String,

    /// Final layer sizes.
    #[arg(long)]
    pub arch: Option<String>,

    /// Pre-trained layer sizes (nn mode).
    #[arg(long = "compact-arch")]
    pub compact_arch: Option<String>,

    /// Surrogate nodes per axis, one value or one per axis (sur mode).
    #[arg(long)]
    pub nodes: Option<String>,

    /// Threshold: a fraction of Dist_IVC(0, f), abs:<value>, or none.
    #[arg(long, default_value = "0.1")]
    pub epsilon: String,

    /// Pre-training step cap (nn mode).
    #[arg(long = "pretrain-steps", default_value_t = 5000)]
    pub pretrain_steps: usize,

    /// Steps between IVC-distance checks while pre-training.
    #[arg(long = "check-interval", default_value_t = 100)]
    pub check_interval: usize,

    /// Comma-separated loss levels whose first crossing is reported.
    #[arg(long)]
    pub milestones: Option<String>,

    #[command(flatten)]
    pub ivc: IvcArgs,

    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// linear3d, piecewise, sin-density, image, strategies, vcp-linear,
    /// vcp-image or flow-synthetic. Outputs go to <out-dir>/<name>.
    pub name: String,

    /// Multiplies step counts; grid counts scale by scale^(1/dims).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// sin, sin3, linear3d, piecewise or vortex.
    pub kind: String,

    /// Samples per axis, comma-separated.
    #[arg(long)]
    pub counts: Option<String>,

    /// Output path [default: <out-dir>/<kind>.<ext>].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } => EXIT_PARSE,
            Error::Io { .. } | Error::NonFiniteLoss { .. } => EXIT_FAILURE,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn missing(flag: &str) -> Error {
    Error::parse(flag, "required flag is missing")
}

fn parse_num<T: std::str::FromStr>(flag: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(flag, format!("cannot parse `{s}`")))
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    s.split(',').map(|p| parse_num(flag, p)).collect()
}

fn parse_format(s: &str) -> Result<Format> {
    s.parse()
}

/// Reads `key=value` lines; blank lines and `#` comments are skipped.
fn read_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("{}:{}", path.display(), i + 1), "expected key=value"))?;
        out.push((k.trim().trim_start_matches("--").to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Finds `--config <path>` or `--config=<path>` before clap sees the args.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Turns config entries into defaults on every command that has the flag.
fn apply_config(mut cmd: clap::Command, entries: &[(String, String)]) -> Result<clap::Command> {
    for (key, value) in entries {
        if key == "config" {
            continue;
        }
        let mut found = false;
        let has = |c: &clap::Command| {
            c.get_arguments()
                .find(|a| a.get_long() == Some(key.as_str()))
                .map(|a| a.get_id().clone())
        };
        if let Some(id) = has(&cmd) {
            let v = value.clone();
            cmd = cmd.mut_arg(id, |a| a.default_value(v));
            found = true;
        }
        let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
        for name in names {
            let id = cmd.find_subcommand(&name).and_then(has);
            if let Some(id) = id {
                let v = value.clone();
                cmd = cmd.mut_subcommand(name, |s| s.mut_arg(id, |a| a.default_value(v)));
                found = true;
            }
        }
        if !found {
            return Err(Error::parse(CONFIG_FILE, format!("unknown key `{key}`")));
        }
    }
    Ok(cmd)
}

/// Runs the tool on `args` (including the program name) and returns the
/// exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cfg = match config_path(&args) {
        Some(p) => Some(p),
        None => Some(PathBuf::from(CONFIG_FILE)).filter(|p| p.is_file()),
    };
    let mut cmd = Cli::command();
    if let Some(path) = cfg {
        match read_config(&path).and_then(|entries| apply_config(cmd, &entries)) {
            Ok(c) => cmd = c,
            Err(e) => return report(e.into()),
        }
    }
    let matches = match cmd.try_get_matches_from(&args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_PARSE;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> i32 {
    eprintln!("error: {}", f.message);
    f.code
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Vc(a) => cmd_vc(cli, a),
        Command::IvcDist(a) => cmd_ivc_dist(a),
        Command::Density(a) => cmd_density(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Vcp(a) => cmd_vcp(cli, a),
        Command::Experiment(a) => cmd_experiment(cli, a),
        Command::Gen(a) => cmd_gen(cli, a),
    }
}

fn read_field(path: &Path) -> Result<(SampledField, Format)> {
    let format = Format::from_path(path).unwrap_or(Format::CsvGrid);
    Ok((ingest(path, format)?, format))
}

fn output_format(cli: &Cli, out: Option<&Path>, fallback: Format) -> Result<Format> {
    if let Some(f) = &cli.format {
        return parse_format(f);
    }
    Ok(out.and_then(Format::from_path).unwrap_or(fallback))
}

fn window_unit(unit: Option<&str>, input: Format) -> Result<WindowUnit> {
    match unit {
        None if input == Format::Pgm => Ok(WindowUnit::Cells),
        None | Some("domain") => Ok(WindowUnit::Domain),
        Some("cells") | Some("pixels") => Ok(WindowUnit::Cells),
        Some(other) => Err(Error::parse("--unit", format!("unknown unit `{other}`"))),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn in_out_dir(cli: &Cli, name: &str) -> Result<PathBuf> {
    ensure_dir(&cli.out_dir)?;
    Ok(cli.out_dir.join(name))
}

fn history_csv(history: &[LossRecord]) -> String {
    let mut out = String::from("step,loss\n");
    for r in history {
        out.push_str(&format!("{},{}\n", r.step, fmt_f64(r.loss)));
    }
    out
}

fn cmd_vc(cli: &Cli, a: &VcArgs) -> CmdResult {
    let input = a.input.as_deref().ok_or_else(|| missing("--input"))?;
    let lengths: Vec<&str> = a.lengths.as_deref().ok_or_else(|| missing("--L"))?.split(',').collect();
    let (field, in_format) = read_field(input)?;
    let unit = window_unit(a.unit.as_deref(), in_format)?;
    let windows = lengths
        .iter()
        .map(|l| {
            let w = match l.contains(':') {
                true => WindowSpec::anisotropic(l.split(':').map(|p| parse_num("--L", p)).collect::<Result<_>>()?)?,
                false => WindowSpec::isotropic(parse_num("--L", l)?)?,
            };
            Ok(w.with_unit(unit))
        })
        .collect::<Result<Vec<_>>>()?;
    if a.out.is_some() && lengths.len() > 1 {
        return Err(Error::InvalidConfig("--out needs a single L; use --out-dir for a list".into()).into());
    }
    let format = output_format(cli, a.out.as_deref(), in_format)?;
    for w in &windows {
        let vc = vc_field(&field, w)?;
        let name: Vec<String> = w.lengths().iter().map(|&l| fmt_f64(l)).collect();
        let path = match &a.out {
            Some(p) => p.clone(),
            None => in_out_dir(cli, &format!("vc_L{}.{}", name.join("_"), format.extension()))?,
        };
        emit(vc.field(), &path, format)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_ivc_dist(a: &IvcDistArgs) -> CmdResult {
    let (f1, _) = read_field(&a.first)?;
    let (f2, _) = read_field(&a.second)?;
    let d = ivc_distance(&f1, &f2, &a.ivc.spec()?)?;
    println!("{}", fmt_f64(d));
    if let Some(p) = &a.out {
        write_atomic(p, format!("{}\n", fmt_f64(d)).as_bytes())?;
    }
    Ok(())
}

fn cmd_density(cli: &Cli, a: &DensityArgs) -> CmdResult {
    let input = a.input.as_deref().ok_or_else(|| missing("--input"))?;
    let length = a.length.ok_or_else(|| missing("--L"))?;
    let (field, in_format) = read_field(input)?;
    let window = WindowSpec::isotropic(length)?.with_unit(window_unit(a.unit.as_deref(), in_format)?);
    let bandwidth = match a.bandwidth.as_str() {
        "silverman" => Bandwidth::Silverman,
        s => Bandwidth::Fixed(parse_num("--bandwidth", s)?),
    };
    let path = match &a.out {
        Some(p) => p.clone(),
        None => in_out_dir(cli, "density.csv")?,
    };
    let text = match &a.target {
        None => kde(vc_field(&field, &window)?.values(), None, bandwidth)?.to_csv(),
        Some(t) => {
            let (target, _) = read_field(t)?;
            let ev = DensityEvolution::from_fields(&target, &window, &[(0, field)])?;
            if let Bandwidth::Fixed(b) = bandwidth {
                // Recompute both curves on the requested bandwidth.
                let abscissa = &ev.target_estimate.abscissa;
                let bw = Bandwidth::Fixed(b);
                let den = kde(&ev.target_samples, Some(abscissa), bw)?;
                let num = kde(&ev.samples[0], Some(abscissa), bw)?;
                let ratio = crate::density::vcdr(&num, &den, None)?;
                ratio_csv(abscissa, &ratio)
            } else {
                ev.checkpoint_csv(0)
            }
        }
    };
    write_atomic(&path, text.as_bytes())?;
    println!("{}", path.display());
    Ok(())
}

fn parse_arch(flag: &str, s: Option<&str>) -> Result<Vec<usize>> {
    parse_list(flag, s.ok_or_else(|| missing(flag))?)
}

fn write_prediction(cli: &Cli, field: &SampledField, in_format: Format) -> Result<()> {
    let format = output_format(cli, None, in_format)?;
    let path = in_out_dir(cli, &format!("prediction.{}", format.extension()))?;
    emit(field, &path, format)
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> CmdResult {
    let input = a.input.as_deref().ok_or_else(|| missing("--input"))?;
    let arch = parse_arch("--arch", a.arch.as_deref())?;
    let config = a.optim.config(cli.seed)?;
    let (field, in_format) = read_field(input)?;
    let net = Mlp::init(&arch, cli.seed)?;
    let out = train(net, &Dataset::from_field(&field), &config, |_| std::ops::ControlFlow::Continue(()))?;
    write_atomic(&in_out_dir(cli, "loss_history.csv")?, history_csv(&out.history).as_bytes())?;
    out.net.save(&in_out_dir(cli, "model.vcm")?)?;
    write_prediction(cli, &out.net.sample_on(&field)?, in_format)?;
    if let Some(last) = out.history.last() {
        println!("final_loss={}", fmt_f64(last.loss));
    }
    Ok(())
}

fn parse_epsilon(s: &str) -> Result<Epsilon> {
    match s {
        "none" | "unbounded" => Ok(Epsilon::Unbounded),
        _ => match s.strip_prefix("abs:") {
            Some(v) => Ok(Epsilon::Absolute(parse_num("--epsilon", v)?)),
            None => Ok(Epsilon::Relative(parse_num("--epsilon", s.strip_prefix("rel:").unwrap_or(s))?)),
        },
    }
}

fn cmd_vcp(cli: &Cli, a: &VcpArgs) -> CmdResult {
    let input = a.input.as_deref().ok_or_else(|| missing("--input"))?;
    let (field, in_format) = read_field(input)?;
    let arch = parse_arch("--arch", a.arch.as_deref())?;
    let main = a.optim.config(cli.seed)?;
    let spec = a.ivc.spec()?;
    let plan = match a.mode.as_str() {
        "nn" => {
            let compact = parse_arch("--compact-arch", a.compact_arch.as_deref())?;
            VcpPlan::nn(spec, compact, arch, main.clone())
                .with_pretrain_config(main.with_steps(a.pretrain_steps))
        }
        "sur" => {
            let mut nodes: Vec<usize> = parse_list("--nodes", a.nodes.as_deref().ok_or_else(|| missing("--nodes"))?)?;
            if nodes.len() == 1 {
                nodes = vec![nodes[0]; field.domain().dims()];
            }
            VcpPlan::sur(spec, nodes, arch, main)
        }
        other => return Err(Error::parse("--mode", format!("unknown mode `{other}`")).into()),
    };
    let milestones = match &a.milestones {
        Some(m) => parse_list("--milestones", m)?,
        None => Vec::new(),
    };
    let plan = plan
        .with_epsilon(parse_epsilon(&a.epsilon)?)
        .with_check_interval(a.check_interval)
        .with_milestones(milestones)
        .with_seed(cli.seed);
    let out = run_vcp(&field, &plan)?;
    let report = out.report.to_text();
    write_atomic(&in_out_dir(cli, "vcp_report.txt")?, report.as_bytes())?;
    write_atomic(&in_out_dir(cli, "loss_history.csv")?, history_csv(&out.history).as_bytes())?;
    write_atomic(
        &in_out_dir(cli, "pretrain_history.csv")?,
        history_csv(&out.pretrain_history).as_bytes(),
    )?;
    out.model.network().save(&in_out_dir(cli, "model.vcm")?)?;
    write_prediction(cli, &out.model.sample_on(&field)?, in_format)?;
    print!("{report}");
    Ok(())
}

fn cmd_experiment(cli: &Cli, a: &ExperimentArgs) -> CmdResult {
    if !EXPERIMENTS.contains(&a.name.as_str()) {
        return Err(Failure {
            code: EXIT_UNKNOWN,
            message: format!("unknown experiment `{}`; expected one of {}", a.name, EXPERIMENTS.join(", ")),
        });
    }
    let opts = RunOptions::new(cli.seed, a.scale)?;
    let out = run_experiment(&a.name, &opts)?;
    let dir = cli.out_dir.join(&a.name);
    out.write_to(&dir)?;
    for c in &out.checks {
        println!("{}: {} ({})", c.name, if c.passed { "pass" } else { "fail" }, c.detail);
    }
    println!("{}", dir.display());
    Ok(())
}

fn cmd_gen(cli: &Cli, a: &GenArgs) -> CmdResult {
    let Some((f, dims, _, _)) = generator(&a.kind) else {
        return Err(Failure {
            code: EXIT_UNKNOWN,
            message: format!("unknown generator `{}`; expected one of {}", a.kind, GENERATORS.join(", ")),
        });
    };
    let counts: Vec<usize> = parse_list("--counts", a.counts.as_deref().ok_or_else(|| missing("--counts"))?)?;
    if counts.len() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            actual: counts.len(),
        }
        .into());
    }
    let domain: BoxDomain = generator_domain(&a.kind, counts).expect("known generator")?;
    let field = SampledField::from_fn(domain, f)?;
    let format = output_format(cli, a.out.as_deref(), Format::CsvGrid)?;
    let path = match &a.out {
        Some(p) => p.clone(),
        None => in_out_dir(cli, &format!("{}.{}", a.kind, format.extension()))?,
    };
    emit(&field, &path, format)?;
    println!("{}", path.display());
    Ok(())
}
