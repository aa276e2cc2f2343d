//! `relaysim <command> --config <path> [--out <path>] [--seed <u64>]
//! [--trials <n>] [--starts <n>] [--trace <path>] [--full-precision]`
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 130 interrupted (partial CSV ends in a `TRUNCATED` row).

pub mod config;
pub mod verify;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::numerics::ComplexVector;
use crate::threehop::{self, OptimizationTrace};
use crate::twohop::{rate_bits, Scheme, SchemeEval};
use config::{read_config, ConfigError, MultiSourceConfig, SweepConfig, ThreeHopConfig, TwoHopConfig, VerifyConfig};
use verify::{run_verify, VerifyOptions};

pub const DEFAULT_PRECISION: usize = 6;
pub const DEFAULT_STARTS: usize = 5;
pub const SEED_ENV: &str = "RELAYSIM_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_INTERRUPTED: i32 = 130;

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

/// Routes Ctrl-C to a flag polled between sweep points and verify checks.
pub fn install_interrupt_handler() {
    let _ = ctrlc::set_handler(|| INTERRUPTED.store(true, Ordering::SeqCst));
}

fn interrupted() -> bool {
    INTERRUPTED.load(Ordering::SeqCst)
}

#[derive(Debug, Parser)]
#[command(name = "relaysim", version, about = "Amplify-and-forward relay network optimizer and Monte Carlo simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate relay gain schemes on one two-hop network.
    TwoHop(RunArgs),
    /// Alternating optimization of a three-hop network from several starts.
    ThreeHop(RunArgs),
    /// Sum-rate optimal gains for several sources sharing the relays.
    MultiSource(RunArgs),
    /// Monte Carlo sweep over random networks.
    Sweep(RunArgs),
    /// Run the verification suite.
    Verify(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON configuration file (optional for verify).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides RELAYSIM_SEED and the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo trials per sweep point.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Number of three-hop optimizer starts.
    #[arg(long)]
    pub starts: Option<usize>,
    /// Per-iteration three-hop trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Print floats with round-trip precision instead of fixed decimals.
    #[arg(long)]
    pub full_precision: bool,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Interrupted,
    /// The reader went away (e.g. `| head`); not an error.
    Closed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Interrupted => EXIT_INTERRUPTED,
            CliError::Closed => EXIT_OK,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            return CliError::Closed;
        }
        CliError::Config(format!("output error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(io) if io.kind() == io::ErrorKind::BrokenPipe => CliError::Closed,
            _ => CliError::Config(format!("output error: {e}")),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to standard error.
pub fn run(args: impl IntoIterator<Item = OsString>, env_seed: Option<String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli.command, env_seed.as_deref()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match &e {
                CliError::Config(msg) => eprintln!("relaysim: configuration error: {msg}"),
                CliError::Numerical(msg) => eprintln!("relaysim: numerical failure: {msg}"),
                CliError::Interrupted => eprintln!("relaysim: interrupted; output truncated"),
                CliError::Closed => {}
            }
            e.exit_code()
        }
    }
}

/// Flag, then environment, then config file, then 0.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, file: Option<u64>) -> Result<u64, ConfigError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(text) = env {
        return text
            .trim()
            .parse()
            .map_err(|_| ConfigError(format!("{SEED_ENV}='{text}' is not a u64")));
    }
    Ok(file.unwrap_or(0))
}

/// Fixed-decimal or round-trip float formatting.
#[derive(Debug, Clone, Copy)]
pub struct NumberFormat {
    precision: Option<usize>,
}

impl NumberFormat {
    pub fn new(full_precision: bool, precision: Option<usize>) -> Self {
        Self {
            precision: if full_precision {
                None
            } else {
                Some(precision.unwrap_or(DEFAULT_PRECISION))
            },
        }
    }

    pub fn num(&self, x: f64) -> String {
        match self.precision {
            Some(p) => format!("{x:.p$}"),
            None => format!("{x}"),
        }
    }
}

fn csv_writer(out: Option<&Path>) -> CliResult<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| CliError::Config(format!("cannot create '{}': {e}", path.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink))
}

fn require_config(args: &RunArgs) -> CliResult<&Path> {
    args.config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))
}

fn execute(command: &Command, env_seed: Option<&str>) -> CliResult<()> {
    match command {
        Command::TwoHop(a) => cmd_two_hop(a, read_config(require_config(a)?)?),
        Command::ThreeHop(a) => cmd_three_hop(a, env_seed, read_config(require_config(a)?)?),
        Command::MultiSource(a) => cmd_multi_source(a, read_config(require_config(a)?)?),
        Command::Sweep(a) => cmd_sweep(a, env_seed, read_config(require_config(a)?)?),
        Command::Verify(a) => {
            let cfg = match &a.config {
                Some(path) => read_config(path)?,
                None => VerifyConfig::default(),
            };
            cmd_verify(a, env_seed, cfg)
        }
    }
}

fn gain_header(prefix: &str, n: usize) -> Vec<String> {
    (0..n)
        .flat_map(|i| [format!("{prefix}{i}_re"), format!("{prefix}{i}_im")])
        .collect()
}

fn gain_fields(fmt: &NumberFormat, d: &ComplexVector) -> Vec<String> {
    d.iter().flat_map(|z| [fmt.num(z.re), fmt.num(z.im)]).collect()
}

fn write_scheme_rows(
    args: &RunArgs,
    fmt: &NumberFormat,
    n: usize,
    evals: &[SchemeEval],
) -> CliResult<()> {
    let mut w = csv_writer(args.out.as_deref())?;
    let mut header = vec!["scheme".to_string(), "snr".into(), "rate_bits".into()];
    header.extend(gain_header("d", n));
    w.write_record(&header)?;
    for e in evals {
        let mut row = vec![e.scheme.to_string(), fmt.num(e.snr), fmt.num(e.rate_bits)];
        row.extend(gain_fields(fmt, &e.gain));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per scheme: `scheme,snr,rate_bits,d0_re,d0_im,...`.
pub fn cmd_two_hop(args: &RunArgs, cfg: TwoHopConfig) -> CliResult<()> {
    let fmt = NumberFormat::new(args.full_precision, cfg.precision);
    let net = cfg.network()?;
    let no_csi_gain = cfg.no_csi_gain()?;
    let evals = cfg
        .schemes()
        .into_iter()
        .map(|s| {
            let eval = match s {
                Scheme::NoCsi => net.eval_scheme_no_csi(no_csi_gain.as_ref(), true),
                _ => net.evaluate(s),
            };
            eval.map_err(|e| CliError::Numerical(format!("{s}: {e}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_scheme_rows(args, &fmt, net.num_relays(), &evals)
}

/// Sum-rate optimum, reported with the S11 tag.
pub fn cmd_multi_source(args: &RunArgs, cfg: MultiSourceConfig) -> CliResult<()> {
    let fmt = NumberFormat::new(args.full_precision, cfg.precision);
    let net = cfg.network()?;
    let eval = net.optimal_gain()?;
    write_scheme_rows(args, &fmt, net.num_relays(), &[eval])
}

/// Per-start rows `start_id,iterations,converged,snr,rate_bits,d1..,d2..`
/// followed by a `best` row.
pub fn cmd_three_hop(args: &RunArgs, env_seed: Option<&str>, cfg: ThreeHopConfig) -> CliResult<()> {
    let fmt = NumberFormat::new(args.full_precision, cfg.precision);
    let seed = resolve_seed(args.seed, env_seed, cfg.seed)?;
    let net = cfg.network()?;
    let tol = cfg.tol.unwrap_or(threehop::DEFAULT_TOL);
    let max_cycles = cfg.max_iters.unwrap_or(threehop::DEFAULT_MAX_CYCLES);
    if !(tol >= 0.0) || max_cycles == 0 {
        return Err(CliError::Config("tol must be nonnegative and max_iters positive".into()));
    }
    let starts = match cfg.initializations()? {
        Some(list) => list,
        None => {
            let n = args.starts.or(cfg.starts).unwrap_or(DEFAULT_STARTS);
            if n == 0 {
                return Err(CliError::Config("at least one start is required".into()));
            }
            threehop::default_starts(&net, n, seed)
        }
    };
    for (k, s) in starts.iter().enumerate() {
        if s.dim() != net.first_stage_len() {
            return Err(CliError::Config(format!(
                "initialization {k} has length {}, expected {}",
                s.dim(),
                net.first_stage_len()
            )));
        }
    }

    let traces: Vec<OptimizationTrace> = starts
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            threehop::optimize(&net, Some(s), tol, max_cycles)
                .map_err(|e| CliError::Numerical(format!("start {k}: {e}")))
        })
        .collect::<CliResult<_>>()?;

    let mut w = csv_writer(args.out.as_deref())?;
    let mut header = vec![
        "start_id".to_string(),
        "iterations".into(),
        "converged".into(),
        "snr".into(),
        "rate_bits".into(),
    ];
    header.extend(gain_header("d1_", net.first_stage_len()));
    header.extend(gain_header("d2_", net.second_stage_len()));
    w.write_record(&header)?;

    let row = |id: String, t: &OptimizationTrace| {
        let mut r = vec![
            id,
            (t.iterations.len() - 1).to_string(),
            t.converged.to_string(),
            fmt.num(t.final_snr),
            fmt.num(rate_bits(t.final_snr)),
        ];
        r.extend(gain_fields(&fmt, &t.final_gains.d1));
        r.extend(gain_fields(&fmt, &t.final_gains.d2));
        r
    };
    for (k, t) in traces.iter().enumerate() {
        if !t.converged {
            eprintln!(
                "relaysim: start {k}: no convergence after {} iterations",
                t.iterations.len() - 1
            );
        }
        w.write_record(row(k.to_string(), t))?;
    }
    let best = traces
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.final_snr.total_cmp(&b.1.final_snr))
        .map(|(i, _)| i)
        .expect("at least one start");
    w.write_record(row("best".into(), &traces[best]))?;
    w.flush()?;

    if let Some(path) = &args.trace {
        let mut tw = csv_writer(Some(path))?;
        tw.write_record(["start_id", "iteration", "direction", "snr"])?;
        for (k, t) in traces.iter().enumerate() {
            for step in &t.iterations {
                tw.write_record([
                    k.to_string(),
                    step.iteration.to_string(),
                    step.direction.to_string(),
                    fmt.num(step.snr),
                ])?;
            }
        }
        tw.flush()?;
    }

    if traces.iter().any(|t| t.converged) {
        Ok(())
    } else {
        Err(CliError::Numerical("no start converged".into()))
    }
}

pub const SWEEP_HEADER: [&str; 7] = [
    "sweep_var",
    "sweep_value",
    "scheme",
    "trials",
    "mean_snr",
    "mean_rate_bits",
    "stderr_rate",
];

/// Streams one row per (grid point, scheme) as points complete.
pub fn cmd_sweep(args: &RunArgs, env_seed: Option<&str>, cfg: SweepConfig) -> CliResult<()> {
    let fmt = NumberFormat::new(args.full_precision, cfg.precision);
    let seed = resolve_seed(args.seed, env_seed, cfg.seed)?;
    let spec = cfg.spec(seed, args.trials)?;
    let var = spec.sweep_variable.as_str();

    let mut w = csv_writer(args.out.as_deref())?;
    w.write_record(SWEEP_HEADER)?;
    w.flush()?;
    let mut io_error = None;
    let result = crate::experiments::run_sweep_with(&spec, |point| {
        if point.redrawn > 0 {
            eprintln!(
                "relaysim: {var}={}: {} trials redrawn",
                point.sweep_value, point.redrawn
            );
        }
        let mut write = || -> CliResult<()> {
            for s in &point.stats {
                w.write_record([
                    var.to_string(),
                    fmt.num(point.sweep_value),
                    s.scheme.to_string(),
                    s.trials.to_string(),
                    fmt.num(s.mean_snr),
                    fmt.num(s.mean_rate_bits),
                    fmt.num(s.stderr_rate),
                ])?;
            }
            w.flush()?;
            Ok(())
        };
        if let Err(e) = write() {
            io_error = Some(e);
            return false;
        }
        !interrupted()
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    let result = result?;
    if result.points.len() < spec.grid.len() {
        w.write_record([var, "", "TRUNCATED", "", "", "", ""])?;
        w.flush()?;
        return Err(CliError::Interrupted);
    }
    Ok(())
}

pub const VERIFY_HEADER: [&str; 5] = ["check_name", "expected", "achieved", "margin", "pass"];

/// Runs the verification suite; any failing row makes the exit code 2.
pub fn cmd_verify(args: &RunArgs, env_seed: Option<&str>, cfg: VerifyConfig) -> CliResult<()> {
    let fmt = NumberFormat::new(args.full_precision, cfg.precision);
    let opts = VerifyOptions {
        trials: args.trials.or(cfg.trials).unwrap_or(crate::experiments::DEFAULT_TRIALS),
        seed: resolve_seed(args.seed, env_seed, cfg.seed)?,
    };
    if opts.trials < 2 {
        return Err(CliError::Config("verify needs at least 2 trials".into()));
    }
    let mut w = csv_writer(args.out.as_deref())?;
    w.write_record(VERIFY_HEADER)?;
    w.flush()?;
    let mut failed = Vec::new();
    let mut io_error = None;
    let complete = run_verify(&opts, |row| {
        if !row.pass {
            failed.push(row.name.clone());
        }
        let written = w
            .write_record([
                row.name.clone(),
                fmt.num(row.expected),
                fmt.num(row.achieved),
                fmt.num(row.margin),
                row.pass.to_string(),
            ])
            .and_then(|_| w.flush().map_err(csv::Error::from));
        if let Err(e) = written {
            io_error = Some(e);
            return false;
        }
        !interrupted()
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    if !complete {
        w.write_record(["TRUNCATED", "", "", "", ""])?;
        w.flush()?;
        return Err(CliError::Interrupted);
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("failed checks: {}", failed.join(", "))))
    }
}
