//! `floatsim sweep|scenario|threshold <config> --out <dir>`.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 numerical
//! divergence, 3 invalid threshold bracket.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigFile;
use crate::error::SimError;
use crate::fmt::sci;
use crate::parallel::{ordered_map, threads_from_env};
use crate::scenario::{
    comparison_table, min_sliding_force_search, run_scenario, ComparisonRow, Method,
};
use crate::sim1d::run_sweep;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIVERGENCE: i32 = 2;
pub const EXIT_BRACKET: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "floatsim",
    version,
    about = "Compliant alignment against a free-floating target"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// 1-DOF contact sweep over one manipulator parameter.
    Sweep(RunArgs),
    /// Planar chase/contact/alignment run for every configured method.
    Scenario(RunArgs),
    /// Bisection for the smallest reference force that still aligns.
    Threshold(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Configuration file.
    #[arg(required_unless_present = "dump_defaults")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, required_unless_present = "dump_defaults")]
    pub out: Option<PathBuf>,
    /// Overrides the sensor noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    pub dump_defaults: bool,
}

#[derive(Debug)]
enum Failure {
    Sim(SimError),
    Io(PathBuf, io::Error),
    /// Diagnostics already printed; carries the exit code.
    Reported(i32),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Sim(e)
    }
}

pub fn exit_code(e: &SimError) -> i32 {
    match e {
        e if e.is_divergence() => EXIT_DIVERGENCE,
        SimError::InvalidBracket(_) => EXIT_BRACKET,
        _ => EXIT_CONFIG,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (args, kind) = match &cli.command {
        Command::Sweep(a) => (a, "sweep"),
        Command::Scenario(a) => (a, "scenario"),
        Command::Threshold(a) => (a, "threshold"),
    };
    match execute(&cli.command, args) {
        Ok(()) => EXIT_OK,
        Err(Failure::Sim(e)) => {
            eprintln!("floatsim {kind}: {e}");
            exit_code(&e)
        }
        Err(Failure::Io(p, e)) => {
            eprintln!("floatsim {kind}: {}: {e}", p.display());
            EXIT_CONFIG
        }
        Err(Failure::Reported(code)) => code,
    }
}

fn execute(cmd: &Command, args: &RunArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if args.dump_defaults {
        print!("{}", cfg.dump());
        return Ok(());
    }
    let out = args.out.as_deref().expect("clap requires --out");
    fs::create_dir_all(out).map_err(|e| Failure::Io(out.to_path_buf(), e))?;
    let threads = threads_from_env();
    match cmd {
        Command::Sweep(_) => cmd_sweep(&cfg, out, threads),
        Command::Scenario(_) => cmd_scenario(&cfg, out, threads),
        Command::Threshold(_) => cmd_threshold(&cfg, out, threads),
    }
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), Failure> {
    let io = |e| Failure::Io(path.to_path_buf(), e);
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    body(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

fn cmd_sweep(cfg: &ConfigFile, out: &Path, threads: usize) -> Result<(), Failure> {
    let spec = &cfg.sweep;
    spec.validate()?;
    let traces = run_sweep(spec, threads)?;
    let name = spec.varied_field.name();
    let mut summary = String::from(
        "index,value,peak_force,min_force,break_count,break_intervals,log_decrement\n",
    );
    for (i, tr) in traces.iter().enumerate() {
        write_file(&out.join(format!("{name}_{i:02}.csv")), |w| tr.write_csv(w))?;
        let breaks = tr.breaks();
        let intervals = breaks
            .iter()
            .map(|(a, b)| format!("{}:{}", sci(*a), sci(*b)))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            summary,
            "{i},{},{},{},{},{intervals},{}",
            sci(tr.value),
            sci(tr.peak_force()),
            sci(tr.min_force()),
            breaks.len(),
            tr.log_decrement().map(sci).unwrap_or_else(|| "none".into())
        );
    }
    write_file(&out.join("summary.csv"), |w| {
        w.write_all(summary.as_bytes())
    })
}

fn cmd_scenario(cfg: &ConfigFile, out: &Path, threads: usize) -> Result<(), Failure> {
    let configs = cfg.scenarios();
    for c in &configs {
        c.validate()?;
    }
    let results = ordered_map(&configs, threads, run_scenario);
    let mut rows = Vec::new();
    let mut first_err = None;
    for (c, r) in configs.iter().zip(results) {
        match r {
            Ok(o) => {
                write_file(&out.join(format!("{}_trace.csv", c.label)), |w| {
                    o.trace.write_csv(w)
                })?;
                let head = format!("label={}\nmethod={}\n", c.label, c.method.name());
                write_file(&out.join(format!("{}_metrics.txt", c.label)), |w| {
                    w.write_all(head.as_bytes())?;
                    w.write_all(o.metrics.to_kv().as_bytes())
                })?;
                rows.push(ComparisonRow {
                    label: c.label.clone(),
                    method: c.method,
                    result: Ok(o.metrics),
                });
            }
            Err(e) => {
                first_err.get_or_insert_with(|| e.clone());
                rows.push(ComparisonRow {
                    label: c.label.clone(),
                    method: c.method,
                    result: Err(e),
                });
            }
        }
    }
    let table = comparison_table(&rows);
    write_file(&out.join("comparison.csv"), |w| {
        w.write_all(table.as_bytes())
    })?;
    first_err.map_or(Ok(()), |e| Err(e.into()))
}

fn cmd_threshold(cfg: &ConfigFile, out: &Path, threads: usize) -> Result<(), Failure> {
    let t = &cfg.threshold;
    let configs: Vec<_> = cfg
        .scenarios()
        .into_iter()
        .filter(|c| {
            if !t.runs.is_empty() {
                return t.runs.contains(&c.label);
            }
            let keep = c.method != Method::ImpedanceOnly;
            if !keep {
                log::info!(
                    "skipping `{}`: impedance control has no force reference",
                    c.label
                );
            }
            keep
        })
        .collect();
    if configs.is_empty() {
        return Err(SimError::Config {
            line: 0,
            message: "no force-controlled run to search".into(),
        }
        .into());
    }
    for c in &configs {
        c.validate()?;
    }
    let results = ordered_map(&configs, threads, |c| {
        min_sliding_force_search(c, t.f_lo, t.f_hi, t.resolution)
    });
    let mut summary = String::from("label,method,bracket_lo,bracket_hi\n");
    let mut first_err = None;
    for (c, r) in configs.iter().zip(results) {
        match r {
            Ok(res) => {
                let log = res.log();
                write_file(&out.join(format!("{}_threshold.csv", c.label)), |w| {
                    w.write_all(log.as_bytes())
                })?;
                let _ = writeln!(
                    summary,
                    "{},{},{},{}",
                    c.label,
                    c.method.name(),
                    sci(res.bracket.0),
                    sci(res.bracket.1)
                );
            }
            Err(e) => {
                eprintln!("floatsim threshold: {}: {e}", c.label);
                first_err.get_or_insert(exit_code(&e));
            }
        }
    }
    write_file(&out.join("thresholds.csv"), |w| {
        w.write_all(summary.as_bytes())
    })?;
    first_err.map_or(Ok(()), |code| Err(Failure::Reported(code)))
}
