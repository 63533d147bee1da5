//! `rramsim` command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 input or format error, 3 constraint
//! failure (`check --strict` only).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use rramsim_core::charlab::{
    build_tables, fit_voltage_response, read_response_points, FitOptions, PulseTrace,
    DEFAULT_SAMPLES_PER_CDF,
};
use rramsim_core::perf::{self, constraint_report, ratios, CoreConfig, Ratios, Variant};
use rramsim_core::train::{
    load_mnist, train_with, write_history, AblationMode, Backend, CrossbarConfig, NetworkConfig,
    PeriodicCarryConfig,
};
use rramsim_core::{DeviceModel, Error};

const MNIST_ENV: &str = "RRAMSIM_MNIST_DIR";

#[derive(Parser)]
#[command(
    name = "rramsim",
    version,
    about = "Analog ReRAM training-core co-design simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Area, energy and latency reports.
    Perf(PerfArgs),
    /// Train the MNIST MLP on float or crossbar weights.
    Train(TrainArgs),
    /// Build conductance tables from pulse traces or fit a voltage response.
    Char(CharArgs),
    /// Electromigration and endurance checks.
    Check(CheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    AnalogReram,
    DigitalReram,
    Sram,
}

impl From<Arch> for Variant {
    fn from(a: Arch) -> Self {
        match a {
            Arch::AnalogReram => Variant::Analog,
            Arch::DigitalReram => Variant::DigitalReram,
            Arch::Sram => Variant::Sram,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Args)]
struct PerfArgs {
    #[arg(
        long,
        value_enum,
        default_value = "analog-reram",
        conflicts_with = "all"
    )]
    arch: Arch,
    #[arg(long, default_value_t = 8, value_parser = parse_bits)]
    bits: u32,
    /// JSON core configuration; missing fields take the reference values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Every architecture at 8, 4 and 2 bits, plus ratios.json.
    #[arg(long)]
    all: bool,
    /// Output file (directory with --all). Single reports go to stdout
    /// when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_bits(s: &str) -> Result<u32, String> {
    match s.parse::<u32>() {
        Ok(b @ (2 | 4 | 8)) => Ok(b),
        _ => Err(format!("'{s}' is not one of 8, 4, 2")),
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Numeric,
    Crossbar,
    PeriodicCarry,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    NoNoise,
    Linearized,
    Numeric,
}

impl From<ModeArg> for AblationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => AblationMode::Full,
            ModeArg::NoNoise => AblationMode::NoNoise,
            ModeArg::Linearized => AblationMode::Linearized,
            ModeArg::Numeric => AblationMode::Numeric,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "numeric")]
    backend: BackendArg,
    #[arg(long, value_enum, default_value = "full")]
    mode: ModeArg,
    /// Device model or conductance table JSON. Defaults to the built-in
    /// strongly nonlinear analytic device.
    #[arg(long)]
    device: Option<PathBuf>,
    #[arg(long, env = MNIST_ENV, default_value = "data/mnist")]
    mnist: PathBuf,
    /// JSON with optional `network`, `crossbar` and `carry` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    train_subset: Option<usize>,
    #[arg(long)]
    test_subset: Option<usize>,
    #[arg(long)]
    carry_threshold: Option<f64>,
    #[arg(long)]
    carry_interval: Option<u64>,
    /// Directory for history.csv and summary.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFile {
    network: NetworkConfig,
    crossbar: CrossbarConfig,
    carry: PeriodicCarryConfig,
}

#[derive(Args)]
struct CharArgs {
    /// Pulse-train trace CSV (optionally gzipped).
    #[arg(long, required_unless_present = "fit_voltage")]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(2..))]
    bins: u32,
    /// Voltage response data: `voltage,mean_dg` CSV or a pulse trace.
    #[arg(long, conflicts_with = "trace")]
    fit_voltage: Option<PathBuf>,
    /// Values at or below this |ΔG| are treated as dead zone in the fit.
    #[arg(long, default_value_t = 0.0)]
    floor: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Exit with code 3 when any constraint fails.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Input(Error),
    Constraint(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let res = match cli.command {
        Command::Perf(a) => cmd_perf(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Char(a) => cmd_char(&a),
        Command::Check(a) => cmd_check(&a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Constraint(msg)) => {
            eprintln!("constraint violated: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load_core_config(path: Option<&Path>) -> Result<CoreConfig, Error> {
    match path {
        Some(p) => CoreConfig::load(p),
        None => Ok(CoreConfig::default()),
    }
}

fn render(report: &perf::CostReport, format: Format) -> Result<Vec<u8>, Error> {
    match format {
        Format::Json => {
            let mut s = report.to_json()?;
            s.push('\n');
            Ok(s.into_bytes())
        }
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            Ok(buf)
        }
    }
}

#[derive(Serialize)]
struct RatioEntry {
    bits: u32,
    #[serde(flatten)]
    ratios: Ratios,
}

fn cmd_perf(a: &PerfArgs) -> CmdResult {
    let base = load_core_config(a.config.as_deref())?;
    if !a.all {
        let cfg = base.with_bits(a.bits)?;
        let bytes = render(&perf::report(&cfg, a.arch.into())?, a.format)?;
        match &a.out {
            Some(p) => fs::write(p, bytes)?,
            None => io::stdout().write_all(&bytes)?,
        }
        return Ok(());
    }
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("perf-report"));
    fs::create_dir_all(&dir)?;
    let mut summary = Vec::new();
    for bits in [8, 4, 2] {
        let cfg = base.with_bits(bits)?;
        for v in Variant::ALL {
            let name = format!("{}_{bits}bit.{}", v.as_str(), a.format.ext());
            fs::write(dir.join(name), render(&perf::report(&cfg, v)?, a.format)?)?;
        }
        summary.push(RatioEntry {
            bits,
            ratios: ratios(&cfg)?,
        });
    }
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(dir.join("ratios.json"), json)?;
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> CmdResult {
    let file: TrainFile = match &a.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => TrainFile::default(),
    };
    let mut cfg = file.network;
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(lr) = a.lr {
        cfg.learning_rate = lr;
    }
    if a.train_subset.is_some() {
        cfg.train_subset = a.train_subset;
    }
    if a.test_subset.is_some() {
        cfg.test_subset = a.test_subset;
    }
    let mut xbar = file.crossbar;
    if let Some(d) = &a.device {
        xbar.device = DeviceModel::load(d)?;
    }
    let mut carry = file.carry;
    if let Some(t) = a.carry_threshold {
        carry.carry_threshold = t;
    }
    if let Some(i) = a.carry_interval {
        carry.carry_interval = i;
    }
    let mode = a.mode.into();
    let backend = match a.backend {
        BackendArg::Numeric => Backend::Numeric,
        BackendArg::Crossbar => Backend::Crossbar { xbar, mode },
        BackendArg::PeriodicCarry => Backend::PeriodicCarry { xbar, mode, carry },
    };
    let data = load_mnist(&a.mnist)?;
    let quiet = a.quiet;
    let outcome = train_with(&cfg, &backend, &data, |r| {
        if !quiet {
            eprintln!(
                "epoch {:>3}  train {:.4}  test {:.4}",
                r.epoch, r.train_acc, r.test_acc
            );
        }
    })?;
    fs::create_dir_all(&a.out)?;
    write_history(
        &outcome.history,
        fs::File::create(a.out.join("history.csv"))?,
    )?;
    let mut json = serde_json::to_string_pretty(&outcome.summary)?;
    json.push('\n');
    fs::write(a.out.join("summary.json"), json)?;
    if !quiet {
        eprintln!("final test accuracy {:.4}", outcome.summary.final_test_acc);
    }
    Ok(())
}

fn cmd_char(a: &CharArgs) -> CmdResult {
    if let Some(src) = &a.fit_voltage {
        let report =
            fit_voltage_response(&read_response_points(src)?, &FitOptions { floor: a.floor })?;
        let mut json = report.to_json()?;
        json.push('\n');
        fs::write(&a.out, json)?;
        return Ok(());
    }
    let Some(trace_path) = &a.trace else {
        unreachable!("clap requires --trace or --fit-voltage")
    };
    let trace = PulseTrace::read(trace_path)?;
    let tables = build_tables(&trace, a.bins as usize, DEFAULT_SAMPLES_PER_CDF)?;
    if tables.len() == 1 {
        let mut json = tables[0].1.to_json()?;
        json.push('\n');
        fs::write(&a.out, json)?;
        return Ok(());
    }
    let stem = a
        .out
        .file_stem()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned();
    for (key, table) in &tables {
        let name = format!(
            "{stem}_{}V_{}V_{}ns.json",
            key.set_voltage, key.reset_voltage, key.width_ns
        );
        let mut json = table.to_json()?;
        json.push('\n');
        fs::write(a.out.with_file_name(name), json)?;
    }
    Ok(())
}

fn cmd_check(a: &CheckArgs) -> CmdResult {
    let cfg = load_core_config(a.config.as_deref())?;
    let report = constraint_report(&cfg)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    match &a.out {
        Some(p) => fs::write(p, &json)?,
        None => io::stdout().write_all(json.as_bytes())?,
    }
    if a.strict {
        let failed: Vec<&str> = [
            ("electromigration", report.electromigration.pass),
            ("endurance (worst case)", report.endurance_worst.pass),
            ("endurance (typical)", report.endurance_typical.pass),
        ]
        .into_iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| name)
        .collect();
        if !failed.is_empty() {
            return Err(Failure::Constraint(failed.join(", ")));
        }
    }
    Ok(())
}
