//! `cbs`: spectra and intensities of coherent backscattering by two driven atoms.

mod config;
mod output;
mod run;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Format, RawConfig, SCHEMA};
use run::{Mode, RunError};

#[derive(Parser, Debug)]
#[command(name = "cbs", version, about = "Coherent backscattering spectra of two laser-driven atoms")]
struct Cli {
    #[command(subcommand)]
    mode: ModeArgs,
}

#[derive(Subcommand, Debug)]
enum ModeArgs {
    /// Stationary intensities over a log grid of Rabi frequencies.
    IntensitySweep(Common),
    /// Ladder and crossed inelastic spectra on a frequency grid.
    Spectrum(Common),
    /// Numeric intensities next to their closed forms at zero detuning.
    CompareOracles(Common),
    /// Crossed-to-ladder ratio around exact backscattering.
    Cone(Common),
    /// List the accepted configuration keys.
    Keys,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Configuration file with one `key = value` per line.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Reuse the inputs recorded in the header of a previous output.
    #[arg(long)]
    from_header: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set detuning=20`. Repeatable.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    rabi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    detuning: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    nu_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    nu_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
}

fn load(common: &Common) -> Result<RawConfig, RunError> {
    let read = |p: &PathBuf| {
        fs::read_to_string(p).map_err(|e| RunError::Config(format!("cannot read {}: {e}", p.display())))
    };
    let mut raw = RawConfig::default();
    if let Some(p) = &common.from_header {
        raw.merge(&RawConfig::from_header(&read(p)?)?);
    }
    if let Some(p) = &common.config {
        raw.merge(&RawConfig::parse(&read(p)?)?);
    }
    let mut flags = RawConfig::default();
    for item in &common.overrides {
        let Some((k, v)) = item.split_once('=') else {
            return Err(RunError::Config(format!("--set expects KEY=VALUE, got '{item}'")));
        };
        flags.set(k.trim(), v.trim())?;
    }
    let named = [
        ("rabi", common.rabi.map(|v| v.to_string())),
        ("detuning", common.detuning.map(|v| v.to_string())),
        ("nu_min", common.nu_min.map(|v| v.to_string())),
        ("nu_max", common.nu_max.map(|v| v.to_string())),
        ("points", common.points.map(|v| v.to_string())),
        ("normalize", common.normalize.then(|| "true".to_string())),
        ("seed", common.seed.map(|v| v.to_string())),
        ("format", common.format.clone()),
        ("output", common.output.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in named {
        if let Some(v) = v {
            flags.set(k, &v)?;
        }
    }
    raw.merge(&flags);
    Ok(raw)
}

fn execute(mode: Mode, common: &Common) -> Result<(), RunError> {
    let raw = load(common)?;
    let seed: u64 = raw.parsed("seed")?.unwrap_or(0);
    let format: Format = raw.parsed("format")?.unwrap_or(Format::Csv);
    let output = raw.get("output").map(PathBuf::from);
    log::info!("running {} with seed {seed}", mode.name());
    let table = run::run(mode, &raw, seed)?;
    let io_err = |e: std::io::Error| RunError::Config(format!("cannot write output: {e}"));
    match output {
        Some(path) => {
            let mut buf = Vec::new();
            table.write(format, &mut buf).map_err(io_err)?;
            fs::write(&path, buf).map_err(io_err)?;
        }
        None => {
            let mut lock = std::io::stdout().lock();
            let written = table.write(format, &mut lock).and_then(|_| lock.flush());
            match written {
                // a closed pipe (`| head`) is not an error
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r.map_err(io_err)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (mode, common) = match cli.mode {
        ModeArgs::IntensitySweep(c) => (Mode::IntensitySweep, c),
        ModeArgs::Spectrum(c) => (Mode::Spectrum, c),
        ModeArgs::CompareOracles(c) => (Mode::CompareOracles, c),
        ModeArgs::Cone(c) => (Mode::Cone, c),
        ModeArgs::Keys => {
            let mut out = std::io::stdout().lock();
            for (k, d) in SCHEMA {
                if writeln!(out, "{k:20} {d}").is_err() {
                    break;
                }
            }
            return ExitCode::SUCCESS;
        }
    };
    match execute(mode, &common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
