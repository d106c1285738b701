use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tli::{parse_config, run_command, Command, RunConfig};
use tli_core::Method;

#[derive(Parser)]
#[command(name = "tli", version, about = "Talbot-Lau electron interferometer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Configuration file (`[section]` / `key = value`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write CSV here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Point sources across the first slit.
    #[arg(long, global = true)]
    sources: Option<usize>,

    /// Grid samples per grating period.
    #[arg(long, global = true)]
    grid: Option<usize>,

    #[arg(long, global = true, value_enum)]
    propagator: Option<Propagator>,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Wavelength, Talbot length and resonance energies.
    Kinematics,
    /// Fringe contrast versus beam energy.
    SweepEnergy,
    /// Throughput versus cradle current.
    SweepField,
    /// Throughput versus third-grating offset.
    Fringe,
    /// Counts of the 10 s on / 10 s off field step.
    Step,
    /// Shot-noise sensitivity at the operating point.
    Sensitivity,
    /// Projected sensitivity of a scaled device.
    Scale,
    /// Sampling check of every propagation leg.
    Validate,
}

#[derive(ValueEnum, Clone, Copy)]
enum Propagator {
    Direct,
    Paraxial,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Kinematics => Command::Kinematics,
            Cmd::SweepEnergy => Command::SweepEnergy,
            Cmd::SweepField => Command::SweepField,
            Cmd::Fringe => Command::Fringe,
            Cmd::Step => Command::Step,
            Cmd::Sensitivity => Command::Sensitivity,
            Cmd::Scale => Command::Scale,
            Cmd::Validate => Command::Validate,
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.sources {
        anyhow::ensure!(n >= 1, "--sources must be >= 1");
        cfg.n_sources = n;
    }
    if let Some(n) = cli.grid {
        anyhow::ensure!(n >= 2, "--grid must be >= 2");
        cfg.samples_per_period = n;
    }
    if let Some(p) = cli.propagator {
        cfg.propagator = match p {
            Propagator::Direct => Method::Direct,
            Propagator::Paraxial => Method::Paraxial,
        };
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load(&cli)?;
    if cli.print_config {
        print!("{cfg}");
        return Ok(());
    }
    let table = run_command(cli.command.into(), &cfg)?;
    match &cfg.output {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            table.write_csv(&mut w)?;
            w.flush()?;
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tli: {e:#}");
            ExitCode::FAILURE
        }
    }
}
