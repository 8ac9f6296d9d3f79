use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sidelink_cli::config::{echo_config, parse_config};
use sidelink_cli::output::write_atomic;
use sidelink_cli::sweep::{run_sweep, RunSpec};
use sidelink_cli::{exit, ConfigError};
use sidelink_core::{Format, Policy, SimConfig};

#[derive(Parser)]
#[command(name = "sidelink", version, about = "Mode-4 sidelink SPS simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its PRR table.
    Run(RunArgs),
    /// Run a grid of settings over several seeds.
    Sweep(SweepArgs),
    /// Check a config file; optionally print it fully resolved.
    Validate {
        config: PathBuf,
        #[arg(long)]
        echo: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Args)]
struct Common {
    /// TOML config file. Omitted keys take reference values.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Shorter road and run, for quick experiments. Ignored with --config.
    #[arg(long, conflicts_with = "config")]
    desk_scale: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

impl Common {
    fn load(&self) -> Result<SimConfig, ConfigError> {
        match &self.config {
            Some(p) => parse_config(p),
            None if self.desk_scale => Ok(SimConfig::desk_scale()),
            None => Ok(SimConfig::default()),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    p_keep: Option<f64>,
    #[arg(long)]
    policy: Option<Policy>,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    p_keep: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    policy: Vec<Policy>,
    /// Explicit seed list.
    #[arg(long, value_delimiter = ',', conflicts_with = "seed_count")]
    seeds: Vec<u64>,
    /// Use seeds 1..=N.
    #[arg(long)]
    seed_count: Option<u64>,
    #[arg(short, long, env = "SIDELINK_OUT_DIR", default_value = "sidelink-out")]
    out_dir: PathBuf,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn config_check(cfg: &SimConfig) -> Result<(), Failure> {
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let mut cfg = a.common.load()?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(x) = a.alpha {
        cfg.sps.alpha = x;
    }
    if let Some(x) = a.p_keep {
        cfg.sps.p_keep = x;
    }
    if let Some(p) = a.policy {
        cfg.sps.policy = p;
    }
    config_check(&cfg)?;
    let report = sidelink_core::run(cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
    let bytes = report
        .serialize(a.common.format.into())
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    match a.output {
        Some(p) => write_atomic(&p, &bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(|e| Failure::Runtime(e.to_string()))
        }
    }
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let base = a.common.load()?;
    let seeds = match (a.seeds.is_empty(), a.seed_count) {
        (false, _) => a.seeds,
        (true, Some(n)) => (1..=n).collect(),
        (true, None) => vec![base.seed],
    };
    let spec = RunSpec {
        base,
        seeds,
        output_dir: a.out_dir,
        format: a.common.format.into(),
        alphas: a.alpha,
        p_keeps: a.p_keep,
        policies: a.policy,
    };
    spec.validate().map_err(Failure::Config)?;
    for point in spec.points() {
        config_check(&point.apply(&spec.base, spec.seeds[0]))?;
    }
    let outcome = run_sweep(&spec).map_err(Failure::Runtime)?;
    for f in &outcome.failures {
        eprintln!("run {} failed: {}", f.point.file_stem(f.seed), f.message);
    }
    eprintln!(
        "{} files written to {}",
        outcome.files.len(),
        spec.output_dir.display()
    );
    if outcome.success() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("{} of the runs failed", outcome.failures.len())))
    }
}

fn cmd_validate(path: &Path, echo: bool) -> Result<(), Failure> {
    let cfg = parse_config(path)?;
    if echo {
        print!("{}", echo_config(&cfg)?);
    } else {
        eprintln!("{}: ok", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Validate { config, echo } => cmd_validate(&config, echo),
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(exit::CONFIG as u8)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(exit::RUNTIME as u8)
        }
    }
}
