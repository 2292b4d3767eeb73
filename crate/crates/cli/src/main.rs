use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use selroute::sim::Mode;
use selroute_cli::config::Format;
use selroute_cli::{resolve, run, CliError, Command, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "selroute",
    version,
    about = "Selection-region routing experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: CommandArg,

    /// JSON experiment config (a previous run's sidecar also works).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed of the Monte Carlo streams.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output table path; defaults to `<command>.csv` (or `.json`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Monte Carlo trials per estimate.
    #[arg(long, global = true)]
    trials: Option<u64>,

    /// Hop success model.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum CommandArg {
    /// Analytic density of progress over a (φ, r_m) grid.
    Surface,
    /// Optimal selection region over a sweep of p.
    Optimize,
    /// Monte Carlo comparison of relay protocols.
    Compare,
    /// Run the validation suites; exits with 1 on any failed check.
    Validate,
    /// Trace one multi-hop route.
    Route,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Surface => Command::Surface,
            CommandArg::Optimize => Command::Optimize,
            CommandArg::Compare => Command::Compare,
            CommandArg::Validate => Command::Validate,
            CommandArg::Route => Command::Route,
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum ModeArg {
    Semi,
    Physical,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(contents))
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    out.with_file_name(name)
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let command = Command::from(cli.command);
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    if let Some(mode) = cli.mode {
        cfg.mode = match mode {
            ModeArg::Semi => Mode::SemiAnalytic,
            ModeArg::Physical => Mode::Physical,
        };
    }
    if let Some(out) = &cli.out {
        cfg.output.path = Some(out.clone());
    }
    let extension = match cfg.output.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let out = cfg
        .output
        .path
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.{extension}", command.name())));
    cfg.output.path = Some(out.clone());

    let output = run(command, &cfg)?;
    let body = match cfg.output.format {
        Format::Csv => output.table.to_csv_string()?,
        Format::Json => output.table.to_json_string()?,
    };
    write_file(&out, body.as_bytes())?;
    let sidecar = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": resolve(command, &cfg),
        "rows": output.table.len(),
        "summary": output.summary,
    });
    write_file(
        &sidecar_path(&out),
        serde_json::to_string_pretty(&sidecar)?.as_bytes(),
    )?;
    eprintln!("wrote {} rows to {}", output.table.len(), out.display());
    Ok(output.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
