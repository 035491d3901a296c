use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qslb::checks;
use qslb::cli::{self, CliError, Format, Method, Overrides, RunConfig};

/// Exact non-Markovian dynamics, bound states and quantum speed limits of a
/// two-level emitter in a bosonic bath.
#[derive(Parser)]
#[command(name = "qslb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one parameter point and write the trajectory and report.
    Solve(Common),
    /// Sweep one parameter axis.
    Sweep(Common),
    /// Two-axis grid with the analytic critical boundary.
    PhaseDiagram(Common),
    /// Bound states or the full eigenvalue table.
    Spectrum(Common),
    /// Run the fast acceptance checks.
    Selftest,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (falls back to QSLB_DEFAULT_JOBS, then the core count).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Override a config key, e.g. `--set environment.eta=0.05`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let overrides = Overrides {
            out_dir: self.out.clone(),
            method: self.method,
            format: self.format,
            set: self.set.clone(),
        };
        match &self.config {
            Some(path) => RunConfig::from_file(path, &overrides),
            None => RunConfig::from_str_with("", None, &overrides),
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Solve(c) => {
            let cfg = c.load()?;
            for path in cli::cmd_solve(&cfg)? {
                println!("{}", path.display());
            }
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            let (path, _) = cli::cmd_sweep(&cfg, cli::resolve_jobs(c.jobs))?;
            println!("{}", path.display());
        }
        Command::PhaseDiagram(c) => {
            let cfg = c.load()?;
            let (path, _) = cli::cmd_phase_diagram(&cfg, cli::resolve_jobs(c.jobs))?;
            println!("{}", path.display());
        }
        Command::Spectrum(c) => {
            let cfg = c.load()?;
            let (path, _) = cli::cmd_spectrum(&cfg, cli::resolve_jobs(c.jobs))?;
            println!("{}", path.display());
        }
        Command::Selftest => {
            let outcomes = checks::fast_suite();
            for o in &outcomes {
                println!("{}", o.line());
            }
            let failures = outcomes.iter().filter(|o| !o.passed).count();
            if failures > 0 {
                return Err(CliError::Numerical(format!(
                    "{failures} self-check(s) failed"
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors are configuration errors (exit 1), not clap's default 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qslb: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
