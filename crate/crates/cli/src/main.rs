use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use czgate::Error;
use czgate_cli::commands::{self, format_report};
use czgate_cli::config::RunConfig;
use czgate_cli::verify;

#[derive(Parser, Debug)]
#[command(name = "czgate", version, about = "Single-step CZ gate simulation for a qubit/bus/qubit device")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides output.dir from the config
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Propagation step in ns; overrides numerics.dt_ns
    #[arg(long, global = true)]
    dt: Option<f64>,

    /// Optimizer seed; overrides optimize.seed
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dressed and bare levels along the configured pulse
    Spectrum,
    /// Propagate the configured pulse and score the gate
    Evolve,
    /// Optimize the configured pulse family
    Optimize,
    /// Print the perturbative estimates
    Analytics,
    /// Run the acceptance criteria
    Verify {
        /// Comma-separated criterion numbers to run
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

// A closed pipe (`czgate ... | head`) is not worth a panic.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(path) = cli.config.as_deref() else {
        eprintln!("error: --config is required");
        return ExitCode::from(EXIT_CONFIG);
    };
    let cfg = match RunConfig::load(path).and_then(|c| c.with_overrides(cli.dt, cli.seed)) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let out = cli.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));

    match cli.command {
        Command::Spectrum => match commands::cmd_spectrum(&cfg, &out) {
            Ok(s) => {
                say!("samples = {}", s.spectrum.times.len());
                say!("ambiguous_assignments = {}", s.spectrum.ambiguous.len());
                for f in &s.files {
                    say!("wrote {}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Evolve => match commands::cmd_evolve(&cfg, &out) {
            Ok(r) => {
                say!("{}", format_report(&r.report).trim_end());
                for f in &r.files {
                    say!("wrote {}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Optimize => match commands::cmd_optimize(&cfg, &out) {
            Ok(r) => {
                say!("{}", format_report(&r.report).trim_end());
                for f in &r.files {
                    say!("wrote {}", f.display());
                }
                if r.result.feasible {
                    ExitCode::SUCCESS
                } else {
                    eprintln!("optimization did not meet the constraints");
                    ExitCode::from(EXIT_FAILURE)
                }
            }
            Err(e) => fail(e),
        },
        Command::Analytics => match commands::cmd_analytics(&cfg) {
            Ok((_, report)) => {
                say!("{}", format_report(&report).trim_end());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Verify { only } => {
            if let Some(bad) = only.iter().find(|c| !verify::CRITERIA.contains(c)) {
                eprintln!("error: no criterion {bad}");
                return ExitCode::from(EXIT_CONFIG);
            }
            match verify::run(&cfg, &only) {
                Ok(report) => {
                    for o in &report.outcomes {
                        say!("{}", o.line());
                    }
                    let ok = report.success();
                    say!("summary result={}", if ok { "PASS" } else { "FAIL" });
                    if ok {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAILURE)
                    }
                }
                Err(e) => fail(e),
            }
        }
    }
}
