use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use bundleflow::cli_io::{error_kind, exit_code, run, Command, RunConfig, EXIT_VERIFY_FAILED};
use bundleflow::Error;

#[derive(Parser, Debug)]
#[command(name = "bundleflow", version, about = "Ricci flow on principal bundles")]
struct Cli {
    /// curvature, flow-ode, flow-be, flow-bundle, verify or plot
    command: String,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: current directory)
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Run a single verification check
    #[arg(long)]
    check: Option<String>,
}

fn threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("BUNDLEFLOW_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("BUNDLEFLOW_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn execute(cli: &Cli) -> Result<bool, Error> {
    threads()?;
    let command = Command::parse(&cli.command)?;
    let cfg = RunConfig::load(&cli.config)?;
    if cfg.command != command {
        return Err(Error::Config(format!("config is for {:?}, command line asks for {}", cfg.command, cli.command)));
    }
    let started = std::time::Instant::now();
    let outcome = run(&cfg, &cli.out, cli.check.as_deref())?;
    for c in &outcome.checks {
        println!("{}", c.line());
    }
    for a in &outcome.artifacts {
        println!("wrote {}", a.display());
    }
    eprintln!("elapsed {:.3}s", started.elapsed().as_secs_f64());
    Ok(outcome.all_passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.kind() == clap::error::ErrorKind::DisplayHelp || e.kind() == clap::error::ErrorKind::DisplayVersion => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY_FAILED as u8),
        Err(e) => {
            let report = serde_json::json!({ "error": error_kind(&e), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
