use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phasefilter_cli::config::ScenarioConfig;
use phasefilter_cli::engine;
use phasefilter_cli::error::{io_err, CliError};
use phasefilter_cli::verify::{run_suite, Suite};

#[derive(Parser)]
#[command(
    name = "phasefilter",
    version,
    about = "Quantum phase-space filters and the phase-space SIDE grid"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its outputs.
    Run {
        config: PathBuf,
        /// Overrides the seed of the innovation path.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to `run.out` or `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite and print one JSON line per check.
    Verify {
        /// core, filters, side or all.
        suite: String,
    },
    /// Validate a scenario and print the resolved manifest.
    Inspect { config: PathBuf },
}

fn load(path: &Path, seed: Option<u64>) -> Result<phasefilter_cli::config::Scenario, CliError> {
    let (mut cfg, text) = ScenarioConfig::load(path)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    cfg.build(&text, &path.display().to_string())
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let scn = load(config, seed)?;
    let dir = out
        .or_else(|| scn.config.run.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    log::info!(
        "running {} for {} steps into {}",
        config.display(),
        scn.steps,
        dir.display()
    );
    let outputs = engine::execute(&scn)?;
    engine::write_outputs(&scn, &outputs, &dir)?;
    println!(
        "{}",
        serde_json::to_string(&outputs.summary).map_err(|e| io_err("summary", e))?
    );
    Ok(())
}

fn verify(suite: &str) -> Result<bool, CliError> {
    let Some(suites) = Suite::parse(suite) else {
        return Err(CliError::Config {
            path: "verify".into(),
            line: None,
            key: "suite".into(),
            message: format!("unknown suite {suite:?}; expected core, filters, side or all"),
        });
    };
    let mut ok = true;
    for s in suites {
        for c in run_suite(s) {
            ok &= c.pass;
            println!(
                "{}",
                serde_json::to_string(&c).map_err(|e| io_err("report", e))?
            );
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result =
        match cli.command {
            Command::Run { config, seed, out } => run(&config, seed, out).map(|_| true),
            Command::Verify { suite } => verify(&suite),
            Command::Inspect { config } => load(&config, None)
                .and_then(|s| engine::manifest(&s))
                .map(|m| {
                    print!("{m}");
                    true
                }),
        };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
