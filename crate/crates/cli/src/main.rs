use std::process::ExitCode;

use clap::Parser;
use potlib_cli::{run, Command, Failure};

/// Experiments in nonlinear potential theory on weighted graphs.
#[derive(Debug, Parser)]
#[command(name = "potlib", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("POTLIB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Validation(format!("POTLIB_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Validation(format!("cannot size the worker pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = threads().and_then(|_| run(&cli.command)).and_then(|outcome| {
        let files = outcome.artifacts.write(&outcome.out)?;
        if let Some(seed) = outcome.artifacts.report["settings"]["seed"].as_u64() {
            eprintln!("{} seed {seed}", cli.command.name());
        }
        let summary = serde_json::json!({
            "status": if outcome.verdict.is_ok() { "ok" } else { "failed" },
            "command": cli.command.name(),
            "files": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
        });
        println!("{summary}");
        outcome.verdict
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.diagnostic());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
