use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mfe_core::config::{RunConfig, Task};
use mfe_core::run::run;
use mfe_core::Error;

/// Fish-eye lens cavity QED simulator.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// simulate | modes | optimize | rwa_check | raypath
    task: String,
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(args: &Args) -> Result<(), Error> {
    let task: Task = args.task.parse()?;
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter {
                name: "threads".into(),
                reason: e.to_string(),
            })?;
    }
    let text = std::fs::read_to_string(&args.config)?;
    let mut config = RunConfig::parse(&text)?;
    // The task argument selects which part of the configuration runs.
    config.task = task;
    config.validate()?;
    let summary = run(&config, &args.out)?;
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({
                "error": e.code(),
                "message": e.to_string(),
                "key": e.key(),
            });
            eprintln!("{body}");
            // best effort copy next to the other outputs
            if std::fs::create_dir_all(&args.out).is_ok() {
                let _ = std::fs::write(args.out.join("error.json"), format!("{body}\n"));
            }
            ExitCode::FAILURE
        }
    }
}
