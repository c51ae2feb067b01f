use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;
use microtruss::io::{run, RunConfig};
use microtruss::Error;

/// Adaptive two-scale compliance optimization with rotated-truss cells and
/// modeling-error estimates against nested laminates.
#[derive(Debug, Parser)]
#[command(name = "microtruss", version)]
struct Args {
    /// TOML run configuration; omitted keys take their defaults.
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set steps=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn config(args: &Args) -> microtruss::Result<RunConfig> {
    let mut c = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for assignment in &args.overrides {
        c.set(assignment)?;
    }
    if let Some(dir) = &args.output {
        c.output_dir = dir.clone();
    }
    Ok(c)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let config = match config(&args) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            eprintln!("configuration error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&config) {
        Ok(summary) => {
            println!("{}", microtruss::io::INDICATOR_HEADER);
            for r in &summary.rows {
                println!(
                    "{},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                    r.step, r.edge, r.volume, r.model, r.total, r.compliance, r.elements
                );
            }
            match summary.recommended_stop {
                Some(k) => println!("recommended stop: step {k}"),
                None => println!("recommended stop: none"),
            }
            println!("output written to {}", summary.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e @ (Error::Config { .. } | Error::Parse(_))) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            error!("{e}");
            eprintln!("run failed: {e}");
            ExitCode::from(2)
        }
    }
}
