use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ptkr_cli::config::load_layers;
use ptkr_cli::{run_experiment, CliError, ExperimentConfig, Format, Kind};

/// Run a kicked-rotor experiment and write its series.
#[derive(Debug, Parser)]
#[command(name = "ptkr", version)]
struct Args {
    kind: Kind,

    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,

    #[arg(long, default_value = "ptkr-out")]
    out: PathBuf,

    /// Worker threads (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn run(args: Args) -> Result<(), CliError> {
    let mut map = load_layers(args.config.as_deref(), &args.sets)?;
    if let Some(seed) = args.seed {
        map.insert("seed".into(), seed.to_string());
    }
    if let Some(format) = args.format {
        map.insert("format".into(), format.extension().into());
    }
    let cfg = ExperimentConfig::from_map(args.kind, &map, args.out)?;
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(CliError::config("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    let manifest = run_experiment(&cfg)?;
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{} run {} finished in {:.2} s; wrote {} files to {}",
        manifest.kind,
        &manifest.config_hash[..12],
        manifest.wall_clock_seconds,
        manifest.files.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
