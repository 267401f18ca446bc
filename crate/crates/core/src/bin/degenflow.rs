use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, LevelFilter};

use degenflow::experiment::{export_csv, run_experiment, ExperimentConfig};
use degenflow::Error;

#[derive(Parser)]
#[command(name = "degenflow", version, about = "Degenerate elliptic flux lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, default_value = "info")]
    log_level: LevelFilter,
    /// Thread hint; every stage runs sequentially and results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline of an experiment config.
    Run { config: PathBuf },
    /// Check a config without computing anything.
    Validate { config: PathBuf },
    /// Print a field file as CSV, or write `<stem>.csv` into `--out-dir`.
    ExportCsv { field: PathBuf },
}

fn load(path: &Path, out_dir: &Option<PathBuf>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(dir) = out_dir {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        info!("thread hint {n}; stages run sequentially");
    }
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(config, &cli.out_dir)?;
            let report = run_experiment(&cfg)?;
            info!("wrote {} artifacts to {}", report.manifest.artifacts.len(), report.output_dir.display());
        }
        Command::Validate { config } => {
            load(config, &cli.out_dir)?.validate()?;
            info!("{} is valid", config.display());
        }
        Command::ExportCsv { field } => {
            let csv = export_csv(field).map_err(|e| match e {
                Error::Io(io) => Error::ConfigInvalid(format!("cannot read {}: {io}", field.display())),
                other => other,
            })?;
            match &cli.out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    let stem = field.file_stem().map_or("field".into(), |s| s.to_string_lossy().into_owned());
                    std::fs::write(dir.join(format!("{stem}.csv")), csv)?;
                }
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if e.is_config_error() { 2 } else { 3 };
            let stage = match &e {
                Error::Stage { stage, .. } => Some(stage.as_str()),
                _ => None,
            };
            let report = serde_json::json!({
                "error": e.kind(),
                "stage": stage,
                "message": e.to_string(),
                "exit_code": code,
            });
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}
