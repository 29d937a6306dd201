use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nab2lab::config::{parse_config, ConfigError, ExperimentSpec};
use nab2lab::experiment::{self, RunError};

#[derive(Parser)]
#[command(name = "nab2lab", version, about = "Numerical experiments on non-abelian 2-forms and their splittings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV.
    Run {
        config: PathBuf,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (all cores when absent).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
    /// Print the experiment kinds.
    ListKinds,
}

const CONFIG_ERROR: u8 = 2;
const INTERNAL_ERROR: u8 = 3;

fn init_logging() {
    let level = match std::env::var("NAB2LAB_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Error,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Info,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).target(env_logger::Target::Stderr).init();
}

fn load(path: &PathBuf) -> Result<ExperimentSpec, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config(&text).map_err(|e: ConfigError| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(CONFIG_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    init_logging();
    match cli.command {
        Command::ListKinds => {
            for (name, summary) in experiment::list_kinds() {
                println!("{name:<18} {summary}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => {
            let checked = load(&config).and_then(|spec| {
                let plan = experiment::plan(&spec).map_err(|e| format!("{}: {e}", config.display()))?;
                Ok((spec, plan.point_count()))
            });
            match checked {
                Ok((spec, points)) => {
                    println!("{}: ok ({}, {points} points)", config.display(), spec.kind);
                    ExitCode::SUCCESS
                }
                Err(msg) => {
                    log::error!("{msg}");
                    ExitCode::from(CONFIG_ERROR)
                }
            }
        }
        Command::Run { config, out, seed, jobs } => {
            let mut spec = match load(&config) {
                Ok(s) => s,
                Err(msg) => {
                    log::error!("{msg}");
                    return ExitCode::from(CONFIG_ERROR);
                }
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            if jobs == Some(0) {
                log::error!("--jobs must be positive");
                return ExitCode::from(CONFIG_ERROR);
            }
            log::info!("running {} ({}), seed {}", spec.name, spec.kind, spec.seed);
            let records = match experiment::run_experiment(&spec, jobs) {
                Ok(r) => r,
                Err(RunError::Config(e)) => {
                    log::error!("{}: {e}", config.display());
                    return ExitCode::from(CONFIG_ERROR);
                }
                Err(RunError::Internal(e)) => {
                    log::error!("{e}");
                    return ExitCode::from(INTERNAL_ERROR);
                }
            };
            let csv = experiment::to_csv(spec.kind, &records);
            let written = match &out {
                Some(path) => std::fs::write(path, csv),
                None => {
                    use std::io::Write;
                    std::io::stdout().lock().write_all(csv.as_bytes())
                }
            };
            if let Err(e) = written {
                log::error!("writing output: {e}");
                return ExitCode::from(INTERNAL_ERROR);
            }
            let failed = records.iter().filter(|r| !r.pass).count();
            let total_time: std::time::Duration = records.iter().map(|r| r.wall_time).sum();
            log::info!("{} records, {failed} failed, {:.2?} of compute", records.len(), total_time);
            for r in records.iter().filter(|r| !r.pass) {
                log::info!("failed {}: {}", r.point, r.message);
            }
            ExitCode::SUCCESS
        }
    }
}
