//! Command-line front end: run a scenario, generate analytic curves, or
//! replay serialized scans through the pipeline.

use aerovox_sim::config::load_config;
use aerovox_sim::curves::emit_curves;
use aerovox_sim::emit::emit;
use aerovox_sim::metrics::MetricsReport;
use aerovox_sim::pipeline::{replay_scenario, run_scenario, TickRecord};
use anyhow::Result;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "aerovox", about = "Flying-object detection simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a configured scenario and write logs plus a summary.
    Run {
        /// Scenario configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for CSV logs and summary.json.
        #[arg(long)]
        out: PathBuf,
        /// Override the configured RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured tick count.
        #[arg(long)]
        ticks: Option<usize>,
        /// Also serialize every generated scan here, for later replay.
        #[arg(long)]
        dump_scans: Option<PathBuf>,
    },
    /// Write hit- and detection-probability curves for a configuration.
    Curves {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the curve CSVs.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Re-run the pipeline over scans serialized by `run --dump-scans`.
    Replay {
        #[arg(long)]
        config: PathBuf,
        /// Directory of .scan files, processed in file-name order.
        #[arg(long)]
        scans: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_summary(name: &str, records: &[TickRecord], report: &MetricsReport, out: &PathBuf) {
    let fmt_opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3} m"));
    println!(
        "{name}: {} ticks, recall {:.3} (match radius {} m), \
         detection error {}, track error {}",
        records.len(),
        report.recall,
        report.match_radius_m,
        fmt_opt(report.mean_err_detected),
        fmt_opt(report.mean_err_tracked),
    );
    println!("outputs in {}", out.display());
}

fn real_main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed, ticks, dump_scans } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(ticks) = ticks {
                cfg.ticks = Some(ticks);
            }
            cfg.validate()?;
            let (records, report) = run_scenario(&cfg, dump_scans.as_deref())?;
            emit(&out, &cfg, &records, &report)?;
            print_summary(&cfg.name, &records, &report, &out);
        }
        Command::Curves { config, out } => {
            let cfg = load_config(&config)?;
            let (hit, det) = emit_curves(&out, &cfg)?;
            println!("wrote {} and {}", hit.display(), det.display());
        }
        Command::Replay { config, scans, out } => {
            let cfg = load_config(&config)?;
            let (records, report) = replay_scenario(&cfg, &scans)?;
            emit(&out, &cfg, &records, &report)?;
            print_summary(&cfg.name, &records, &report, &out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
