//! Experiment front end: run one episode or a parameter sweep from config
//! files on disk.

use clap::{Parser, Subcommand};
use raqmdp::config::load_scenario;
use raqmdp::sim::run_episode;
use raqmdp::sweep::{load_sweep, run_sweep, write_report};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "raqmdp",
    about = "Risk-averse behavior planning experiments: single episodes and parameter sweeps",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write telemetry.csv, decisions.csv, summary.toml.
    Run {
        /// Scenario config file (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Episode seed; defaults to the config's episode.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (RAQMDP_OUT_DIR overrides when set).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a sweep spec and write sweep_summary.csv plus tradeoff SVGs.
    Sweep {
        /// Sweep spec file (TOML).
        #[arg(long)]
        spec: PathBuf,
        /// Output directory (RAQMDP_OUT_DIR overrides when set).
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for sweep cells; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        parallel: usize,
    },
}

fn out_dir(flag: PathBuf) -> PathBuf {
    match std::env::var_os("RAQMDP_OUT_DIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => flag,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, out } => cmd_run(config, seed, out_dir(out)),
        Command::Sweep { spec, out, parallel } => cmd_sweep(spec, out_dir(out), parallel),
    }
}

fn cmd_run(config: PathBuf, seed: Option<u64>, out: PathBuf) -> ExitCode {
    let loaded = match load_scenario(&config) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let seed = seed.unwrap_or(loaded.default_seed);
    let telemetry = match run_episode(&loaded.scenario, seed) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = telemetry.write_to_dir(&out) {
        eprintln!("error: cannot write outputs to {}: {e}", out.display());
        return ExitCode::from(2);
    }
    let s = &telemetry.summary;
    println!(
        "planner={} seed={} end={:?} t={}s avg_v={:.2} pre_event_v={:.2} max|jerk|={:.2}",
        loaded.scenario.planner.name(),
        seed,
        s.end_reason,
        s.end_time,
        s.avg_velocity,
        s.avg_velocity_pre_event,
        s.max_abs_jerk
    );
    println!("wrote {}", out.display());
    if s.crashed {
        eprintln!("episode ended in a crash (telemetry still written)");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

fn cmd_sweep(spec_path: PathBuf, out: PathBuf, parallel: usize) -> ExitCode {
    let spec = match load_sweep(&spec_path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let run = || run_sweep(&spec, &spec.scenario.idm);
    let report = if parallel > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(parallel).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                eprintln!("error: cannot build thread pool: {e}");
                return ExitCode::from(2);
            }
        }
    } else {
        run()
    };
    match write_report(&report, &out) {
        Ok(files) => {
            print!("{}", report.summary_csv);
            for f in files {
                println!("wrote {}", f.display());
            }
            let failures: usize = report.rows.iter().map(|r| r.failures).sum();
            if failures > 0 {
                eprintln!("{failures} episode(s) failed; see sweep_summary.csv");
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
