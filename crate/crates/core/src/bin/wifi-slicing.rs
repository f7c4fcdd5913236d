use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wifi_slicing::mac::{write_trace, SimOptions};
use wifi_slicing::runner::{
    flow_rows, run_row, run_with_options, summarize_dir, write_csv, write_results, ExperimentPlan,
    RunSpec,
};
use wifi_slicing::{Error, ScenarioConfig, Setting, Strategy};

const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(version, about = "Uplink Wi-Fi slicing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one (setting, strategy, seed) and print its per-run and per-flow rows.
    Run {
        #[arg(long)]
        setting: String,
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        seed: u64,
        /// Simulated seconds.
        #[arg(long)]
        sim_time: Option<f64>,
        /// Controller interval in seconds.
        #[arg(long)]
        interval: Option<f64>,
        /// JSON file overriding scenario fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print every MAC event to stderr.
        #[arg(long)]
        trace: bool,
        /// Also write flows, runs and config-log CSVs here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every setting and strategy over seeds 1..=20.
    Sweep {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        /// Override the seed list, e.g. `--seeds 1,2,3`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Recompute the median and quartile table of a sweep directory.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::from(EXIT_IO)
            }
        }
    }
}

fn execute(command: Command) -> wifi_slicing::Result<ExitCode> {
    match command {
        Command::Run {
            setting,
            strategy,
            seed,
            sim_time,
            interval,
            config,
            trace,
            out,
        } => {
            let strategy: Strategy = strategy.parse()?;
            let base = match setting.parse::<Setting>() {
                Ok(s) => ScenarioConfig::for_setting(s),
                Err(e) if config.is_none() => return Err(e),
                Err(_) => ScenarioConfig::default(),
            };
            let mut cfg = match &config {
                Some(path) => ScenarioConfig::from_json_file(path, &base)?,
                None => base,
            };
            if let Some(t) = sim_time {
                cfg.sim_time = t;
            }
            if let Some(t) = interval {
                cfg.control_interval = t;
            }
            cfg.validate()?;
            let spec = RunSpec {
                setting,
                config: cfg,
                strategy,
                seed,
            };
            let output = run_with_options(&spec, SimOptions { trace })?;
            if trace {
                write_trace(&output.trace, std::io::stderr().lock())
                    .map_err(|e| Error::io("<stderr>", e))?;
            }
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(&[run_row(&output.result)], &mut lock)?;
            writeln!(lock).map_err(|e| Error::io("<stdout>", e))?;
            write_csv(&flow_rows(&output.result), &mut lock)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                write_results(std::slice::from_ref(&output.result), &dir)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { out, jobs, seeds } => {
            let mut plan = match seeds {
                Some(seeds) => ExperimentPlan::grid(seeds),
                None => ExperimentPlan::full(),
            };
            if let Some(jobs) = jobs {
                plan = plan.with_jobs(jobs);
            }
            let report = wifi_slicing::sweep(&plan, &out)?;
            print!("{}", report.summary);
            println!("{} runs written to {}", report.completed, out.display());
            if report.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{} runs failed:", report.failures.len());
                for (id, e) in &report.failures {
                    eprintln!("  {id}: {e}");
                }
                Ok(ExitCode::from(EXIT_PARTIAL))
            }
        }
        Command::Summarize { input } => {
            print!("{}", summarize_dir(&input)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
