use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lfoc_cli::{bench, classify_cmd, run, write_csv, write_json, CliError, Policy, RunOptions, WorkloadManifest};
use lfoc_core::{count_clusterings, ClassifierConfig};

#[derive(Parser)]
#[command(
    name = "lfoc",
    version,
    about = "LLC cache-clustering policies over offline profiles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run policies over a workload manifest and write a CSV report.
    Run {
        manifest: PathBuf,
        /// Override the manifest's way count.
        #[arg(long)]
        ways: Option<usize>,
        #[arg(long, default_value = "lfoc,lfoc-plus")]
        policies: String,
        /// Oracle worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = lfoc_cli::DEFAULT_ORACLE_MAX_APPS)]
        oracle_max_apps: usize,
        /// CSV destination (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the report, solutions included, as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write solve_us as 0 for byte-stable reports.
        #[arg(long)]
        no_timing: bool,
    },
    /// Time LFOC+ over random synthetic workloads.
    Bench {
        #[arg(long, default_value_t = 16)]
        apps: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print a profile's class and critical size.
    Classify {
        profile: PathBuf,
        #[arg(long, default_value_t = 11)]
        ways: usize,
    },
    /// Print the number of ways to cluster N applications.
    Count { n: usize },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn create(path: &PathBuf) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io {
        path: path.clone(),
        reason: e.to_string(),
    })
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            manifest,
            ways,
            policies,
            workers,
            oracle_max_apps,
            out,
            json,
            no_timing,
        } => {
            let policies = Policy::parse_list(&policies)?;
            let mut manifest = WorkloadManifest::from_path(&manifest)?;
            if let Some(ways) = ways {
                manifest.nr_ways = ways;
            }
            let opts = RunOptions {
                workers,
                oracle_max_apps,
            };
            let report = run(&manifest, &policies, &opts)?;
            match out {
                Some(path) => write_csv(&report, create(&path)?, !no_timing)?,
                None => write_csv(&report, io::stdout().lock(), !no_timing)?,
            }
            if let Some(path) = json {
                write_json(&report, create(&path)?, !no_timing)?;
            }
        }
        Command::Bench { apps, trials, seed } => {
            if apps < 2 || trials == 0 {
                return Err(CliError::Usage("bench needs --apps >= 2 and --trials >= 1".into()));
            }
            println!("{}", bench(apps, trials, seed));
        }
        Command::Classify { profile, ways } => {
            println!("{}", classify_cmd(&profile, ways, &ClassifierConfig::default())?);
        }
        Command::Count { n } => {
            let mut stdout = io::stdout().lock();
            let _ = writeln!(stdout, "{}", count_clusterings(n));
        }
    }
    Ok(())
}
