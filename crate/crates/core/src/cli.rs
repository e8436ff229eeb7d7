//! Command-line front end: `run`, `sweep` and `report`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::metrics::{self, MetricsRow, Summary};
use crate::sim::{run_scenario, run_sweep, ScenarioResult, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

/// Default output root when `--out` is absent.
pub const OUT_DIR_ENV: &str = "OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "oracle-sim", version, about = "Simulate a multi-source oracle network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write per-task and summary CSVs plus the ledger.
    Run {
        config: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: $OUT_DIR/<config name>, else out/<config name>].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep.
    Sweep {
        spec: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory, same default as `run`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize every `tasks.csv` below a directory.
    Report { dir: PathBuf },
}

fn default_out(input: &Path, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let root = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"));
        root.join(input.file_stem().unwrap_or_default())
    })
}

/// Writes `tasks.csv`, `summary.csv`, `rewards.csv` and `ledger.jsonl`.
pub fn write_scenario(result: &ScenarioResult, dir: &Path) -> Result<Summary> {
    let rows = metrics::rows_from_outcomes(&result.label, &result.outcomes);
    let summary =
        metrics::summarize(&result.label, &rows, Some(metrics::accesses_per_task(&result.outcomes)));
    metrics::emit_csv(&rows, &dir.join("tasks.csv"))?;
    metrics::emit_summary(std::slice::from_ref(&summary), &dir.join("summary.csv"))?;
    metrics::emit_rewards(&rows, &dir.join("rewards.csv"))?;
    let ledger_path = dir.join("ledger.jsonl");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&ledger_path).map_err(|e| Error::io(&ledger_path, e))?);
    for e in &result.ledger {
        serde_json::to_writer(&mut f, e).map_err(|e| Error::io(&ledger_path, e.into()))?;
        f.write_all(b"\n").map_err(|e| Error::io(&ledger_path, e))?;
    }
    f.flush().map_err(|e| Error::io(&ledger_path, e))?;
    Ok(summary)
}

fn print_summary(s: &Summary) {
    println!(
        "{}: last-100 time {:.3} +/- {:.3} s, diversity {:.3}, accuracy {:.3}, success {:.3}, retries {:.3}, accesses/task {:.1}",
        s.strategy,
        s.mean_time_last100,
        s.std_time_last100,
        s.mean_diversity,
        s.accuracy,
        s.success_rate,
        s.mean_retries,
        s.accesses_per_task
    );
}

fn cmd_run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = ScenarioConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let result = run_scenario(&cfg)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let dir = default_out(config, out);
    let summary = write_scenario(&result, &dir)?;
    print_summary(&summary);
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_sweep(spec_path: &Path, jobs: usize, out: Option<PathBuf>) -> Result<()> {
    let spec = SweepSpec::load(spec_path)?;
    let results = run_sweep(&spec, jobs)?;
    let dir = default_out(spec_path, out);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let table_path = dir.join("sweep.csv");
    let mut table = csv::Writer::from_path(&table_path)?;
    let mut header = vec!["point", "parameter", "value", "replication"];
    header.extend(metrics::SUMMARY_COLUMNS);
    table.write_record(&header)?;
    for (point, result) in &results {
        let summary = write_scenario(result, &dir.join(format!("point-{:03}", point.index)))?;
        print!("{} = {} (rep {}): ", spec.parameter, point.value, point.replication);
        print_summary(&summary);
        table.write_record([
            point.index.to_string(),
            spec.parameter.clone(),
            point.value.clone(),
            point.replication.to_string(),
            summary.strategy.clone(),
            format!("{:.6}", summary.mean_time_last100),
            format!("{:.6}", summary.std_time_last100),
            format!("{:.6}", summary.mean_diversity),
            format!("{:.6}", summary.accuracy),
            format!("{:.6}", summary.success_rate),
            format!("{:.6}", summary.mean_retries),
            format!("{:.6}", summary.accesses_per_task),
        ])?;
    }
    table.flush().map_err(|e| Error::io(&table_path, e))?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn find_task_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_task_files(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == "tasks.csv") {
            out.push(p);
        }
    }
    Ok(())
}

fn cmd_report(dir: &Path) -> Result<()> {
    let mut files = Vec::new();
    find_task_files(dir, &mut files)?;
    if files.is_empty() {
        return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "no tasks.csv found")));
    }
    let report_path = dir.join("report.csv");
    let retries_path = dir.join("report_retries.csv");
    let mut report = csv::Writer::from_path(&report_path)?;
    let mut retries = csv::Writer::from_path(&retries_path)?;
    let mut header = vec!["run"];
    header.extend(metrics::SUMMARY_COLUMNS);
    report.write_record(&header)?;
    retries.write_record(["run", "retries", "tasks"])?;
    for f in files {
        let run_dir = f.parent().expect("file has a parent");
        let run = run_dir.strip_prefix(dir).unwrap_or(run_dir).display().to_string();
        let run = if run.is_empty() { ".".to_string() } else { run };
        let rows: Vec<MetricsRow> =
            metrics::parse_csv(std::fs::File::open(&f).map_err(|e| Error::io(&f, e))?)?;
        let accesses = std::fs::File::open(run_dir.join("summary.csv"))
            .ok()
            .and_then(|s| metrics::parse_summary(s).ok())
            .and_then(|s| s.first().map(|s| s.accesses_per_task));
        let strategy = rows.first().map(|r| r.strategy.clone()).unwrap_or_default();
        let s = metrics::summarize(&strategy, &rows, accesses);
        print!("{run}: ");
        print_summary(&s);
        report.write_record([
            run.clone(),
            s.strategy.clone(),
            format!("{:.6}", s.mean_time_last100),
            format!("{:.6}", s.std_time_last100),
            format!("{:.6}", s.mean_diversity),
            format!("{:.6}", s.accuracy),
            format!("{:.6}", s.success_rate),
            format!("{:.6}", s.mean_retries),
            format!("{:.6}", s.accesses_per_task),
        ])?;
        for (r, count) in metrics::retry_histogram(&rows) {
            retries.write_record([run.clone(), r.to_string(), count.to_string()])?;
        }
    }
    report.flush().map_err(|e| Error::io(&report_path, e))?;
    retries.flush().map_err(|e| Error::io(&retries_path, e))?;
    println!("wrote {}", report_path.display());
    Ok(())
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_io() {
        EXIT_IO
    } else {
        EXIT_INVALID
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn cli_run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, out),
        Command::Sweep { spec, jobs, out } => cmd_sweep(&spec, jobs, out),
        Command::Report { dir } => cmd_report(&dir),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
