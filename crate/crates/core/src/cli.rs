//! `pcnet` command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 validation failure (bad input,
//! bad scenario, or a failed golden check).

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::classifier::{
    classify_batch, ClassificationMode, ClassificationOutcome, Method, NodeId, QueryRange,
};
use crate::fixtures::verify_golden_tables;
use crate::scenario::{load_scenario, ScenarioError, ScenarioFile};
use crate::simulator::{compare, run, CompareReport, Metrics, SimConfig};
use crate::tables::{parse_reputation_csv, write_classification_csv};

pub const EPOCHS_HEADER: [&str; 7] = [
    "epoch",
    "sent",
    "delivered",
    "pdr",
    "low_traversals",
    "tier_high",
    "tier_fallback",
];
pub const COMPARE_HEADER: [&str; 4] = ["seed", "pdr_filtered", "pdr_unfiltered", "delta"];
pub const SUMMARY_FILE: &str = "summary.json";
pub const EPOCHS_FILE: &str = "epochs.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "pcnet",
    version,
    about = "Possibility & certainty grading and grade-filtered MANET simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grade a reputation CSV (`node_id,value` or `node_id,p,q`) and print
    /// `node_id,grade,class`.
    Classify {
        /// Input CSV, or `-` for stdin.
        input: PathBuf,
        #[arg(long, num_args = 2, value_names = ["X", "Y"], required = true)]
        range: Vec<f64>,
        #[arg(long, default_value = "point")]
        method: Method,
        #[arg(long, default_value = "reconciled")]
        mode: ClassificationMode,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one scenario; writes summary.json and epochs.csv into --out.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's run seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run filtered and unfiltered routing per seed and write a CSV report.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the bundled golden classification tables.
    VerifyPaper,
    /// Write a default scenario file.
    Scaffold {
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_input(path: &Path) -> Result<String, CliError> {
    let mut text = String::new();
    if path == Path::new("-") {
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| CliError::Io(format!("stdin: {e}")))?;
    } else {
        text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    }
    Ok(text)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Classification CSV for `text`. Rows the mode rejects are validation
/// errors naming their line; verbatim error outcomes are ordinary rows.
pub fn classify_csv(
    text: &str,
    range: QueryRange,
    method: Method,
    mode: ClassificationMode,
) -> Result<String, CliError> {
    let rows =
        parse_reputation_csv(text, method).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut graded: Vec<(NodeId, ClassificationOutcome)> = Vec::with_capacity(rows.len());
    for (i, (id, res)) in classify_batch(&rows, range, mode).into_iter().enumerate() {
        // data rows start on line 2
        let outcome = res.map_err(|e| CliError::Validation(format!("line {}: {e}", i + 2)))?;
        graded.push((id, outcome));
    }
    Ok(write_classification_csv(&graded))
}

pub fn epochs_csv(m: &Metrics) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EPOCHS_HEADER).expect("in-memory write");
    for e in &m.epochs {
        w.write_record([
            e.epoch.to_string(),
            e.sent.to_string(),
            e.delivered.to_string(),
            e.pdr().to_string(),
            e.low_traversals.to_string(),
            e.tier_high.to_string(),
            e.tier_fallback.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn compare_csv(r: &CompareReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COMPARE_HEADER).expect("in-memory write");
    for row in &r.rows {
        w.write_record([
            row.seed.to_string(),
            row.pdr_filtered.to_string(),
            row.pdr_unfiltered.to_string(),
            row.delta.to_string(),
        ])
        .expect("in-memory write");
    }
    w.write_record([
        "mean".to_string(),
        r.mean_filtered.to_string(),
        r.mean_unfiltered.to_string(),
        r.mean_delta.to_string(),
    ])
    .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

fn simulate(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<Metrics, CliError> {
    let mut cfg: SimConfig = load_scenario(scenario)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let metrics = run(&cfg).map_err(|e| CliError::Validation(e.to_string()))?;
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut json = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    json.push('\n');
    write_file(&out.join(SUMMARY_FILE), json.as_bytes())?;
    write_file(&out.join(EPOCHS_FILE), epochs_csv(&metrics).as_bytes())?;
    Ok(metrics)
}

/// Runs one parsed command, writing human output to `stdout`.
pub fn execute(cmd: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    let print = |stdout: &mut dyn Write, s: &str| {
        stdout
            .write_all(s.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}")))
    };
    match cmd {
        Command::Classify {
            input,
            range,
            method,
            mode,
            out,
        } => {
            let range = QueryRange::new(range[0], range[1])
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let text = read_input(&input)?;
            let csv = classify_csv(&text, range, method, mode).map_err(|e| match e {
                CliError::Validation(m) => {
                    CliError::Validation(format!("{}: {m}", input.display()))
                }
                other => other,
            })?;
            match out {
                Some(path) => write_file(&path, csv.as_bytes()),
                None => print(stdout, &csv),
            }
        }
        Command::Simulate {
            scenario,
            out,
            seed,
        } => {
            let m = simulate(&scenario, &out, seed)?;
            print(
                stdout,
                &format!(
                    "seed {}: sent {} delivered {} pdr {:.4} low_traversals {}\n",
                    m.seed, m.sent, m.delivered, m.pdr, m.low_traversals
                ),
            )
        }
        Command::Compare {
            scenario,
            seeds,
            out,
        } => {
            let cfg = load_scenario(&scenario)?;
            let report = compare(&cfg, &seeds).map_err(|e| CliError::Validation(e.to_string()))?;
            write_file(&out, compare_csv(&report).as_bytes())?;
            print(
                stdout,
                &format!(
                    "{} seeds: mean pdr filtered {:.4} unfiltered {:.4} delta {:+.4}\n",
                    report.rows.len(),
                    report.mean_filtered,
                    report.mean_unfiltered,
                    report.mean_delta
                ),
            )
        }
        Command::VerifyPaper => {
            let mut failed = 0;
            for check in verify_golden_tables() {
                let status = if check.passed() { "PASS" } else { "FAIL" };
                print(stdout, &format!("{status} {}\n", check.name))?;
                if !check.passed() {
                    failed += 1;
                    print(
                        stdout,
                        &format!("expected:\n{}actual:\n{}", check.expected, check.actual),
                    )?;
                }
            }
            if failed > 0 {
                Err(CliError::Validation(format!(
                    "{failed} golden check(s) failed"
                )))
            } else {
                Ok(())
            }
        }
        Command::Scaffold { out } => {
            let text = ScenarioFile::from_config(&SimConfig::default()).to_toml();
            write_file(&out, text.as_bytes())
        }
    }
}

/// Parses `args` (including the program name) and runs. Returns the exit
/// code; errors go to `stderr`.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return e.exit_code();
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
