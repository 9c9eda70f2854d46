//! `whitney`: list the catalog, verify one case, or sweep a parameter.
//!
//! Exit codes: 0 when every hard invariant passes, 1 on an invariant
//! violation or node failure, 2 on a configuration error.

mod config;

use clap::{Parser, Subcommand};
use config::{ConfigError, Format, RunConfig};
use std::io::Write;
use std::process::ExitCode;
use whitney_core::immersions::CATALOG;
use whitney_core::verify::{parameter_label, run_case, run_cases, to_csv, to_markdown, VerificationReport};

#[derive(Debug, Parser)]
#[command(name = "whitney", version, about = "Verify the integral inequality and its equality cases on catalog immersions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the catalog of cases.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Run the full verification pipeline on one case.
    Verify(RunConfig),
    /// Run one case per value of `--sweep param=start:stop:steps`.
    Sweep(RunConfig),
}

enum Failure {
    Config(ConfigError),
    Invariants,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List { json } => {
            list(json);
            Ok(())
        }
        Command::Verify(flags) => verify(&flags),
        Command::Sweep(flags) => sweep(&flags),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invariants) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn print_stdout(text: &str) {
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn list(json: bool) {
    if json {
        print_stdout(&(serde_json::to_string_pretty(CATALOG).expect("catalog serializes") + "\n"));
        return;
    }
    let mut s = format!("{:<22} {:<11} {:<7} parameters\n", "case", "model", "domain");
    for e in CATALOG {
        s += &format!("{:<22} {:<11} {:<7} {}\n", e.id, e.model, e.domain, e.parameters);
    }
    print_stdout(&s);
}

fn emit_effective(flags: &RunConfig, effective: &RunConfig) -> Result<(), ConfigError> {
    let text = effective.to_toml();
    eprintln!("# effective config\n{}", text.trim_end());
    if let Some(path) = &flags.emit_config {
        std::fs::write(path, &text).map_err(|source| ConfigError::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok(())
}

fn write_output(cfg: &RunConfig, reports: &[VerificationReport]) -> Result<(), ConfigError> {
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json if reports.len() == 1 => reports[0].to_json() + "\n",
        Format::Json => serde_json::to_string_pretty(reports).expect("reports serialize") + "\n",
        Format::Csv => to_csv(reports),
        Format::Markdown => to_markdown(reports),
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, text).map_err(|source| ConfigError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            print_stdout(&text);
            Ok(())
        }
    }
}

fn summarize(r: &VerificationReport) {
    let status = if r.passed() { "ok" } else { "INVARIANT VIOLATION" };
    eprintln!(
        "{} n={} [{}] res={}: normalized defect {:.3e} (± {:.1e}), {} — {status}",
        r.case,
        r.n,
        parameter_label(&r.parameters),
        r.resolution,
        r.normalized_defect,
        r.defect_error_estimate,
        r.classification.label()
    );
    if let Some(f) = &r.failure {
        eprintln!("  failure: {f}");
    }
    for (k, c) in r.invariants.iter().filter(|(_, c)| !c.passed) {
        eprintln!("  failed {k}: {:e} (tolerance {:e})", c.value, c.tolerance);
    }
}

fn verify(flags: &RunConfig) -> Result<(), Failure> {
    let merged = RunConfig::from_flags(flags)?;
    if merged.sweep.is_some() {
        return Err(ConfigError::Invalid("--sweep belongs to the `sweep` command".into()).into());
    }
    let effective = merged.resolved()?;
    let case = effective.case_config()?;
    emit_effective(flags, &effective)?;
    let report = run_case(&case).map_err(ConfigError::from)?;
    summarize(&report);
    write_output(&effective, std::slice::from_ref(&report))?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Invariants)
    }
}

fn sweep(flags: &RunConfig) -> Result<(), Failure> {
    let mut merged = RunConfig::from_flags(flags)?;
    if merged.sweep.is_none() {
        return Err(ConfigError::Invalid("sweep needs --sweep param=start:stop:steps".into()).into());
    }
    merged.format = merged.format.or(Some(Format::Csv));
    let runs = merged.expand()?;
    let mut cases = Vec::with_capacity(runs.len());
    for run in &runs {
        cases.push(run.resolved()?.case_config()?);
    }
    let mut effective = merged.resolved()?;
    effective.sweep = merged.sweep.clone();
    emit_effective(flags, &effective)?;
    let mut reports = Vec::with_capacity(cases.len());
    for r in run_cases(&cases) {
        reports.push(r.map_err(ConfigError::from)?);
    }
    reports.iter().for_each(summarize);
    write_output(&effective, &reports)?;
    if reports.iter().all(VerificationReport::passed) {
        Ok(())
    } else {
        Err(Failure::Invariants)
    }
}
