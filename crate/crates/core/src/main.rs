//! Batch CLI: config-driven studies, verification suites, and manifests.

use clap::{Parser, Subcommand};
use roughmild::config::RunConfig;
use roughmild::studies::{manifest_json, report_shell, run_study, run_suite, Workbench, SUITES};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

/// Environment variable overriding the configured output directory.
const OUT_DIR_ENV: &str = "ROUGHMILD_OUT_DIR";

#[derive(Parser)]
#[command(name = "roughmild", version, about = "Rough-driver mild-solution toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the study named in the config and write report + artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a verification suite with the default config and print the table.
    Verify {
        /// One of: chen, semigroup, sewing, solver, analysis, all.
        suite: String,
    },
    /// Write the provenance manifest for a config.
    Manifest {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut rc = RunConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        rc.out_dir = dir;
    }
    Ok(rc)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn cmd_run(config: &Path) -> Result<bool, String> {
    let rc = load_config(config)?;
    let started = Instant::now();
    let wb = Workbench::from_config(&rc).map_err(|e| format!("setup: {e}"))?;
    let out = run_study(&wb).map_err(|e| format!("study {}: {e}", rc.study.name()))?;
    let mut report = report_shell(&rc);
    report.extend(out.records);
    report.wall_ms = started.elapsed().as_millis() as u64;
    let dir = PathBuf::from(&rc.out_dir);
    for (name, contents) in &out.artifacts {
        write_file(&dir, name, contents)?;
    }
    write_file(
        &dir,
        &format!("{}_report.json", rc.study.name()),
        &report.to_json(),
    )?;
    write_file(&dir, "manifest.json", &manifest_json(&rc))?;
    print!("{}", report.render_table());
    Ok(report.pass)
}

fn cmd_verify(suite: &str) -> Result<bool, String> {
    if !SUITES.contains(&suite) {
        return Err(format!("unknown suite '{suite}' (expected one of {SUITES:?})"));
    }
    let rc = RunConfig::default();
    let started = Instant::now();
    let wb = Workbench::from_config(&rc).map_err(|e| format!("setup: {e}"))?;
    let out = run_suite(&wb, suite).map_err(|e| format!("suite {suite}: {e}"))?;
    let mut report = report_shell(&rc);
    report.extend(out.records);
    report.wall_ms = started.elapsed().as_millis() as u64;
    print!("{}", report.render_table());
    Ok(report.pass)
}

fn cmd_manifest(config: &Path) -> Result<bool, String> {
    let rc = load_config(config)?;
    let text = manifest_json(&rc);
    write_file(&PathBuf::from(&rc.out_dir), "manifest.json", &text)?;
    println!("{text}");
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Verify { suite } => cmd_verify(suite),
        Command::Manifest { config } => cmd_manifest(config),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
