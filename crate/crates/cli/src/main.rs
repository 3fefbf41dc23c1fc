use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use geoflow_cli::{run_scenario, ReportFormat, ScenarioConfig, SCENARIOS};

/// Deterministic experiments on deformed geodesic flows in tube coordinates.
#[derive(Parser, Debug)]
#[command(name = "geoflow", version, about)]
struct Cli {
    /// Scenario to run.
    #[arg(value_parser = scenario_name)]
    scenario: String,

    /// Configuration file (flat `key = value` lines); defaults apply when
    /// omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for the report and series files.
    #[arg(long, default_value = ".")]
    out: PathBuf,

    /// Report format.
    #[arg(long, default_value = "json")]
    format: String,

    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for ensemble fan-out (0 = all cores); falls back to
    /// the GEOFLOW_JOBS environment variable.
    #[arg(long)]
    jobs: Option<usize>,
}

fn scenario_name(s: &str) -> std::result::Result<String, String> {
    if SCENARIOS.contains(&s) {
        Ok(s.to_string())
    } else {
        Err(format!("expected one of: {}", SCENARIOS.join(", ")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let format: ReportFormat = cli.format.parse()?;

    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::from_file(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }

    let jobs = cli
        .jobs
        .or_else(|| std::env::var("GEOFLOW_JOBS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0);
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("building worker pool")?;
    }

    let report = run_scenario(&cli.scenario, &cfg)?;
    report.print_summary();
    let paths = report.write(&cli.out, format)?;
    for p in &paths {
        println!("wrote {}", p.display());
    }

    if report.all_pass() {
        println!("{}: all {} checks passed", report.scenario, report.checks.len());
        Ok(true)
    } else {
        let failing: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        eprintln!("{}: failing checks: {}", report.scenario, failing.join(", "));
        Ok(false)
    }
}
