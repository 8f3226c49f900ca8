//! Scenario runner: reads a config, dispatches to the library scenarios,
//! writes CSV artifacts and a pass/fail `summary.csv`.

pub mod config;
pub mod error;
pub mod golden;
pub mod scenarios;
pub mod summary;

use std::path::{Path, PathBuf};

use clap::Parser;

pub use config::{ConfigFile, Scenario, ScenarioConfig};
pub use error::CliError;
pub use golden::{check_golden_dir, compare_golden};
pub use scenarios::run_scenario;
pub use summary::{CheckRecord, RunSummary};

#[derive(Debug, Parser)]
#[command(name = "cmclab", version, about = "Run a cmclab scenario and write its CSV artifacts")]
pub struct Cli {
    /// Scenario config file (`key = value`, `[scenario]` sections).
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Output directory for artifacts and summary.csv.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Scenario to run; overrides the config's choice.
    #[arg(long)]
    pub scenario: Option<String>,

    /// Print the scenario names and exit.
    #[arg(long)]
    pub list_scenarios: bool,

    /// Compare the produced CSV files against goldens in this directory.
    #[arg(long)]
    pub check_golden: Option<PathBuf>,

    /// Relative tolerance for golden comparison.
    #[arg(long, default_value_t = 1e-10)]
    pub golden_tol: f64,
}

fn resolve(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let scenario = cli.scenario.as_deref().map(str::parse::<Scenario>).transpose()?;
    match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            ConfigFile::parse(&text)?.select(scenario)
        }
        None => scenario
            .map(ScenarioConfig::defaults)
            .ok_or_else(|| CliError::Config("give --config or --scenario".into())),
    }
}

/// Runs the resolved scenario into `out` and optionally checks goldens.
/// Returns the process exit status.
pub fn execute(cfg: &ScenarioConfig, out: &Path, golden: Option<(&Path, f64)>) -> Result<i32, CliError> {
    let summary = run_scenario(cfg, out)?;
    for c in summary.failures() {
        eprintln!(
            "FAIL {}: measured {:e}, expected {:e}, tolerance {:e}",
            c.name, c.measured, c.expected, c.tolerance
        );
    }
    if let Some((dir, tol)) = golden {
        let bad = check_golden_dir(out, dir, tol)?;
        if !bad.is_empty() {
            return Err(CliError::Golden(bad.join(", ")));
        }
    }
    Ok(summary.exit_status())
}

pub fn run(cli: &Cli) -> i32 {
    if cli.list_scenarios {
        for s in Scenario::ALL {
            println!("{s}");
        }
        return error::EXIT_PASS;
    }
    let result = resolve(cli).and_then(|cfg| {
        let golden = cli.check_golden.as_deref().map(|d| (d, cli.golden_tol));
        let status = execute(&cfg, &cli.out, golden)?;
        eprintln!(
            "{}: {}",
            cfg.scenario,
            if status == error::EXIT_PASS { "pass" } else { "FAILED" }
        );
        Ok(status)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
