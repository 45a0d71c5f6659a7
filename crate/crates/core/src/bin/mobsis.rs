use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mobsis::scenario::{reproduce, run, Figure, OutputFormat, RunOptions, RunSummary, ScenarioConfig, ScenarioError};

/// SIS epidemics on networks of regions coupled by Markovian mobility.
#[derive(Debug, Parser)]
#[command(name = "mobsis", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Stability report (and endemic state when it exists) for a scenario.
    Analyze {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Regenerate a bundled figure scenario.
    Reproduce {
        /// fig1a..fig1d, fig2_line, fig2_ring, fig2_star, fig2_complete, fig3 or all.
        #[arg(long)]
        figure: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// csv, svg, json or all.
    #[arg(long, default_value = "all")]
    format: OutputFormat,
}

impl Common {
    fn options(&self, analyze: bool) -> RunOptions {
        RunOptions {
            out_dir: self.out_dir.clone(),
            seed: self.seed,
            format: self.format,
            analyze,
        }
    }
}

fn print_summary(summary: &RunSummary) {
    println!("{} ({:?})", summary.name, summary.mode);
    if let Some(report) = &summary.report {
        print!("{}", report.to_table());
    }
    if let Some(endemic) = &summary.endemic {
        println!(
            "endemic state: {} iterations, residual {:e}",
            endemic.iterations, endemic.residual
        );
    }
    for check in &summary.checks {
        println!(
            "  [{}] {}: {}",
            if check.passed { "pass" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    for path in &summary.written {
        println!("  wrote {}", path.display());
    }
}

fn execute(cli: Cli) -> Result<(), ScenarioError> {
    match cli.command {
        Command::Run { scenario, common } => {
            let summary = run(&ScenarioConfig::load(&scenario)?, &common.options(false))?;
            print_summary(&summary);
        }
        Command::Analyze { scenario, common } => {
            let summary = run(&ScenarioConfig::load(&scenario)?, &common.options(true))?;
            print_summary(&summary);
        }
        Command::Reproduce { figure, common } => {
            let figures = if figure == "all" {
                Figure::ALL.to_vec()
            } else {
                vec![figure.parse::<Figure>()?]
            };
            let mut failed = Vec::new();
            for figure in figures {
                let summary = reproduce(figure, &common.options(false))?;
                print_summary(&summary);
                if !summary.all_checks_passed() {
                    failed.push(figure.name());
                }
            }
            if !failed.is_empty() {
                return Err(ScenarioError::CheckFailed(failed.join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
