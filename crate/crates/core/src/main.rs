use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gradlab::scenario::{
    bundled_scenario, bundled_scenarios, run_scenario, run_sweep, write_outputs, Scenario, ScenarioError, SweepAxis,
    VerificationReport,
};

#[derive(Parser)]
#[command(
    name = "gradlab",
    version,
    about = "Gradient estimates for drift-diffusion operators, checked numerically"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "gradlab-out")]
    out: PathBuf,
    /// Override the scenario sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a bundled scenario by name.
    Run { scenario: String },
    /// Rerun a scenario over a list of values of one parameter.
    Sweep {
        scenario: String,
        /// One of k, h, n_steps, lambda.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// List the bundled scenarios.
    ListScenarios,
}

fn load(spec: &str, seed: Option<u64>) -> Result<Scenario, ScenarioError> {
    let path = Path::new(spec);
    let mut scenario = if path.exists() {
        Scenario::from_file(path)?
    } else if let Some(b) = bundled_scenario(spec) {
        b.load()?
    } else {
        return Err(ScenarioError::Config(format!(
            "{spec}: no such file and no bundled scenario of that name"
        )));
    };
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    Ok(scenario)
}

fn print_report(report: &VerificationReport) {
    println!(
        "scenario {}  (h = {:.4e}, {} nodes)",
        report.scenario.name, report.grid.spacing, report.grid.nodes
    );
    for (variant, c) in report.checks() {
        let tag = if c.report.pass {
            "pass"
        } else if c.gating {
            "FAIL"
        } else {
            "info"
        };
        println!(
            "  [{tag}] {variant:<14} {:<55} violation {:.3e}  tol {:.3e}  margin {:.4}",
            c.id, c.report.max_violation, c.report.tolerance, c.report.min_margin
        );
    }
    for v in &report.variants {
        for o in &v.oracles {
            let tag = if o.pass { "pass" } else { "FAIL" };
            println!(
                "  [{tag}] {:<14} {:<55} error {:.3e}  tol {:.3e}",
                v.label, o.id, o.error, o.tolerance
            );
        }
    }
    if report.failures.is_empty() {
        println!("PASS");
    } else {
        println!("FAIL ({} gating failures)", report.failures.len());
        for f in &report.failures {
            println!("  {f}");
        }
    }
}

fn execute(cli: Cli) -> Result<i32, ScenarioError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ScenarioError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::ListScenarios => {
            for b in bundled_scenarios() {
                println!("{:<24} {}", b.name, b.description());
            }
            Ok(0)
        }
        Command::Run { scenario } => {
            let scenario = load(&scenario, cli.seed)?;
            let report = run_scenario(&scenario)?;
            write_outputs(&report, &cli.out)?;
            print_report(&report);
            Ok(report.exit_code)
        }
        Command::Sweep { scenario, axis, values } => {
            let axis: SweepAxis = axis.parse()?;
            let scenario = load(&scenario, cli.seed)?;
            let table = run_sweep(&scenario, axis, &values)?;
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("sweep.csv");
            table.write_csv(BufWriter::new(File::create(&path)?))?;
            table.write_csv(std::io::stdout().lock())?;
            Ok(if table.rows.iter().all(|r| r.pass) { 0 } else { 2 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
