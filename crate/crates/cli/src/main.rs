use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use iphs_cli::run::{output_dir, run, Overrides};
use iphs_cli::scenario::{Scenario, SchemeSpec};
use iphs_cli::{audit, plot, ports_cmd, CliError, OUTPUT_ROOT_ENV};

#[derive(Parser)]
#[command(name = "iphs", version, about = "Structure-preserving conduction-diffusion simulations with thermodynamic audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Midpoint,
    Rk4,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectory, ports, snapshots and summary.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        /// Run directory (overrides the scenario's output directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Root for relative output directories.
        #[arg(long, env = OUTPUT_ROOT_ENV)]
        output_root: Option<PathBuf>,
    },
    /// Emit SVG plots for a run directory.
    Plot { run_dir: PathBuf },
    /// Synthesize boundary port matrices W_B, W_C from matrix files.
    Ports {
        matrices: PathBuf,
        xi: PathBuf,
        #[arg(long, default_value = "ports_out")]
        out: PathBuf,
    },
    /// Recompute balances and residuals of a run from its snapshots.
    Audit { run_dir: PathBuf },
}

fn simulate(path: &Path, overrides: Overrides, root: Option<&Path>) -> Result<ExitCode, CliError> {
    let mut scenario = Scenario::load(path)?;
    overrides.apply(&mut scenario);
    let dir = output_dir(&scenario, root);
    let outcome = run(&scenario, &dir)?;
    let s = &outcome.summary;
    println!("run directory: {}", dir.display());
    println!("steps: {}  final time: {:e}", s.steps, s.final_time);
    for (name, c) in &s.checks {
        println!("{name}: {} (value {:e}, threshold {:e})", if c.passed { "PASS" } else { "FAIL" }, c.value, c.threshold);
    }
    Ok(if s.passed { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Simulate { scenario, dt, t_end, scheme, out, output_root } => {
            let scheme = scheme.map(|s| match s {
                SchemeArg::Midpoint => SchemeSpec::ImplicitMidpoint,
                SchemeArg::Rk4 => SchemeSpec::ExplicitRk4,
            });
            simulate(&scenario, Overrides { dt, t_end, scheme, out }, output_root.as_deref())
        }
        Command::Plot { run_dir } => {
            for f in plot::plot(&run_dir)? {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Ports { matrices, xi, out } => {
            let (ps, files) = ports_cmd::ports_cmd(&matrices, &xi, &out)?;
            print!("{}", ports_cmd::report(&ps));
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit { run_dir } => {
            let a = audit::audit(&run_dir)?;
            println!("{}", serde_json::to_string_pretty(&a).expect("audit serializes"));
            Ok(if a.consistent { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
