use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lvn_darboux::error::Error;
use lvn_darboux::evolution::Variant;
use lvn_darboux::scenario::{self, Format, Grid, Mode, RunOptions};

#[derive(Parser)]
#[command(
    name = "lvn-darboux",
    version,
    about = "Darboux-generated solutions of i dU/dt = [H, U^2]"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Evolve,
    Verify,
    Subsystem,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a scenario on its time grid.
    Run {
        /// Builtin name (see `list`) or path to a scenario file.
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum, default_value = "evolve")]
        mode: ModeArg,
        #[arg(long, allow_negative_numbers = true)]
        t_start: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        t_end: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        /// Central-difference step of the residual check.
        #[arg(long, default_value_t = 1e-4)]
        fd_step: f64,
        /// Largest RK4 step of the oracle trajectory.
        #[arg(long, default_value_t = 1e-3)]
        rk4_step: f64,
        /// Transformations applied after the first.
        #[arg(long)]
        iterations: Option<usize>,
        /// Report the gauge-shifted solution with this lambda.
        #[arg(long, allow_negative_numbers = true)]
        gauge_lambda: Option<f64>,
    },
    /// List builtin scenarios.
    List,
    /// Check a scenario without running it.
    Validate {
        #[arg(long)]
        scenario: String,
    },
}

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    if let Error::Validation(v) = err {
        for item in v {
            eprintln!("  {item}");
        }
    }
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for s in scenario::builtin_scenarios() {
                println!(
                    "{}\t{}x{}\t{}",
                    s.name,
                    s.h.nrows(),
                    s.h.ncols(),
                    s.description
                );
            }
            ExitCode::SUCCESS
        }
        Command::Validate { scenario } => match scenario::resolve_scenario(&scenario) {
            Ok(spec) => {
                println!("{}: ok", spec.name);
                ExitCode::SUCCESS
            }
            Err(e) => exit_for(&e),
        },
        Command::Run {
            scenario,
            mode,
            t_start,
            t_end,
            steps,
            out,
            format,
            fd_step,
            rk4_step,
            iterations,
            gauge_lambda,
        } => {
            let mut spec = match scenario::resolve_scenario(&scenario) {
                Ok(s) => s,
                Err(e) => return exit_for(&e),
            };
            spec.grid = Grid {
                start: t_start.unwrap_or(spec.grid.start),
                end: t_end.unwrap_or(spec.grid.end),
                steps: steps.unwrap_or(spec.grid.steps),
            };
            if let Some(n) = iterations {
                spec.iterations = n;
            }
            if let Some(lambda) = gauge_lambda {
                match spec.variant {
                    Variant::Plain | Variant::Gauge { .. } => {
                        spec.variant = Variant::Gauge { lambda }
                    }
                    _ => {
                        return exit_for(&Error::InvalidArgument(
                            "--gauge-lambda applies only to plain scenarios".into(),
                        ))
                    }
                }
            }
            let mode = match mode {
                ModeArg::Evolve => Mode::Evolve,
                ModeArg::Verify => Mode::Verify,
                ModeArg::Subsystem => Mode::Subsystem,
            };
            let format = match format {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
            let mut options = RunOptions {
                fd_step,
                ..RunOptions::default()
            };
            options.rk4.step = rk4_step;
            let output = match scenario::run(&spec, mode, &options) {
                Ok(o) => o,
                Err(e) => return exit_for(&e),
            };
            let bytes = match scenario::render(&output, format) {
                Ok(b) => b,
                Err(e) => return exit_for(&e),
            };
            let written = match &out {
                Some(path) => scenario::write_atomic(path, &bytes),
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(&bytes).map_err(Error::from)
                }
            };
            if let Err(e) = written {
                return exit_for(&e);
            }
            if let Some(v) = &output.verify {
                eprintln!(
                    "{}: max residual {:.3e} (< {:.0e}), rk4 deviation {:.3e} (< {:.0e}): {}",
                    spec.name,
                    v.max_ode_residual,
                    v.residual_tolerance,
                    v.rk4_max_deviation,
                    v.rk4_tolerance,
                    if v.passed { "PASS" } else { "FAIL" }
                );
            }
            if output.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
    }
}
