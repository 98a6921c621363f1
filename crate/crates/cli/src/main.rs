use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bsrd_core::functionals::{decay_window, equilibrium_with_affinity, fit_decay_rate, masses};
use bsrd_core::io::csv::{write_snapshot, CsvTable, DiagnosticsWriter};
use bsrd_core::io::plot::emit_plot;
use bsrd_core::params::nondimensionalize;
use bsrd_core::timestepper::run_with;
use bsrd_core::verify::{run_suite, CheckOutcome, SUITES};
use bsrd_core::{parse_config, DimensionalParameters, Error, RunConfig};
use clap::{Parser, Subcommand};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;

/// Bulk-surface ligand-receptor reaction-diffusion on a moving domain.
#[derive(Parser)]
#[command(name = "bsrd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a configuration; writes diagnostics.csv, snapshots and metadata.json
    Run {
        config: PathBuf,
        /// Output directory (overrides the config; BSRD_OUT overrides both)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the equilibrium reached from the configured initial masses as JSON
    Equilibrium { config: PathBuf },
    /// Convert dimensional constants (JSON file or inline JSON) to the dimensionless set
    Nondim { json: String },
    /// Run the oracle suites and print a pass/fail table
    Verify {
        /// Run one suite only
        #[arg(long)]
        suite: Option<String>,
    },
    /// Fit log(E_rel) = c - K t over the decay window of a diagnostics file
    FitDecay {
        csv: PathBuf,
        #[arg(long, default_value = "E_rel")]
        column: String,
        /// Smallest value kept in the window
        #[arg(long, default_value_t = 1e-10)]
        floor: f64,
        /// Largest value kept, as a fraction of the first value
        #[arg(long, default_value_t = 0.1)]
        ceiling_fraction: f64,
        /// Fit every positive value instead of the window
        #[arg(long)]
        all: bool,
    },
    /// Plot diagnostics columns against t as SVG
    Plot {
        csv: PathBuf,
        /// Columns to plot, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        cols: Vec<String>,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
}

enum Failure {
    Core(Error),
    Usage(String),
    Verification(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let first = first.trim_start_matches("error: ");
            eprintln!("ERROR:usage: {first}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("ERROR:{}: {message}", e.category());
            ExitCode::from(if e.is_input_error() { EXIT_VALIDATION } else { EXIT_RUNTIME })
        }
        Err(Failure::Usage(message)) => {
            eprintln!("ERROR:usage: {message}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Verification(n)) => {
            eprintln!("ERROR:verification: {n} check(s) failed");
            ExitCode::from(EXIT_VERIFICATION)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Equilibrium { config } => cmd_equilibrium(&config),
        Command::Nondim { json } => cmd_nondim(&json),
        Command::Verify { suite } => cmd_verify(suite.as_deref()),
        Command::FitDecay {
            csv,
            column,
            floor,
            ceiling_fraction,
            all,
        } => cmd_fit_decay(&csv, &column, floor, ceiling_fraction, all),
        Command::Plot { csv, cols, out } => Ok(emit_plot(csv, &cols, out)?),
    }
}

fn print_json(value: &impl serde::Serialize) {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn output_dir(config: &RunConfig, flag: Option<PathBuf>) -> PathBuf {
    if let Some(dir) = std::env::var_os("BSRD_OUT").filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    flag.or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn cmd_run(path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let config = parse_config(path)?;
    let dir = output_dir(&config, out);
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;

    let csv_path = dir.join("diagnostics.csv");
    let file = File::create(&csv_path).map_err(|e| Error::Io { path: csv_path.clone(), source: e })?;
    let io_err = |e: std::io::Error| Error::Io { path: csv_path.clone(), source: e };
    let mut writer = DiagnosticsWriter::new(BufWriter::new(file)).map_err(io_err)?;

    let grid = config.grid;
    let preset = config.preset;
    let initial = config.initial.build(&grid, &preset)?;
    let mut snapshots = 0usize;
    let mut next_snapshot = 0.0;
    let every = config.output.snapshot_every;
    let mut last_snapshot_t = f64::NAN;

    let outcome = run_with(&config, initial, |state, row| {
        writer.write_row(row).map_err(io_err)?;
        if let Some(every) = every {
            if state.t >= next_snapshot - 1e-9 * every {
                write_snapshot(&dir, snapshots, state, &grid, &preset)?;
                snapshots += 1;
                last_snapshot_t = state.t;
                while next_snapshot <= state.t + 1e-9 * every {
                    next_snapshot += every;
                }
            }
        } else if state.t == 0.0 {
            write_snapshot(&dir, snapshots, state, &grid, &preset)?;
            snapshots += 1;
            last_snapshot_t = state.t;
        }
        Ok(())
    });
    writer.flush().map_err(io_err)?;
    let outcome = outcome?;
    if outcome.final_state.t != last_snapshot_t {
        write_snapshot(&dir, snapshots, &outcome.final_state, &grid, &preset)?;
        snapshots += 1;
    }

    let metadata = serde_json::json!({
        "grid": { "nx": grid.nx, "ny": grid.ny, "period": grid.period, "height": grid.height },
        "motion": preset,
        "params": config.params,
        "nondimensional": config.nondimensional,
        "t_final": config.t_final,
        "cfl_safety": config.cfl_safety,
        "output_every": config.output_every,
        "steps": outcome.steps,
        "snapshots": snapshots,
        "initial_masses": outcome.context.initial_masses,
        "equilibrium": outcome.context.equilibrium,
    });
    let meta_path = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(&metadata).expect("serializable") + "\n";
    std::fs::write(&meta_path, text).map_err(|e| Error::Io { path: meta_path, source: e })?;
    Ok(())
}

fn cmd_equilibrium(path: &Path) -> Result<(), Failure> {
    let config = parse_config(path)?;
    let state = config.initial.build(&config.grid, &config.preset)?;
    let m = masses(&state, &config.grid, &config.preset)?;
    let eq = equilibrium_with_affinity(
        m.m1,
        m.m2,
        config.preset.bulk_area(0.0),
        config.preset.membrane_length(0.0),
        config.params.binding_affinity(),
    )?;
    print_json(&eq);
    Ok(())
}

fn cmd_nondim(arg: &str) -> Result<(), Failure> {
    let (text, origin) = if arg.trim_start().starts_with('{') {
        (arg.to_string(), PathBuf::from("<inline>"))
    } else {
        let p = PathBuf::from(arg);
        let text = std::fs::read_to_string(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
        (text, p)
    };
    let dim: DimensionalParameters = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: origin,
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    print_json(&nondimensionalize(&dim)?);
    Ok(())
}

fn cmd_verify(suite: Option<&str>) -> Result<(), Failure> {
    let names: Vec<&str> = match suite {
        Some(name) if SUITES.contains(&name) => vec![name],
        Some(name) => {
            return Err(Failure::Usage(format!(
                "unknown suite {name:?}; available suites: {}",
                SUITES.join(", ")
            )))
        }
        None => SUITES.to_vec(),
    };
    let mut outcomes: Vec<CheckOutcome> = Vec::new();
    for name in names {
        outcomes.extend(run_suite(name)?);
    }
    let width = outcomes.iter().map(|o| o.suite.len() + o.check.len() + 1).max().unwrap_or(0);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for o in &outcomes {
        let label = format!("{}/{}", o.suite, o.check);
        let status = if o.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{status}  {label:<width$}  {:>12.4e}  {}", o.value, o.criterion);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let _ = writeln!(out, "{} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        Err(Failure::Verification(failed))
    } else {
        Ok(())
    }
}

fn cmd_fit_decay(path: &Path, column: &str, floor: f64, ceiling_fraction: f64, all: bool) -> Result<(), Failure> {
    let table = CsvTable::read(path)?;
    let series = table.series("t", column)?;
    let window = if all {
        series.into_iter().filter(|p| p.1 > 0.0).collect()
    } else {
        decay_window(&series, floor, ceiling_fraction)
    };
    let fit = fit_decay_rate(&window)?;
    print_json(&serde_json::json!({
        "K": fit.rate,
        "R2": fit.r_squared,
        "points": fit.points,
    }));
    Ok(())
}
