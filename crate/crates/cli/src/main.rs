use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use sigmalambda::runner::{demo_crossing, Pipeline};
use sigmalambda::validation::{all_passed, validate, ValidateOptions};
use sigmalambda::{load_scenario, run, run_kvn, sweep_lambda, CrossingMode, Error, RunReport, Scenario};

/// Exit status when `validate` completes but a check fails.
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "sigmalambda", version, about = "Interpolating quantum-classical dynamics lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Defaults to the scenario's `output` entry.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario once per lambda and collect sweep.csv.
    SweepLambda {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated values in [0, 1].
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        lambdas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in demonstrations.
    Demo {
        #[command(subcommand)]
        demo: Demo,
    },
    /// Evolve the scenario's phase-space density along the classical flow.
    Kvn {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance checks and print one line per check.
    Validate {
        /// Skip the slowest checks.
        #[arg(long)]
        fast: bool,
        /// Keep the demo runs and write validation.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Demo {
    /// Counter-propagating packets: one wave function or a two-sheet mixture.
    Crossing {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Coherent,
    Mixture,
}

fn describe(report: &RunReport) {
    if let Some(d) = report.summary.last() {
        match report.pipeline {
            Pipeline::Kvn => println!("t = {:.6}  mass = {:.12}  energy = {:.12}", d.t, d.norm, d.energy),
            _ => println!(
                "t = {:.6}  norm = {:.12}  energy = {:.12}  width = {:.8}",
                d.t, d.norm, d.energy, d.width
            ),
        }
    }
    if let Some(c) = report.crossing_count {
        println!("crossings: {c}");
    }
    for (i, c) in report.caustics.iter().enumerate() {
        match c.caustic_time {
            Some(t) => println!("sheet {i}: caustic at t = {t}"),
            None => println!("sheet {i}: no caustic (min J = {:.3e})", c.min_jacobian),
        }
    }
    println!("output: {}", report.dir.display());
}

fn output_dir(flag: Option<PathBuf>, sc: &Scenario) -> Result<PathBuf, Error> {
    flag.or_else(|| sc.output.clone())
        .ok_or_else(|| Error::config("no output directory: pass --out or set `output` in the scenario"))
}

fn execute(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run { scenario, out } => {
            let sc = load_scenario(&scenario)?;
            let out = output_dir(out, &sc)?;
            info!("running {}", scenario.display());
            describe(&run(&sc, &out)?);
        }
        Command::SweepLambda { scenario, lambdas, out } => {
            let sc = load_scenario(&scenario)?;
            let out = output_dir(out, &sc)?;
            for row in sweep_lambda(&sc, &lambdas, &out)? {
                println!(
                    "lambda = {:<6} {:<12} width = {:.8}  energy = {:.10}",
                    row.lambda, row.regime, row.final_width, row.energy
                );
            }
            println!("output: {}", out.join("sweep.csv").display());
        }
        Command::Demo { demo: Demo::Crossing { mode, out } } => {
            let mode = match mode {
                Mode::Coherent => CrossingMode::Coherent,
                Mode::Mixture => CrossingMode::Mixture,
            };
            describe(&demo_crossing(mode, &out)?);
        }
        Command::Kvn { scenario, out } => {
            let sc = load_scenario(&scenario)?;
            let out = output_dir(out, &sc)?;
            describe(&run_kvn(&sc, &out)?);
        }
        Command::Validate { fast, out } => {
            let results = validate(&ValidateOptions { fast, out })?;
            for r in &results {
                println!("{}", r.line());
            }
            if !all_passed(&results) {
                return Ok(ExitCode::from(EXIT_CHECK_FAILED));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
