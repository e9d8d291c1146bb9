use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tvc_core::app::{run, Command, Outcome, Overrides, DEMOS};
use tvc_core::euler::BoundaryMode;
use tvc_core::report::Report;
use tvc_core::scenario::parse_scenario;
use tvc_core::Error;

#[derive(Parser)]
#[command(name = "tvckit", version, about = "Check Euler equations and transversality conditions of stochastic higher-order problems")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Euler residuals along the scenario path.
    Euler(Opts),
    /// Transversality tail or boundary bracket and its liminf.
    Tvc(Opts),
    /// Uniform-convergence and domination diagnostics.
    Assume(Opts),
    /// Newton solve of the truncated Euler system.
    Solve(Opts),
    /// Discrete/continuous correspondence checks.
    Correspond(Opts),
    /// Run a named reproduction preset.
    Demo {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(DEMOS))]
        name: String,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Opts {
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `csv` writes the command's table to --out and the JSON report next
    /// to it with a `.report.json` extension.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    tmax: Option<usize>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// `paper-literal` or `fixed:<k>`.
    #[arg(long)]
    boundary: Option<String>,
    #[arg(long)]
    quiet: bool,
}

fn write_out(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, demo, opts) = match cli.command {
        Sub::Euler(o) => (Command::Euler, None, o),
        Sub::Tvc(o) => (Command::Tvc, None, o),
        Sub::Assume(o) => (Command::Assume, None, o),
        Sub::Solve(o) => (Command::Solve, None, o),
        Sub::Correspond(o) => (Command::Correspond, None, o),
        Sub::Demo { name, opts } => (Command::Demo, Some(name), opts),
    };
    let outcome = prepare(command, demo.as_deref(), &opts);
    let mut report = outcome.report;
    let mut csv = outcome.csv;
    if opts.format == Format::Csv && csv.is_none() && report.error.is_none() {
        let e = Error::Input(format!("`{command}` has no CSV output"));
        report = Report::failure(&report.command, report.seed, report.scenario.clone(), &e, report.warnings.clone());
        csv = None;
    }
    let written = match (opts.format, csv) {
        (Format::Csv, Some(table)) => write_out(opts.out.as_deref(), &table).and_then(|_| match &opts.out {
            Some(p) => std::fs::write(p.with_extension("report.json"), report.to_json()),
            None => Ok(()),
        }),
        _ => write_out(opts.out.as_deref(), &report.to_json()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    if !opts.quiet {
        eprint!("{}", report.summary());
    }
    ExitCode::from(report.exit_code as u8)
}

fn prepare(command: Command, demo: Option<&str>, opts: &Opts) -> Outcome {
    let seed = opts.seed.unwrap_or(tvc_core::scenario::DEFAULT_SEED);
    let fail = |e: Error| Outcome {
        report: Report::failure(command.name(), seed, None, &e, Vec::new()),
        csv: None,
    };
    let boundary = match opts.boundary.as_deref().map(str::parse::<BoundaryMode>).transpose() {
        Ok(b) => b,
        Err(e) => return fail(e),
    };
    let overrides = Overrides {
        tmax: opts.tmax,
        eps_grid: opts.eps_grid.clone(),
        seed: opts.seed,
        tolerance: opts.tolerance,
        boundary,
    };
    let scenario = match &opts.scenario {
        Some(p) if command != Command::Demo => {
            match std::fs::read_to_string(p).map_err(Error::from).and_then(|t| parse_scenario(&t)) {
                Ok(s) => Some(s),
                Err(e) => return fail(e),
            }
        }
        _ => None,
    };
    run(command, scenario, demo, &overrides)
}
