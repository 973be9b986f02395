//! `biascorr` command-line runner.
//!
//! Exit codes: 0 on success, 1 for configuration errors (including bad
//! arguments), 2 for I/O errors.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use biascorr::harness::{
    self, emit_figure_data, paper_table, run_experiment, Figure, HarnessError, Settings,
    TableArtifact,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "biascorr",
    version,
    about = "Forecast bias correction experiments on the logistic model"
)]
struct Cli {
    /// Write CSV here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Plain-text `key = value` file overriding the defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Regenerate one of the reference tables (1 to 8).
    Table {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=8))]
        number: u8,
    },
    /// Emit a figure data series (1: solution, 2: sensitivities).
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=2))]
        number: u8,
    },
    /// Estimate the correction for a single schedule cell.
    Estimate(EstimateArgs),
}

#[derive(Args, Debug, Default)]
struct EstimateArgs {
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "truth-x0")]
    truth_x0: Option<f64>,
    #[arg(long = "truth-alpha")]
    truth_alpha: Option<f64>,
    /// first, second, tikhonov or pinv.
    #[arg(long)]
    method: Option<String>,
    /// Regularization weight for `--method tikhonov`.
    #[arg(long)]
    lambda: Option<f64>,
    /// Iterate the estimator until the update falls below the threshold.
    #[arg(long)]
    iterate: bool,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
}

impl EstimateArgs {
    fn apply(&self, s: &mut Settings) {
        macro_rules! over {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { s.$f = v; } )* };
        }
        over!(
            t0,
            k,
            n,
            delta,
            x0,
            alpha,
            truth_x0,
            truth_alpha,
            method,
            lambda,
            threshold
        );
        if self.max_iter.is_some() {
            s.max_iter = self.max_iter;
        }
        if self.iterate {
            s.iterate = true;
        }
    }
}

fn build(cli: &Cli) -> Result<TableArtifact, HarnessError> {
    let mut settings = Settings::default();
    if let Some(path) = &cli.config {
        settings.apply_file(path)?;
    }
    match &cli.command {
        Command::Table { number } => paper_table(*number, &settings),
        Command::Figure { number } => Ok(emit_figure_data(Figure::from_number(*number)?)),
        Command::Estimate(args) => {
            args.apply(&mut settings);
            run_experiment(&settings.estimate_spec()?)
        }
    }
}

fn emit(cli: &Cli, table: &TableArtifact) -> anyhow::Result<()> {
    match &cli.out {
        Some(path) => harness::write_csv(table, path)?,
        None => std::io::stdout()
            .lock()
            .write_all(harness::to_csv_string(table).as_bytes())
            .context("writing to stdout")?,
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let table = build(cli)?;
    emit(cli, &table)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<HarnessError>() {
        Some(h) => h.exit_code() as u8,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
