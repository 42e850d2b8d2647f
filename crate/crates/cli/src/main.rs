use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pstop_cli::commands::{self, EvaluateArgs, PlotArgs, SimulateArgs, StratifyArgs, ValidateArgs};
use pstop_cli::error::CliResult;
use pstop_cli::fetch::{self, FetchArgs};

#[derive(Debug, Parser)]
#[command(name = "pstop", version, about = "Stopping rules for technology-assisted review")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run stopping methods over every topic of every run.
    Evaluate(EvaluateArgs),
    /// Rank runs by AURC and summarise the top, middle and bottom five.
    Stratify(StratifyArgs),
    /// Gain curve and effort-versus-AURC data for plotting.
    PlotData(PlotArgs),
    /// Coverage and method behaviour on synthetic topics.
    Simulate(SimulateArgs),
    /// Collection statistics checked against published figures.
    Validate(ValidateArgs),
    /// Download collection files and record their checksums.
    Fetch(FetchArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Evaluate(args) => {
            let out = commands::cmd_evaluate(&args)?;
            print!("{}", out.text);
        }
        Command::Stratify(args) => {
            let out = commands::cmd_stratify(&args)?;
            print!("{}", out.text);
        }
        Command::PlotData(args) => {
            let out = commands::cmd_plot_data(&args)?;
            for f in out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Simulate(args) => {
            let out = commands::cmd_simulate(&args)?;
            print!("{}", out.text);
        }
        Command::Validate(args) => {
            let (summary, _) = commands::cmd_validate(&args)?;
            print!("{}", summary.to_text());
        }
        Command::Fetch(args) => {
            for f in fetch::cmd_fetch(&args)? {
                println!("fetched {}", f.display());
            }
        }
    }
    Ok(())
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
