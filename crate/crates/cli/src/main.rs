//! `croc`: batch runs, an interactive debugger and the remote control
//! service for the Croc/MLEM emulator.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 firmware could
//! not be loaded, 3 the core double-faulted.

mod repl;
mod run;
mod serve;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use setup::{parse_count, FirmwareArgs, PlatformArgs};

#[derive(Parser, Debug)]
#[command(
    name = "croc",
    version,
    about = "Croc RISC-V microcontroller and MLEM board emulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run firmware to completion without interaction
    Run(RunArgs),
    /// Load firmware and start the interactive debugger
    Debug(RunArgs),
    /// Host the control service over WebSocket
    Serve(ServeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum UartMode {
    /// Transmitted bytes go to stdout; stdin feeds the receiver
    Stdio,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    firmware: FirmwareArgs,
    /// Stop after this many cycles (default: run until the core halts).
    /// In the debugger, the budget for each `c`.
    #[arg(long, value_name = "N", value_parser = parse_count)]
    cycles: Option<u64>,
    /// Write one line per retired instruction
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Write pad edges as CSV
    #[arg(long, value_name = "FILE")]
    pins_csv: Option<PathBuf>,
    /// Connect the UART to the terminal
    #[arg(long, value_enum)]
    uart: Option<UartMode>,
    /// Scripted stimulus (`at <cycle> gpio <pin> <0|1>`, `at <cycle> uart <hex>`)
    #[arg(long, value_name = "FILE")]
    stim: Option<PathBuf>,
    #[command(flatten)]
    platform: PlatformArgs,
}

#[derive(Args, Debug)]
struct ServeArgs {
    /// TCP port; 0 picks a free one
    #[arg(long, default_value_t = 7878)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Serve the board UI's static files from this directory
    #[arg(long, value_name = "DIR")]
    ui_dir: Option<PathBuf>,
    /// Firmware to load before clients connect
    #[command(flatten)]
    firmware: FirmwareArgs,
    #[command(flatten)]
    platform: PlatformArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => run::run(args),
        Command::Debug(args) => repl::debug(args),
        Command::Serve(args) => serve::serve(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("croc: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
