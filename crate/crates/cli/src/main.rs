use std::io;
use std::process::ExitCode;

use clap::Parser;
use mplql_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = execute(&cli.command, &mut io::stdout().lock(), &mut io::stderr());
    ExitCode::from(code as u8)
}
