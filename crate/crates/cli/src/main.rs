use std::io;
use std::process;

use clap::Parser;
use ewsn_cli::args::Cli;
use ewsn_cli::error::EXIT_OK;

fn main() {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let code = match ewsn_cli::run(&cli, &mut stdout.lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("ewsn: {e}");
            e.exit_code()
        }
    };
    process::exit(code);
}
