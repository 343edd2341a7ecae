use clap::Parser;

use mfc_core::cli::{execute, exit_code, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = execute(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
