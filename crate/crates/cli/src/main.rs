//! `txgraph`: one entry point for the whole pipeline.

mod args;
mod commands;

use clap::Parser;

fn main() {
    let cli = args::Cli::parse();
    let level = if cli.global.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = commands::run(cli) {
        eprintln!("error: {e}");
        if let commands::CliError::Usage(_) = e {
            eprintln!("run `txgraph --help` for usage");
        }
        std::process::exit(e.exit_code());
    }
}
