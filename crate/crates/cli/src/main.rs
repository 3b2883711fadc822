use std::process::ExitCode;

use clap::Parser;
use distress_cli::{execute, init_threads, Cli, Stage};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(Stage::Usage.code() as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = init_threads(cli.threads).and_then(|_| execute(&cli, std::env::vars().collect()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
