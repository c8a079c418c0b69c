mod args;
mod commands;
mod manifest;

use clap::Parser;
use twincert::Error;

use crate::args::Cli;

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::OutOfRange(_) | Error::Guard(_) => 2,
        Error::Io { .. } | Error::Parse(_) | Error::Shape { .. } => 3,
        Error::Solver(_) => 4,
    }
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TWINCERT_LOG", "error")).init();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn main() {
    std::process::exit(run());
}
