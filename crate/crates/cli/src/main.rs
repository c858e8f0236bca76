use std::panic;
use std::process::ExitCode;

use clap::Parser;
use cotag_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("cotag: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => {
            eprintln!("cotag: internal error");
            ExitCode::from(3)
        }
    }
}
