use std::process::ExitCode;

use clap::Parser;
use superres_cli::args::Cli;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap exits 2 on usage errors as well; help and version are 0
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match superres_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({}): {e}", e.class());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
