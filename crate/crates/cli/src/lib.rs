//! Command-line layer over `superres`: file schemas, the five verbs and the
//! mapping of failures to exit codes.

pub mod args;
pub mod commands;
pub mod error;
pub mod files;

use args::{Cli, Command};
pub use error::CliError;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen(a) => commands::cmd_gen(g, a),
        Command::Project(a) => commands::cmd_project(g, a),
        Command::Recover => commands::cmd_recover(g),
        Command::Certify(a) => commands::cmd_certify(g, a),
        Command::Phase(a) => commands::cmd_phase(g, a),
    }
}
