use std::process::ExitCode;

use clap::Parser;
use gauss_eot::commands::{run, Cli};
use gauss_eot::json;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors share the input-error status; --help/--version succeed
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(v) => {
            println!("{}", json::to_string(&v));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gauss-eot: {e}");
            e.exit_code()
        }
    }
}
