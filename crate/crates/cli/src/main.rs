use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use copula_indep_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = Vec::new();
    let mut err = io::stderr();
    let result = run(cli, &mut out, &mut err);
    if io::stdout().write_all(&out).and_then(|_| io::stdout().flush()).is_err() {
        return ExitCode::from(3);
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
