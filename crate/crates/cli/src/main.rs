use std::panic;
use std::process::ExitCode;

use evtrack_cli::{exit, run};

fn main() -> ExitCode {
    let outcome = panic::catch_unwind(|| run(std::env::args_os()));
    let code = match outcome {
        Ok(Ok(())) => exit::OK,
        Ok(Err(e)) => {
            let msg = e.to_string();
            eprint!("{msg}");
            if !msg.ends_with('\n') {
                eprintln!();
            }
            e.code()
        }
        Err(_) => exit::INTERNAL,
    };
    ExitCode::from(code as u8)
}
