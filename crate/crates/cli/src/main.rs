use std::process::ExitCode;

fn main() -> ExitCode {
    match flexts_cli::commands::run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_broken_pipe() => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
