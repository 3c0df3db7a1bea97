use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(pitchdsp::cli::run(std::env::args_os()))
}
