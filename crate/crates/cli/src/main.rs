use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(drf_cli::run(std::env::args_os()) as u8)
}
