use std::process::ExitCode;

fn main() -> ExitCode {
    caliblab::cli::run(std::env::args_os())
}
