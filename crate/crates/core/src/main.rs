use std::process::ExitCode;

fn main() -> ExitCode {
    pstiming::cli::main_with_args(std::env::args_os())
}
