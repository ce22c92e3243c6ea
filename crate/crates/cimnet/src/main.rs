use std::process::ExitCode;

fn main() -> ExitCode {
    cimnet::cli::main_with_args(std::env::args_os())
}
