use std::process::ExitCode;

fn main() -> ExitCode {
    galerkin_core::cli::main_with_args(std::env::args_os())
}
