use std::process::ExitCode;

fn main() -> ExitCode {
    nanohydra::cli::main_with_args(std::env::args_os())
}
