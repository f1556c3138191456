use std::process::ExitCode;

fn main() -> ExitCode {
    notrade::cli::main_with(std::env::args_os())
}
