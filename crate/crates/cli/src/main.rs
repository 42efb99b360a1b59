use std::process::ExitCode;

fn main() -> ExitCode {
    codegraph_cli::cli::run(std::env::args_os())
}
