use std::process::ExitCode;

fn main() -> ExitCode {
    pacs_cli::run(std::env::args_os())
}
