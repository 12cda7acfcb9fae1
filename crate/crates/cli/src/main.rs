use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ebcc_cli::run(std::env::args_os()))
}
