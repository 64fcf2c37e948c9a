use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(dvao_cli::run(std::env::args_os()))
}
