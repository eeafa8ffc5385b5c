use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(tfdm_cli::run(std::env::args_os()))
}
