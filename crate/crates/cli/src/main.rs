use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(compshare_cli::run(std::env::args_os()))
}
