use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(lppl_cli::run(std::env::args_os()))
}
