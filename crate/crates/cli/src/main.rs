use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(regkrylov_cli::run(std::env::args_os()))
}
