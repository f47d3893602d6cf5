use std::process::ExitCode;

fn main() -> ExitCode {
    let code = gca_core::cli::run(std::env::args_os(), &mut std::io::stdout());
    ExitCode::from(code)
}
