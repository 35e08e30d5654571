use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(gdsl::cli::run(std::env::args_os()))
}
