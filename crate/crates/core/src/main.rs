use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(predictive_regression::cli::main_with_args(std::env::args_os()))
}
