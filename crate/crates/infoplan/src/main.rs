use std::process::ExitCode;

fn main() -> ExitCode {
    infoplan::cli::main()
}
