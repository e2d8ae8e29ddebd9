use std::process::ExitCode;

fn main() -> ExitCode {
    semimix::cli::main()
}
