use std::process::ExitCode;

fn main() -> ExitCode {
    tilewalk::harness::cli::main()
}
