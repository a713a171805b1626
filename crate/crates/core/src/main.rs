use std::process::ExitCode;

fn main() -> ExitCode {
    consensus_dyn::cli::main_entry()
}
