use clap::Parser;

fn main() -> std::process::ExitCode {
    cxrlabel::cli::run(cxrlabel::cli::Cli::parse())
}
