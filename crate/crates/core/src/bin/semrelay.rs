use clap::Parser;
use semrelay::cli::{run, Cli};

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("{}: {e}", e.kind());
        std::process::exit(1);
    }
}
