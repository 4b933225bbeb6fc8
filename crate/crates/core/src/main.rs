use clap::Parser;
use nlhodge::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if !outcome.pass {
                eprintln!("checks failed; see {}", outcome.out_dir.join("report.json").display());
            }
            std::process::exit(outcome.exit_code());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
