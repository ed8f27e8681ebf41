use clap::Parser;
use lindstedt::cli::{execute, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and exit cleanly;
            // everything else is a usage error.
            let _ = e.print();
            let code = if e.use_stderr() { 2 } else { 0 };
            std::process::exit(code);
        }
    };
    if let Err(e) = execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
