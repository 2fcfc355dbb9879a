use clap::Parser;
use rally_coach::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli, &mut std::io::stdout().lock(), &mut std::io::stderr()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
