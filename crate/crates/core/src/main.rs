use clap::Parser;

fn main() {
    let cli = finetype::cli::Cli::parse();
    if let Err(e) = finetype::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
