use clap::Parser;

fn main() {
    let cli = raonakra_cli::Cli::parse();
    std::process::exit(raonakra_cli::run(&cli));
}
