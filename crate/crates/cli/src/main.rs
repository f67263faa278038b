use clap::Parser;

fn main() {
    let cli = fcqkd_cli::Cli::parse();
    std::process::exit(fcqkd_cli::run(&cli));
}
