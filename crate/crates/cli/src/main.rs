use clap::Parser;

fn main() {
    let cli = polarsk_cli::Cli::parse();
    std::process::exit(polarsk_cli::run(cli));
}
