use clap::Parser;

fn main() {
    let cli = sbss_cli::Cli::parse();
    std::process::exit(sbss_cli::run(cli));
}
