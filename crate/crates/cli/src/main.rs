use clap::Parser;

fn main() {
    std::process::exit(bioinverse::run(bioinverse::Cli::parse()));
}
