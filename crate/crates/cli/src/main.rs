use clap::Parser;

fn main() {
    let cli = cmclab_cli::Cli::parse();
    std::process::exit(cmclab_cli::run(&cli));
}
