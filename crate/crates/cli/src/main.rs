use clap::Parser;

fn main() -> anyhow::Result<()> {
    klom_cli::execute(klom_cli::Cli::parse())
}
