use clap::Parser;
use gharnack::cli::{run, Action, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match &cli.action {
        Action::Run(args) => run(args),
    };
    std::process::exit(code);
}
