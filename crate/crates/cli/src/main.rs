use sefusion_cli::args::{self, Command};
use sefusion_cli::commands;
use sefusion_cli::config::RunConfig;

fn run() -> sefusion_cli::Result<()> {
    let invocation = args::parse(std::env::args().skip(1))?;
    match invocation.command {
        Command::GradCheck => commands::cmd_gradcheck(),
        command => {
            let cfg = RunConfig::load(&invocation.overrides)?;
            match command {
                Command::Train => commands::cmd_train(&cfg),
                Command::Cv => commands::cmd_cv(&cfg),
                Command::Grid => commands::cmd_grid(&cfg),
                Command::Augment => commands::cmd_augment(&cfg),
                Command::Report => commands::cmd_report(&cfg),
                Command::GradCheck => unreachable!("handled above"),
            }
        }
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
