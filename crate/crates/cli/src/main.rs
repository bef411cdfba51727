use clap::Parser;
use scq_cli::{commands, Cli};

fn main() {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    if let Err(e) = commands::run(cli, &mut stdout.lock(), &mut stderr.lock()) {
        match &e {
            commands::CliError::Client(scq_cli::ClientError::Rejected(_)) => {}
            _ => eprintln!("error: {e}"),
        }
        std::process::exit(e.exit_code());
    }
}
