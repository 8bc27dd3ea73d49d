use std::io::{self, IsTerminal};
use std::process::ExitCode;

use restruct_service::ServiceConfig;
use tracing_subscriber::filter::LevelFilter;

fn main() -> ExitCode {
    // Only the long-running service logs progress.
    let serving = std::env::args().nth(1).as_deref() == Some("serve");
    let level = if serving { LevelFilter::INFO } else { LevelFilter::WARN };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_ansi(io::stderr().is_terminal())
        .with_writer(io::stderr)
        .init();
    let config = match ServiceConfig::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(restruct_cli::EXIT_USAGE as u8);
        }
    };
    let (mut stdin, mut stdout, mut stderr) = (io::stdin().lock(), io::stdout().lock(), io::stderr().lock());
    let mut io = restruct_cli::Io { stdin: &mut stdin, stdout: &mut stdout, stderr: &mut stderr };
    let code = restruct_cli::run(std::env::args_os(), &config, &mut io);
    ExitCode::from(code as u8)
}
