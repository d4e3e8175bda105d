use clap::Parser;
use heom_cli::{execute, Cli, EXIT_ERROR, EXIT_USAGE};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = execute(cli).unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        EXIT_ERROR
    });
    std::process::exit(code);
}
