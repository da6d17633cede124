use clap::Parser;

use goal::cli::{init_threads, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(err) = init_threads().and_then(|()| run(&cli)) {
        eprintln!("error[{}]: {err}", err.code());
        std::process::exit(err.exit_code());
    }
}
