use clap::Parser;
use diras::cli::{diras_env, run, Cli};
use tracing_subscriber::EnvFilter;

fn main() {
    tracing_subscriber::fmt()
        .json()
        .with_writer(std::io::stderr)
        .with_env_filter(EnvFilter::try_from_env("DIRAS_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .init();

    let cli = Cli::parse();
    match run(cli, &diras_env()) {
        Ok(summary) => println!("{summary}"),
        Err(e) => {
            let causes: Vec<String> = e.chain().skip(1).map(|c| c.to_string()).collect();
            eprintln!("{}", serde_json::json!({ "error": e.to_string(), "causes": causes }));
            std::process::exit(1);
        }
    }
}
