use clap::Parser;

fn main() {
    let cli = choreo_service::cli::Cli::parse();
    let mut out = std::io::stdout().lock();
    if let Err(e) = choreo_service::cli::run(cli, &mut out) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
