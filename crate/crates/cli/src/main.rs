use clap::Parser;

fn main() {
    let cli = biocontrol_cli::Cli::parse();
    if let Err(err) = biocontrol_cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
