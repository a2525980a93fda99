use clap::Parser;
use ghostim::Error;

fn main() {
    let cli = ghostim_cli::Cli::parse();
    let code = match ghostim_cli::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 2,
                _ => 1,
            }
        }
    };
    std::process::exit(code);
}
