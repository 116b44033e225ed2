use clap::Parser;

fn main() {
    let cli = match fenrir::cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own help/version output goes through the same path.
            let code = if e.use_stderr() { fenrir::cli::EXIT_USAGE } else { fenrir::cli::EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(fenrir::cli::run(cli));
}
