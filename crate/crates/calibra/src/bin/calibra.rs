use clap::Parser;

fn main() {
    let cli = calibra::cli::Cli::parse();
    match calibra::cli::run(cli) {
        Ok(output) => {
            if output.out_path.is_none() {
                print!("{}", output.content);
            } else if let Some(path) = &output.out_path {
                eprintln!("wrote {}", path.display());
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
