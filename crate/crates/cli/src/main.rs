use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = msn_cli::Cli::parse();
    match msn_cli::execute(&cli) {
        Ok(manifest) => {
            eprintln!(
                "wrote {} to {}",
                manifest.emitted_files.join(", "),
                manifest.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
