use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::Parser;
use vvlab::cli::{run, Command, Config};

/// Vanishing-viscosity experiments for rough transport and Burgers equations.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// One of solve, sweep-holder, sweep-unique, burgers-steady, peano, norms, schedule, report.
    #[arg(value_parser = PossibleValuesParser::new(Command::ALL.map(Command::name)))]
    command: String,
    /// TOML configuration file.
    config: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = Command::parse(&args.command).expect("validated by clap");
    let result = (|| {
        #[cfg(feature = "parallel")]
        vvlab::cli::configure_workers()?;
        let cfg = Config::load(&args.config)?;
        run(command, &cfg)
    })();
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprint!("error: {e}");
            if !e.to_string().ends_with('\n') {
                eprintln!();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
