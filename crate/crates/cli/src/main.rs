//! `mnx`: run expansion experiments and write tables and plots.

mod config;
mod emit;
mod run;
mod svg;

use std::process::ExitCode;

use clap::Parser;

use config::{read_file, resolve, thread_count, FileConfig, UsageError};
use run::{build_model, build_scheme, execute, Job};

#[derive(Parser)]
#[command(
    name = "mnx",
    version,
    about = "Second-order expansions for quadratic forms of diffusions"
)]
struct Cli {
    #[command(subcommand)]
    command: config::Command,
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, flags) = cli.command.split();
    let prepared = (|| -> Result<_, UsageError> {
        let file = match &flags.config {
            Some(p) => read_file(p)?,
            None => FileConfig {
                version: config::CONFIG_VERSION,
                ..Default::default()
            },
        };
        let cfg = resolve(mode, &flags, file)?;
        let spec = build_model(&cfg)?;
        let default_scheme = if mode == config::Mode::Residual {
            "milstein"
        } else {
            "euler"
        };
        let scheme = build_scheme(&cfg, default_scheme)?;
        let threads = thread_count(flags.threads)?;
        Ok((cfg, spec, scheme, threads))
    })();
    let (cfg, spec, scheme, threads) = match prepared {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let job = Job {
        cfg: &cfg,
        spec: &spec,
        scheme,
        threads,
    };
    let result = execute(&job).and_then(|out| out.write(&cfg.out));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
