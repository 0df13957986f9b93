use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use uaplab::{output, run_and_write, Command, ExperimentConfig};

/// Numerical experiments on deep feed-forward approximation.
#[derive(Debug, Parser)]
#[command(name = "uaplab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON config: { "params": {..}, "seed"?, "output_path"? }
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's output_path, then ".".
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Run {
    code: u8,
    stdout: String,
    stderr: String,
}

fn run(cli: Cli) -> Run {
    let name = cli.command.name();
    let res = ExperimentConfig::load(&cli.config, cli.command, cli.seed).and_then(|cfg| {
        let out = cli.out.clone().or_else(|| cfg.output_path.clone()).unwrap_or_else(|| PathBuf::from("."));
        run_and_write(&cfg, &out)
    });
    match res {
        Ok(files) => Run { code: 0, stdout: files.result.display().to_string(), stderr: String::new() },
        Err(e) => {
            let doc = e.to_json(Some(name));
            Run {
                code: e.exit_code() as u8,
                stdout: String::from_utf8_lossy(&output::pretty(&doc)).trim_end().to_string(),
                stderr: format!("uaplab {name}: {e}"),
            }
        }
    }
}

fn run_args(args: impl IntoIterator<Item = OsString>) -> Run {
    run(Cli::parse_from(args))
}

fn main() -> ExitCode {
    let r = run_args(std::env::args_os());
    println!("{}", r.stdout);
    if !r.stderr.is_empty() {
        eprintln!("{}", r.stderr);
    }
    ExitCode::from(r.code)
}

#[cfg(test)]
mod cli_tests;
