use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use lorenz_renorm_cli::{run_file, Options};

/// Run a Lorenz map renormalization job described by a JSON spec.
#[derive(Parser, Debug)]
#[command(name = "lorenz-renorm", version)]
struct Args {
    /// Job spec file.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, env = "LORENZ_RENORM_THREADS")]
    threads: Option<usize>,
    /// RNG seed; overrides the spec.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "warn")]
    log_level: log::LevelFilter,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::new().filter_level(args.log_level).init();
    let opts = Options { seed: args.seed, threads: args.threads };
    match run_file(&args.spec, &args.out, &opts) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lorenz-renorm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
