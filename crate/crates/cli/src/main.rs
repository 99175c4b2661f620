use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Mutex;

use anyhow::Result;
use clap::{Parser, Subcommand};
use linfid::{run_experiment, Config};

#[derive(Parser)]
#[command(
    name = "linfid",
    version,
    about = "Source identification by L^p to L^inf continuation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more experiments.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Override the output directory; with several configs each run gets a subdirectory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the data seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Experiments to run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check a config and print the effective configuration.
    Validate { config: PathBuf },
}

fn load(
    path: &PathBuf,
    output_dir: Option<&PathBuf>,
    many: bool,
    seed: Option<u64>,
) -> Result<Config> {
    let mut cfg = Config::from_file(path)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = if many {
            dir.join(path.file_stem().unwrap_or_default())
        } else {
            dir.clone()
        };
    }
    if let Some(s) = seed {
        match &mut cfg.data {
            linfid::config::DataSpec::Manufactured { seed, .. }
            | linfid::config::DataSpec::External { seed, .. } => *seed = s,
        }
    }
    Ok(cfg)
}

fn run_one(path: &PathBuf, output_dir: Option<&PathBuf>, many: bool, seed: Option<u64>) -> bool {
    let outcome = load(path, output_dir, many, seed).and_then(|cfg| run_experiment(&cfg));
    match outcome {
        Ok(o) => {
            for f in &o.report.failures {
                eprintln!("{}: {:?}: {}", path.display(), f.stage, f.message);
            }
            println!(
                "{}: {} rungs -> {} ({})",
                path.display(),
                o.report.rows.len(),
                o.dir.display(),
                if o.ok() { "ok" } else { "with failures" }
            );
            o.ok()
        }
        Err(e) => {
            eprintln!("{}: {e:#}", path.display());
            false
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match Config::from_file(&config) {
            Ok(cfg) => {
                print!("{}", cfg.to_ini());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{}: {e}", config.display());
                ExitCode::FAILURE
            }
        },
        Command::Run {
            configs,
            output_dir,
            seed,
            jobs,
        } => {
            let many = configs.len() > 1;
            let queue = Mutex::new(configs.iter());
            let all_ok = Mutex::new(true);
            std::thread::scope(|s| {
                for _ in 0..jobs.clamp(1, configs.len()) {
                    s.spawn(|| loop {
                        let next = queue.lock().unwrap().next();
                        let Some(path) = next else { break };
                        if !run_one(path, output_dir.as_ref(), many, seed) {
                            *all_ok.lock().unwrap() = false;
                        }
                    });
                }
            });
            if all_ok.into_inner().unwrap() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
