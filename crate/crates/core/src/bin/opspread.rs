use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};

use opspread::cli::{self, ExperimentConfig, Panel};
use opspread::{Error, Result};

#[derive(Parser)]
#[command(name = "opspread", version, about = "Operator spreading via weak-measurement tomography and Krylov chains")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the parameter sweep described by a config file.
    Run {
        config: PathBuf,
        /// Override a config entry, e.g. `--set h_z=0.4`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (default: config `out`, then $OPSPREAD_OUT, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the ensemble (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Render SVG panels from a run directory.
    Plot {
        dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "fidelity,entropy,fisher,rank")]
        panels: Vec<String>,
        /// Directory for the SVG files (default: the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Run { config, overrides, out, seed, threads } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            for o in &overrides {
                cfg.apply_override(o)?;
            }
            if let Some(s) = seed {
                cfg.seed = Some(s);
            }
            if out.is_some() {
                cfg.out = out;
            }
            let dir = cfg
                .out
                .clone()
                .or_else(|| std::env::var_os(cli::OUT_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            cfg.validate()?;
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(n) = threads {
                if n == 0 {
                    return Err(Error::Config("--threads must be >= 1".into()));
                }
                pool = pool.num_threads(n);
            }
            let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            let manifest = pool.install(|| cli::run_experiment(&cfg, &dir))?;
            if manifest.warnings > 0 {
                warn!("{} projections did not converge; see the unconverged column", manifest.warnings);
            }
            info!("wrote {} in {:.1} s", dir.display(), manifest.wall_time_s);
            Ok(())
        }
        Command::Plot { dir, panels, out } => {
            let panels: Vec<Panel> = panels.iter().map(|p| p.parse()).collect::<Result<_>>()?;
            for path in cli::plot(&dir, &panels, out.as_deref())? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
