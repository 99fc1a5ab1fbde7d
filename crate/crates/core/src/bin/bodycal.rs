use std::path::PathBuf;
use std::process::ExitCode;

use bodycal::harness::{self, ExperimentConfig};
use bodycal::noise::NoiseMode;
use bodycal::selection::Method;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Active kinematic calibration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment suite and write CSV results plus a manifest.
    Run {
        /// TOML configuration or a manifest from an earlier run. Built-in defaults if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset of r, al, ucsal, ccsal.
        #[arg(long)]
        methods: Option<String>,
        /// pdn or cn.
        #[arg(long)]
        noise: Option<NoiseMode>,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

fn run(cli: Cli) -> bodycal::Result<()> {
    match cli.command {
        Command::DefaultConfig => {
            print!("{}", ExperimentConfig::default().to_toml_string()?);
            Ok(())
        }
        Command::Run {
            config,
            out,
            reps,
            iterations,
            seed,
            methods,
            noise,
        } => {
            let mut cfg = match &config {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::default(),
            };
            let e = &mut cfg.experiment;
            if let Some(r) = reps {
                e.repetitions = r;
            }
            if let Some(i) = iterations {
                e.iterations = i;
            }
            if let Some(s) = seed {
                e.master_seed = s;
            }
            if let Some(m) = methods {
                e.methods = Method::parse_list(&m)?;
            }
            if let Some(n) = noise {
                e.noise_mode = n;
            }
            if let Some(o) = &out {
                e.output_dir = o.display().to_string();
            }
            cfg.manifest = None;
            let exp = cfg.build()?;
            let suite = harness::run_suite(&exp);
            let dir = PathBuf::from(&cfg.experiment.output_dir);
            harness::emit_outputs(&suite, &cfg, &dir)?;
            for row in harness::summary_rows(&suite) {
                println!(
                    "{:<9} pos {:8.3} mm  rot {:7.3} deg  move {:9.1} deg  discarded {:5.2}  failed {}",
                    row.label, row.pos_err_mean, row.rot_err_mean, row.cum_move_mean, row.discarded_mean, row.failed_runs
                );
            }
            println!("results written to {}", dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
