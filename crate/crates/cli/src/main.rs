//! Command-line front end: generate scenarios, train twins, run detection,
//! evaluate metrics, or reproduce a whole experiment profile in one shot.
//!
//! Exit code 0 on success; on failure a machine-readable JSON error object is
//! printed to stderr and the exit code is nonzero.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use vesseltwin::pipeline::{
    detect_files, read_config, run_detect, run_evaluate, run_repro, run_simulate, run_train,
    Experiment, RunConfig, ScaleProfile,
};
use vesseltwin::twin::Variant;

#[derive(Parser)]
#[command(
    name = "vesseltwin",
    version,
    about = "Vessel maneuvering simulation, digital-twin training, and predictive OOD detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the train/test scenario matrix and write trajectory CSVs.
    Simulate {
        /// Run config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the DTM and DTC from a simulated dataset, writing a checkpoint.
    Train {
        /// Run config JSON; defaults to <out>/config.json.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score trajectories with a trained checkpoint.
    Detect {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Detection method: oddit, dtm-r or dtm-e.
        #[arg(long, default_value = "oddit")]
        variant: String,
        /// Explicit checkpoint path (file-list mode).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Trajectory CSVs for file-list mode; manifest mode when empty.
        trajectories: Vec<PathBuf>,
    },
    /// Build metric reports from verdict files.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full experiment profile: simulate, train, detect, evaluate.
    Repro {
        /// Experiment: sensor, actuator or current.
        experiment: String,
        /// Scale profile: desk or paper.
        #[arg(long, default_value = "desk")]
        profile: String,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Restrict to specific vessels (repeatable).
        #[arg(long)]
        vessel: Vec<String>,
    },
}

/// Resolve the effective config for stages that run after `simulate`.
fn load_config(
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<RunConfig, vesseltwin::Error> {
    let path = match (&config, &out) {
        (Some(c), _) => c.clone(),
        (None, Some(o)) => o.join("config.json"),
        (None, None) => {
            return Err(vesseltwin::Error::Pipeline(
                "pass --config or --out so the run config can be found".into(),
            ))
        }
    };
    let mut cfg = read_config(&path)?;
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), vesseltwin::Error> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let mut cfg = read_config(&config)?;
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let manifest = run_simulate(&cfg)?;
            println!("wrote {}", manifest.display());
        }
        Command::Train { config, out, seed } => {
            let cfg = load_config(config, out, seed)?;
            let checkpoint = run_train(&cfg)?;
            println!("wrote {}", checkpoint.display());
        }
        Command::Detect { config, out, variant, checkpoint, trajectories } => {
            let variant: Variant = variant.parse()?;
            if let Some(checkpoint) = checkpoint {
                let out_dir = out.unwrap_or_else(|| PathBuf::from("."));
                let written = detect_files(
                    &checkpoint,
                    &trajectories,
                    variant,
                    &out_dir,
                    Default::default(),
                )?;
                for w in written {
                    println!("wrote {}", w.display());
                }
            } else {
                let cfg = load_config(config, out, None)?;
                let manifest = run_detect(&cfg, variant)?;
                println!("wrote {}", manifest.display());
            }
        }
        Command::Evaluate { config, out } => {
            let cfg = load_config(config, out, None)?;
            let report = run_evaluate(&cfg, &Variant::ALL)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {}", cfg.report_dir().join("report.json").display());
        }
        Command::Repro { experiment, profile, out, seed, vessel } => {
            let experiment: Experiment = experiment.parse()?;
            let profile: ScaleProfile = profile.parse()?;
            let out_root = out.join(experiment.label());
            let vessels = if vessel.is_empty() { None } else { Some(vessel.as_slice()) };
            let summary = run_repro(experiment, profile, &out_root, seed, vessels)?;
            print!("{}", summary.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload =
                serde_json::json!({ "error": e.to_string(), "kind": e.kind() });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
