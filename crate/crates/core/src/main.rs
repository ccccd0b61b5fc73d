use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bohm_analog::config::{output_root, ExperimentKind, RunConfig, OUTPUT_ROOT_VAR};
use bohm_analog::experiment::{analyze_run, run_experiment};
use bohm_analog::gaussian::{integrate_variance_ode, modified_stiffness, stationary_variance};
use bohm_analog::output::fmt;
use bohm_analog::{Result, StiffnessProtocol};

#[derive(Parser)]
#[command(name = "bohm-analog", version, about = "Brownian ensembles coupled through a self-consistent Bohm drift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output root (default: $BOHM_ANALOG_OUT or ./runs).
        #[arg(long)]
        out_root: Option<PathBuf>,
        /// Run directory name (default: the config's `name`).
        #[arg(long)]
        name: Option<String>,
        /// Replace an existing run directory.
        #[arg(long)]
        force: bool,
    },
    /// Re-derive result tables from a finished run's archives.
    Analyze {
        run_dir: PathBuf,
        /// Output root (default: next to the run directory).
        #[arg(long)]
        out_root: Option<PathBuf>,
        /// Output directory name (default: <run>-analysis).
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        force: bool,
    },
    /// List presets, or print one as a documented config file.
    Presets { name: Option<String> },
    /// Integrate the Gaussian variance equation for a stiffness step.
    Ode {
        #[arg(long, default_value_t = 2.0)]
        kappa_initial: f64,
        #[arg(long, default_value_t = 0.5)]
        kappa_final: f64,
        #[arg(long, default_value_t = 1.0)]
        step_time: f64,
        #[arg(long, default_value_t = 1.8)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 12.0)]
        horizon: f64,
        /// Initial variance (default: stationary at the initial stiffness).
        #[arg(long)]
        s0: Option<f64>,
        /// CSV destination (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            out_root,
            name,
            force,
        } => {
            let mut cfg = RunConfig::from_path(&config)?;
            if let Some(name) = name {
                cfg.name = name;
            }
            let dir = run_experiment(&cfg, &out_root.unwrap_or_else(output_root), force)?;
            println!("{}", dir.display());
        }
        Command::Analyze {
            run_dir,
            out_root,
            name,
            force,
        } => {
            let default_name = run_dir
                .file_name()
                .map(|n| format!("{}-analysis", n.to_string_lossy()))
                .unwrap_or_else(|| "analysis".into());
            let root = out_root.unwrap_or_else(|| run_dir.parent().unwrap_or(Path::new(".")).to_path_buf());
            let dir = analyze_run(&run_dir, &root, &name.unwrap_or(default_name), force)?;
            println!("{}", dir.display());
        }
        Command::Presets { name: None } => {
            for kind in ExperimentKind::ALL {
                println!("{:<15} {}", kind.name(), kind.summary());
            }
            println!("\nRuns are written under ${OUTPUT_ROOT_VAR} (default ./runs).");
        }
        Command::Presets { name: Some(name) } => {
            let kind: ExperimentKind = name
                .parse()
                .map_err(|reason| bohm_analog::Error::InvalidParameter { name: "preset", reason })?;
            print!("{}", RunConfig::preset(kind).documented_text());
        }
        Command::Ode {
            kappa_initial,
            kappa_final,
            step_time,
            epsilon,
            dt,
            horizon,
            s0,
            out,
        } => {
            let protocol = StiffnessProtocol::step(kappa_initial, kappa_final, step_time)?;
            let s0 = match s0 {
                Some(s) => s,
                None => stationary_variance(kappa_initial, epsilon)?,
            };
            let series = integrate_variance_ode(&protocol, epsilon, s0, dt, horizon)?;
            let kappa_bar = modified_stiffness(&protocol, &series, epsilon)?;
            let mut w: Box<dyn Write> = match &out {
                Some(p) => Box::new(std::fs::File::create(p).map_err(|e| bohm_analog::Error::Io {
                    path: p.clone(),
                    source: e,
                })?),
                None => Box::new(std::io::stdout().lock()),
            };
            let mut csv = csv::Writer::from_writer(&mut w);
            csv.write_record(["time", "S_ode", "kappa", "kappa_bar"])?;
            for ((&t, &s), &kb) in series.times().iter().zip(series.values()).zip(kappa_bar.values()) {
                csv.write_record([fmt(t), fmt(s), fmt(protocol.kappa_at(t)), fmt(kb)])?;
            }
            csv.flush().map_err(|e| bohm_analog::Error::Io {
                path: out.unwrap_or_else(|| "<stdout>".into()),
                source: e,
            })?;
        }
    }
    Ok(())
}
