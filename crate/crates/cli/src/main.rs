//! `nhqc`: run one experiment and write its CSV tables plus `summary.json`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
//! guard (step-size advisory under `--strict`, state outside the heralded
//! subspace, impossible herald).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nhqc_core::experiment::{run, Experiment, ExperimentConfig, ScheduleConfig};
use nhqc_core::output::emit_outputs;
use nhqc_core::{Error, ModelLevel};

#[derive(Parser, Debug)]
#[command(name = "nhqc", version, about = "Heralded holonomic Rydberg gate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(clap::Args, Debug, Default)]
struct CommonArgs {
    /// TOML configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// L0 (full lab frame), L1 (blockade frame), L2 (effective), L3 (two-qubit RWA).
    #[arg(long, global = true)]
    model_level: Option<String>,
    #[arg(long, global = true)]
    gamma_khz: Option<f64>,
    /// Pulse-amplitude error; every Rabi amplitude is scaled by 1 + epsilon.
    #[arg(long, global = true, allow_hyphen_values = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Turn the step-size advisory into an error (exit code 3).
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Not gate: pulses, phases and fidelity curves.
    NotGate,
    /// Single-qubit gate with the schedule taken from the config file.
    SingleGate,
    /// C-Not gate on the two-qubit register.
    CnotGate,
    /// Final average fidelity over amplitude errors.
    ErrorSweep,
    /// Dissipative runs over decay rates.
    GammaSweep,
    /// Systematic-error sensitivity over the schedule parameters.
    QsMap,
    /// Heralded metrics at the published decay rates.
    Tables,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Self::NotGate => Experiment::NotGate,
            Self::SingleGate => Experiment::SingleGateCustom,
            Self::CnotGate => Experiment::CnotGate,
            Self::ErrorSweep => Experiment::ErrorSweep,
            Self::GammaSweep => Experiment::GammaSweep,
            Self::QsMap => Experiment::QsMap,
            Self::Tables => Experiment::Tables,
        }
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let experiment = cli.command.experiment();
    let mut cfg = match &cli.common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let mut c = ExperimentConfig::from_toml_str(&text)?;
            if c.experiment != experiment {
                return Err(Error::Config(format!(
                    "config is for `{}` but the subcommand runs `{}`",
                    c.experiment.name(),
                    experiment.name()
                )));
            }
            c.experiment = experiment;
            c
        }
        None => ExperimentConfig::new(experiment),
    };
    if experiment == Experiment::CnotGate && cfg.schedule.is_none() {
        cfg.schedule = Some(ScheduleConfig::Cnot { chi0: 1.0 });
    }
    let a = &cli.common;
    if let Some(level) = &a.model_level {
        cfg.model_level = ModelLevel::parse(level).map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(g) = a.gamma_khz {
        cfg.gamma_khz = g;
    }
    if let Some(e) = a.epsilon {
        cfg.epsilon = e;
        cfg.epsilon_effective = None;
    }
    if let Some(n) = a.steps {
        cfg.steps = Some(n);
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = &a.out {
        cfg.out = o.clone();
    }
    cfg.strict |= a.strict;
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 1,
        Error::StepTooCoarse(_) | Error::OutsideSubspace(_) | Error::HeraldImpossible(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(&cli).and_then(|cfg| {
        let out = run(&cfg)?;
        let files = emit_outputs(&out, &cfg.out)?;
        for f in files {
            println!("{}", f.display());
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
