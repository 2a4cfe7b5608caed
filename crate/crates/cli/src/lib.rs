//! Command-line front end for the `mplql` simulator: layered configuration,
//! sweep execution and result/trace writers.

pub mod config;
pub mod emit;
pub mod repro;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mplql::engine::{run_realization_with, RunOptions};
use mplql::montecarlo::{derive_seed, run_sweep};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use config::{parse_config, ConfigError, Resolved, Setting};
use emit::{emit_results, emit_trace};
use repro::Figure;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_WARNING: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "mplql",
    version,
    about = "Grant-free NOMA random access simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a single parameter point.
    Run(Overrides),
    /// Simulate every point of a grid; list flags take comma-separated values.
    Sweep(Overrides),
    /// Run the canned sweep behind one of the standard figures.
    Repro {
        figure: Figure,
        /// Use the full realization count.
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug, Default, Clone, Args)]
pub struct Overrides {
    /// Flat key = value config file, applied before the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// mpl-ql, independent-ql, collaborative-ql, packet-ql or slotted-aloha.
    #[arg(long)]
    pub protocol: Option<String>,
    /// Devices per slot; sets the device count.
    #[arg(long)]
    pub load: Option<String>,
    #[arg(long)]
    pub devices: Option<String>,
    /// Number of transmit power levels.
    #[arg(long)]
    pub levels: Option<String>,
    /// Residual cancellation error factor in [0, 1].
    #[arg(long)]
    pub beta: Option<String>,
    /// Learning rate in [0, 1].
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub slots: Option<String>,
    #[arg(long)]
    pub packets: Option<String>,
    /// Linear SINR threshold.
    #[arg(long)]
    pub gamma_lin: Option<String>,
    /// Spectral efficiency in bit/s/Hz; threshold becomes 2^se - 1.
    #[arg(long)]
    pub spectral_eff: Option<String>,
    #[arg(long)]
    pub cell_radius_m: Option<String>,
    #[arg(long)]
    pub ref_distance_m: Option<String>,
    #[arg(long)]
    pub bandwidth_hz: Option<String>,
    #[arg(long)]
    pub carrier_hz: Option<String>,
    #[arg(long)]
    pub pathloss_exponent: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub noise_psd_dbm_hz: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub max_power_dbm: Option<String>,
    /// positive or symmetric.
    #[arg(long)]
    pub level_mode: Option<String>,
    /// Frame cap per realization (default 10 x packets).
    #[arg(long)]
    pub max_frames: Option<String>,
    /// Slotted ALOHA also checks the SINR of a lone transmission.
    #[arg(long)]
    pub sa_sinr_check: bool,
    /// Monte Carlo realizations per grid point.
    #[arg(long)]
    pub runs: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Worker threads; 0 picks automatically, 1 runs sequentially.
    #[arg(long, env = "MPLQL_THREADS")]
    pub threads: Option<String>,
    /// median, none, or comma-separated device ids.
    #[arg(long)]
    pub tracking: Option<String>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Results file (default stdout).
    #[arg(long)]
    pub out: Option<String>,
    /// NDJSON trace of the first realization of the first grid point.
    #[arg(long)]
    pub trace: Option<String>,
    /// Exit 0 even when convergence warnings are raised.
    #[arg(long)]
    pub warn_only: bool,
}

impl Overrides {
    pub fn settings(&self) -> Vec<Setting> {
        let mut out = Vec::new();
        let mut add = |key: &str, v: &Option<String>| {
            if let Some(v) = v {
                out.push(Setting::flag(key, v));
            }
        };
        add("protocol", &self.protocol);
        add("load", &self.load);
        add("devices", &self.devices);
        add("levels", &self.levels);
        add("beta", &self.beta);
        add("alpha", &self.alpha);
        add("slots", &self.slots);
        add("packets", &self.packets);
        add("gamma_lin", &self.gamma_lin);
        add("spectral_eff", &self.spectral_eff);
        add("cell_radius_m", &self.cell_radius_m);
        add("ref_distance_m", &self.ref_distance_m);
        add("bandwidth_hz", &self.bandwidth_hz);
        add("carrier_hz", &self.carrier_hz);
        add("pathloss_exponent", &self.pathloss_exponent);
        add("noise_psd_dbm_hz", &self.noise_psd_dbm_hz);
        add("max_power_dbm", &self.max_power_dbm);
        add("level_mode", &self.level_mode);
        add("max_frames", &self.max_frames);
        add("runs", &self.runs);
        add("seed", &self.seed);
        add("threads", &self.threads);
        add("tracking", &self.tracking);
        add("format", &self.format);
        add("out", &self.out);
        add("trace", &self.trace);
        if self.sa_sinr_check {
            out.push(Setting::flag("sa_sinr_check", "true"));
        }
        if self.warn_only {
            out.push(Setting::flag("warn_only", "true"));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("`run` takes a single parameter point but the grid has {0}; use `sweep`")]
    NotSinglePoint(usize),
    #[error("simulation failed: {0}")]
    Simulation(#[from] mplql::Error),
    #[error("cannot write {target}: {source}")]
    Sink { target: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::NotSinglePoint(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }
}

/// Resolves the configuration for a parsed command line.
pub fn resolve_command(command: &Command) -> Result<Resolved, CliError> {
    let (preset, overrides) = match command {
        Command::Run(o) | Command::Sweep(o) => (Vec::new(), o),
        Command::Repro {
            figure,
            full,
            overrides,
        } => (figure.preset(*full), overrides),
    };
    let resolved = parse_config(preset, overrides.config.as_deref(), overrides.settings())?;
    if let Command::Run(_) = command {
        let n = resolved
            .sweep
            .points()
            .map_err(ConfigError::from_core)?
            .len();
        if n != 1 {
            return Err(CliError::NotSinglePoint(n));
        }
    }
    Ok(resolved)
}

impl ConfigError {
    fn from_core(e: mplql::Error) -> ConfigError {
        ConfigError::Invalid(vec![(config::Origin::Preset("grid".into()), e)])
    }
}

/// Runs a command, writing results to `--out` or `stdout`. Returns the exit
/// status.
pub fn execute(command: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match try_execute(command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn try_execute(
    command: &Command,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    let Resolved { sweep, output } = resolve_command(command)?;
    let result = run_sweep(&sweep)?;

    let sink = |target: &str| {
        let target = target.to_string();
        move |source| CliError::Sink { target, source }
    };
    match &output.out {
        Some(path) => {
            let name = path.display().to_string();
            let file = File::create(path).map_err(sink(&name))?;
            let mut w = BufWriter::new(file);
            emit_results(&result, output.format, &mut w).map_err(sink(&name))?;
            w.flush().map_err(sink(&name))?;
        }
        None => emit_results(&result, output.format, stdout).map_err(sink("stdout"))?,
    }

    if let Some(path) = &output.trace {
        let params = &sweep.points()?[0];
        let seed = derive_seed(sweep.master_seed, 0, 0);
        let opts = RunOptions {
            tracking: (&sweep.tracking).into(),
            distances: None,
        };
        let run = run_realization_with(params, &opts, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let name = path.display().to_string();
        let file = File::create(path).map_err(sink(&name))?;
        let mut w = BufWriter::new(file);
        emit_trace(params, sweep.master_seed, seed, &run, &mut w).map_err(sink(&name))?;
        w.flush().map_err(sink(&name))?;
    }

    let flagged: Vec<_> = result
        .points
        .iter()
        .filter(|p| p.convergence_warning)
        .collect();
    if flagged.is_empty() {
        return Ok(EXIT_OK);
    }
    let _ = writeln!(
        stderr,
        "warning: {} of {} grid point(s) have more than half of their realizations stopped at the frame cap",
        flagged.len(),
        result.points.len()
    );
    for p in flagged.iter().take(10) {
        let _ = writeln!(
            stderr,
            "  {} load={} levels={} beta={} alpha={}: not converged {:.0}%",
            p.protocol,
            p.load_factor,
            p.levels,
            p.beta,
            p.alpha,
            100.0 * p.stats.not_converged_rate
        );
    }
    Ok(if output.warn_only {
        EXIT_OK
    } else {
        EXIT_WARNING
    })
}
