use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use polcrypt::experiments::{all_checks_passed, emit_csv, run_experiment, write_csv, ExperimentConfig, ExperimentKind};

mod plot;

/// Environment variable holding the worker count.
const WORKERS_ENV: &str = "POLCRYPT_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "polcrypt", version, about = "Polarization-domain encipherment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// BER against SNR for the legitimate receiver, eavesdroppers and the unencrypted link.
    BerSweep(Common),
    /// BER against rotation angle for the rotation scheme.
    RotationSweep(Common),
    /// Amount of transformation and its bounds for random matrices, against the trace.
    QMetrics(Common),
    /// Measured and predicted Stokes moments after square-law detection.
    StokesStats(Common),
    /// Per-parameter Stokes SNR against input SNR.
    SnrTransform(Common),
    /// BER and post-detection SNR against cross-polarization or unbalance.
    ImperfectionSweep(Common),
    /// Runs the invariant suite; exits non-zero on any failure.
    Validate(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// golden, rotation, opposite or none.
    #[arg(long)]
    scheme: Option<String>,
    /// Constellation size (2, 4, 8, 16 or 32).
    #[arg(long)]
    m: Option<usize>,
    /// First SNR point in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_start: Option<String>,
    /// Last SNR point in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_stop: Option<String>,
    /// SNR spacing in dB.
    #[arg(long)]
    snr_step: Option<String>,
    /// Blocks per point, matrices, samples or cases, depending on the experiment.
    #[arg(long)]
    trials: Option<usize>,
    /// Payload bits per block.
    #[arg(long)]
    block_bits: Option<usize>,
    /// Rotation angle, or a range `start:stop`; accepts forms like `pi/2`.
    #[arg(long)]
    theta: Option<String>,
    /// Number of angles in a theta range.
    #[arg(long)]
    theta_steps: Option<usize>,
    /// Real part of the far end of the ξ grid.
    #[arg(long, allow_hyphen_values = true)]
    xi_re: Option<String>,
    /// Imaginary part of the far end of the ξ grid.
    #[arg(long, allow_hyphen_values = true)]
    xi_im: Option<String>,
    /// Number of ξ points.
    #[arg(long)]
    xi_steps: Option<usize>,
    /// cross_pol or unbalanced.
    #[arg(long)]
    impairment: Option<String>,
    /// Master seed (decimal or 0x-prefixed hex).
    #[arg(long)]
    seed: Option<String>,
    /// CSV output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG plot output path.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// key = value settings file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn settings(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        push("scheme", self.scheme.clone());
        push("m", self.m.map(|v| v.to_string()));
        push("snr_start", self.snr_start.clone());
        push("snr_stop", self.snr_stop.clone());
        push("snr_step", self.snr_step.clone());
        push("trials", self.trials.map(|v| v.to_string()));
        push("block_bits", self.block_bits.map(|v| v.to_string()));
        push("impairment", self.impairment.clone());
        push("theta", self.theta.clone());
        push("theta_steps", self.theta_steps.map(|v| v.to_string()));
        push("xi_re", self.xi_re.clone());
        push("xi_im", self.xi_im.clone());
        push("xi_steps", self.xi_steps.map(|v| v.to_string()));
        push("seed", self.seed.clone());
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        out
    }
}

fn build_config(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(kind);
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
        if cfg.kind != kind {
            bail!("{} describes a {} experiment, not {}", path.display(), cfg.kind, kind);
        }
    }
    let settings = common.settings();
    // A single --snr-start without --snr-stop means a single point.
    if settings.iter().any(|(k, _)| *k == "snr_start") && !settings.iter().any(|(k, _)| *k == "snr_stop") {
        let start = &settings.iter().find(|(k, _)| *k == "snr_start").unwrap().1;
        cfg.set("snr_stop", start)?;
    }
    for (k, v) in &settings {
        cfg.set(k, v)?;
    }
    if kind == ExperimentKind::RotationSweep && cfg.theta.is_none() {
        bail!("rotation-sweep needs --theta");
    }
    cfg.validate()?;
    Ok(cfg)
}

fn workers() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => bail!("{WORKERS_ENV} must be a positive integer, got '{v}'"),
        },
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (kind, common) = match &cli.command {
        Command::BerSweep(c) => (ExperimentKind::BerSweep, c),
        Command::RotationSweep(c) => (ExperimentKind::RotationSweep, c),
        Command::QMetrics(c) => (ExperimentKind::QVsTrace, c),
        Command::StokesStats(c) => (ExperimentKind::StokesStats, c),
        Command::SnrTransform(c) => (ExperimentKind::SnrTransform, c),
        Command::ImperfectionSweep(c) => (ExperimentKind::ImperfectionSweep, c),
        Command::Validate(c) => (ExperimentKind::Validate, c),
    };
    let cfg = build_config(kind, common)?;
    let records = run_experiment(&cfg, workers()?)?;
    match &cfg.out_path {
        Some(path) => emit_csv(&records, path)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(&records, &mut lock).context("writing CSV to standard output")?;
            lock.flush()?;
        }
    }
    if let Some(path) = &common.plot {
        plot::emit_plot(&records, path)?;
    }
    if kind == ExperimentKind::Validate {
        let failed: Vec<_> = records.iter().filter(|r| r.errors > 0).collect();
        for r in &failed {
            let name = r.aux.first().map_or("?", |(n, _)| n.as_str());
            eprintln!("check {name} failed in {} of {} cases", r.errors, r.bits);
        }
        if !all_checks_passed(&records) {
            return Ok(ExitCode::FAILURE);
        }
        eprintln!("all {} checks passed", records.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
