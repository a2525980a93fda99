//! Command-line front end: configuration, the simulate/reconstruct/sweep
//! pipelines, artifact bookkeeping and the statistical self-test.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use ghostim::{Error, Result};
use std::path::PathBuf;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "GHOSTIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ghostim", version, about = "Speckle simulation and ghost imaging with thermal and superthermal light")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an ensemble, cache it to disk and report its g².
    Simulate(RunArgs),
    /// Compute a correlation map (autocorr, pixel, gi or dgi) and its metrics.
    Reconstruct(RunArgs),
    /// Contrast and SNR against the object-to-speckle area ratio, with fits.
    Sweep(RunArgs),
    /// Run the statistical acceptance suite.
    Selftest(SelftestArgs),
}

macro_rules! config_flags {
    ($($field:ident => $help:literal),* $(,)?) => {
        /// One optional flag per configuration key.
        #[derive(Debug, Default, Clone, Args)]
        pub struct ConfigFlags {
            $(
                #[arg(long, value_name = "VALUE", help = $help)]
                pub $field: Option<String>,
            )*
        }

        impl ConfigFlags {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            pub fn pairs(&self) -> Vec<(String, String)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$field {
                        out.push((stringify!($field).to_string(), v.clone()));
                    }
                )*
                out
            }
        }
    };
}

config_flags! {
    source => "thermal, case-a or case-b",
    mean => "mean intensity (thermal, case A)",
    mu_f => "case A: modes admitted by the pinhole",
    mu_s => "case A: modes of the second speckle pattern",
    mean_fund => "case B: mean fundamental intensity",
    mu => "case B: integer mode count",
    k => "case B: conversion efficiency",
    width => "grid width in pixels",
    height => "grid height in pixels",
    pixel_pitch => "pixel pitch in metres (documentation only)",
    speckle_radius => "Gaussian coherence radius in pixels",
    n_frames => "frames in the ensemble",
    seed => "master seed",
    scatterers => "case A: scatterers per frame",
    pinhole_radius => "case A: pinhole radius in pixels, or auto",
    mask => "object mask: none, square:N or a PGM path",
    reference => "DGI reference: auto or x0,y0,w,h",
    cache => "frame dump to analyse instead of generating, or none",
    method => "reconstruct: autocorr, pixel, gi or dgi",
    pixel => "pixel correlation reference: center or x,y",
    scale => "image scaling: minmax, max or fixed:lo,hi",
    ratios => "sweep: comma-separated area ratios",
    sources => "sweep: comma-separated sources",
    batches => "batches for jackknife errors",
    calibration_frames => "sweep: thermal frames for the speckle-area calibration",
    output_dir => "directory for all artifacts",
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` override, applied after the flags.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(flatten)]
    pub flags: ConfigFlags,
}

impl RunArgs {
    pub fn load(&self) -> Result<RunConfig> {
        let mut overrides = self.flags.pairs();
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    /// Comma-separated criteria to run (default: all).
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<u8>,
    /// Smaller ensembles; faster, with looser statistical power.
    #[arg(long)]
    pub quick: bool,
}

/// Worker threads from [`THREADS_ENV`]; 1 when unset, 0 means all cores.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} = {v}: expected a thread count"))),
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let threads = threads_from_env()?;
    match cli.command {
        Command::Simulate(a) => {
            let cfg = a.load()?;
            let s = ghostim::parallel::with_threads(threads, || commands::simulate(&cfg))??;
            println!("{s}");
        }
        Command::Reconstruct(a) => {
            let cfg = a.load()?;
            let r = ghostim::parallel::with_threads(threads, || commands::reconstruct(&cfg))??;
            println!("{r}");
        }
        Command::Sweep(a) => {
            let cfg = a.load()?;
            let r = ghostim::parallel::with_threads(threads, || commands::sweep(&cfg))??;
            for f in &r.fits {
                println!("{}", f.trailer().trim_start_matches("# "));
            }
            println!("{} records; wrote {}", r.records.len(), r.files.join(", "));
        }
        Command::Selftest(a) => {
            let scale = if a.quick { acceptance::Scale::Quick } else { acceptance::Scale::Full };
            let list = if a.criteria.is_empty() { acceptance::ALL.to_vec() } else { a.criteria };
            let mut failed = 0;
            for n in list {
                let o = ghostim::parallel::with_threads(threads, || acceptance::run_criterion(n, scale))??;
                println!("{o}");
                failed += usize::from(!o.passed);
            }
            return Ok(i32::from(failed > 0));
        }
    }
    Ok(0)
}
