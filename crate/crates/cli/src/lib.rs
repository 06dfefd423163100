//! Command-line front end for spatial blind source separation: simulation
//! campaigns, single-dataset estimation, MDI scoring and plotting.

pub mod campaign;
pub mod config;
pub mod error;
pub mod estimate;
pub mod io;
pub mod plot;
pub mod stats;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use sbss_core::{mdi, KernelSpec, Method};

pub use campaign::{run_campaign, CampaignResult, CellSummary, ReplicateRow};
pub use config::{CampaignConfig, DriftEntry, EstimatorConfig, Mixing, Preset};
pub use error::{CliError, Result};
pub use estimate::{run_estimate, EstimateOptions};

#[derive(Debug, Parser)]
#[command(name = "sbss", version, about = "Spatial blind source separation with local covariance and local difference matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte-Carlo campaign and write results.csv, summary.csv and mdi_curves.svg.
    Simulate {
        /// JSON campaign config; its keys override the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Overrides master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: available cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides output_dir (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the unmixing matrix of one dataset.
    Estimate {
        /// CSV with a header naming lon,lat (or x,y) and the variables.
        data: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        /// Kernel as ball:R, ring:RI:RO, gauss:R or zero; repeat for several.
        #[arg(long = "kernel", value_parser = parse_kernel)]
        kernels: Vec<KernelSpec>,
        /// Variables are positive parts of a composition; analyse pivot coordinates.
        #[arg(long)]
        compositional: bool,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        /// Scale recovered components to unit variance (ldiff_whitened only).
        #[arg(long)]
        unit_variance: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the minimum distance index of W A.
    Mdi { w: PathBuf, a: PathBuf },
    /// Redraw mdi_curves.svg from a summary.csv.
    Plot {
        /// Directory holding summary.csv; the plot is written there too.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Read this summary instead of <out>/summary.csv.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: sbss_core::SbssError| e.to_string())
}

fn parse_kernel(s: &str) -> std::result::Result<KernelSpec, String> {
    s.parse().map_err(|e: sbss_core::SbssError| e.to_string())
}

/// Runs a parsed command, printing to stdout, and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, preset, seed, jobs, out } => {
            let mut cfg = CampaignConfig::load(config.as_deref(), preset)?;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            let out = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
            let res = cmd_simulate(&cfg, jobs, &out)?;
            println!(
                "{} replicate rows ({} failed) in {} cells written to {}",
                res.rows.len(),
                res.failures(),
                res.cells.len(),
                out.display()
            );
            Ok(())
        }
        Command::Estimate { data, method, kernels, compositional, delimiter, unit_variance, out } => {
            if !delimiter.is_ascii() {
                return Err(CliError::Usage(format!("delimiter '{delimiter}' is not a single-byte character")));
            }
            let opts = EstimateOptions {
                data,
                method,
                kernels,
                compositional,
                delimiter: delimiter as u8,
                unit_variance,
                out,
            };
            let output = run_estimate(&opts)?;
            for w in &output.result.warnings {
                eprintln!("warning: {w:?}");
            }
            if !output.result.converged {
                eprintln!("warning: joint diagonalization did not converge");
            }
            for f in &output.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Mdi { w, a } => {
            println!("{:.6}", cmd_mdi(&w, &a)?);
            Ok(())
        }
        Command::Plot { out, summary } => {
            let summary = summary.unwrap_or_else(|| out.join("summary.csv"));
            let path = cmd_plot(&summary, &out)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

/// Runs a campaign and writes its files into `out`.
pub fn cmd_simulate(cfg: &CampaignConfig, jobs: usize, out: &Path) -> Result<CampaignResult> {
    let res = run_campaign(cfg, jobs)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    io::write_results(&out.join("results.csv"), &res)?;
    let summary = out.join("summary.csv");
    io::write_summary(&summary, &res)?;
    if cfg.plot {
        cmd_plot(&summary, out)?;
    }
    Ok(res)
}

/// `mdi(W A)` for matrices stored as CSV.
pub fn cmd_mdi(w: &Path, a: &Path) -> Result<f64> {
    let wm = io::read_matrix(w)?;
    let am = io::read_matrix(a)?;
    if !wm.is_square() || !am.is_square() || wm.nrows() != am.nrows() {
        return Err(CliError::Usage(format!(
            "need square matrices of equal size, got {}x{} and {}x{}",
            wm.nrows(),
            wm.ncols(),
            am.nrows(),
            am.ncols()
        )));
    }
    Ok(mdi(&(wm * am))?)
}

pub fn cmd_plot(summary: &Path, out: &Path) -> Result<PathBuf> {
    let rows = io::read_summary(summary)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let path = out.join("mdi_curves.svg");
    std::fs::write(&path, plot::mdi_curves_svg(&rows)).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
