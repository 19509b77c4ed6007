//! `romlab`: backbone, manifold, mode-shape and Gamma tables for reduced-order
//! models of geometrically nonlinear structures.

mod commands;
mod config;
mod svg;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{ensure, Result};
use clap::{Args, Parser, Subcommand};
use romlab_core::models::FlatBeamParams;

use config::{Command, ContinuationSettings, ManifoldGrid, Method, ModelSource, RhoRange, RunConfig};

#[derive(Parser)]
#[command(name = "romlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// flat, shell or file:PATH
    #[arg(long, global = true, default_value = "flat")]
    model: String,
    /// Frequency ratio: a single value, or a:b[:step] for gamma sweeps.
    #[arg(long, global = true)]
    rho: Option<String>,
    /// Slenderness h/L of the flat beam; sets rho.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Master mode index (0-based).
    #[arg(long, global = true, default_value_t = 0)]
    master: usize,
    /// Comma-separated list of nf2, nf3, qm-md, qm-smd, static-cond, full, or all.
    #[arg(long, global = true, default_value = "all")]
    method: String,
    #[arg(long, global = true, default_value_t = 7)]
    n_harm: usize,
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    /// Amplitude cap on the master coordinate; 0 emits the linear point only.
    #[arg(long, global = true, default_value_t = 0.3)]
    max_amp: f64,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Gamma against rho per method, or the analytic C-ratios with --ratios.
    Gamma {
        #[arg(long)]
        ratios: bool,
    },
    /// Backbone curves per method.
    Backbone,
    /// Invariant-manifold samples and the zero-velocity cut.
    Manifold {
        #[arg(long, default_value_t = 0.5)]
        r_max: f64,
        /// Velocity half-range, in units of the master frequency.
        #[arg(long, default_value_t = 0.5)]
        s_max: f64,
        #[arg(long, default_value_t = 41)]
        grid: usize,
        #[arg(long, default_value_t = 64)]
        orbit_samples: usize,
    },
    /// Displacement orthogonal to the master mode at amplitude a0.
    Modeshape {
        #[arg(long, default_value_t = 0.1)]
        a0: f64,
    },
}

fn build_config(cli: Cli) -> Result<RunConfig> {
    let c = cli.common;
    let command = match cli.command {
        Cmd::Gamma { ratios } => Command::Gamma { ratios },
        Cmd::Backbone => Command::Backbone,
        Cmd::Manifold { r_max, s_max, grid, orbit_samples } => Command::Manifold(ManifoldGrid {
            r_max,
            s_max,
            points: grid,
            orbit_samples,
        }),
        Cmd::Modeshape { a0 } => Command::Modeshape { a0 },
    };
    let model = ModelSource::parse(&c.model)?;
    let rho = match (c.sigma, &c.rho) {
        (Some(_), Some(_)) => anyhow::bail!("--sigma and --rho are mutually exclusive"),
        (Some(sigma), None) => {
            ensure!(model == ModelSource::Flat, "--sigma applies to the flat model only");
            let r = FlatBeamParams::from_slenderness(sigma)?.rho;
            RhoRange { start: r, stop: r, step: config::DEFAULT_RHO_STEP }
        }
        (None, Some(text)) => RhoRange::parse(text)?,
        (None, None) => match command {
            Command::Gamma { .. } => RhoRange { start: 0.5, stop: 12.0, step: config::DEFAULT_RHO_STEP },
            _ => RhoRange { start: 10.0, stop: 10.0, step: config::DEFAULT_RHO_STEP },
        },
    };
    let cfg = RunConfig {
        command,
        model,
        rho,
        master: c.master,
        methods: Method::parse_list(&c.method)?,
        continuation: ContinuationSettings { n_harm: c.n_harm, tol: c.tol, max_amp: c.max_amp },
        out: c.out,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build_config(cli).and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(summary) => {
            for b in &summary.branches {
                println!("{:<12} {:>5} points  {}", b.method, b.points, b.status);
            }
            println!("wrote {} files to {}", summary.files.len(), summary.config.out.display());
            if summary.failed() {
                eprintln!("error: at least one branch failed");
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
