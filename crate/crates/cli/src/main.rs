//! `oscidrift run <config.json>` and `oscidrift validate <config.json>`.
//!
//! Exit status: 0 when every check passes, 2 when a check fails, 1 on any
//! configuration or execution error (nothing is written in that case).

mod config;
mod experiments;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use config::ExperimentConfig;
use experiments::{Context, Flags, Route};
use report::{to_json_pretty, write_atomic, Outcome};

#[derive(Debug, Parser)]
#[command(name = "oscidrift", version, about = "Run the oscidrift experiment suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write its CSVs and summary.json.
    Run {
        config: PathBuf,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        workers: Option<usize>,
        /// Allow eps below 0.05.
        #[arg(long)]
        expensive: bool,
        /// Coefficient route for limit-coeffs.
        #[arg(long, value_enum, default_value_t = Route::Both)]
        route: Route,
    },
    /// Check a configuration without running it.
    Validate {
        config: PathBuf,
        #[arg(long)]
        expensive: bool,
    },
}

const EXIT_ERROR: u8 = 1;
const EXIT_CHECKS_FAILED: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Validate { config, expensive } => match load(&config, expensive) {
            Ok((cfg, _)) => {
                println!("{}: valid {} configuration", config.display(), cfg.experiment.name());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_ERROR)
            }
        },
        Command::Run {
            config,
            workers,
            expensive,
            route,
        } => {
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
                .max(1);
            let flags = Flags {
                workers,
                expensive,
                route,
            };
            match run(&config, flags) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(EXIT_CHECKS_FAILED),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_ERROR)
                }
            }
        }
    }
}

fn load(path: &PathBuf, expensive: bool) -> Result<(ExperimentConfig, Vec<u8>)> {
    let (cfg, raw) = ExperimentConfig::load(path)?;
    cfg.validate(expensive)?;
    Ok((cfg, raw))
}

fn run(path: &PathBuf, flags: Flags) -> Result<bool> {
    let (cfg, raw) = load(path, flags.expensive)?;
    let mut ctx = Context::new(&cfg, flags)?;
    let outcome = experiments::run(&mut ctx)
        .with_context(|| format!("{} failed", cfg.experiment.name()))?;
    let summary = summary(&ctx, &raw, &outcome)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for t in &outcome.tables {
        let p = dir.join(&t.name);
        write_atomic(&p, t.text().as_bytes()).with_context(|| format!("writing {}", p.display()))?;
    }
    let p = dir.join("summary.json");
    write_atomic(&p, to_json_pretty(&summary).as_bytes())
        .with_context(|| format!("writing {}", p.display()))?;
    for c in &outcome.checks {
        println!(
            "{:<4} {:<32} value {:.6e}, target {:.6e}, tolerance {:.3e}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.target,
            c.tolerance,
            c.detail
        );
    }
    println!("wrote {} files to {}", outcome.tables.len() + 1, dir.display());
    Ok(outcome.passed())
}

fn summary(ctx: &Context, raw_config: &[u8], outcome: &Outcome) -> Result<Value> {
    let cfg = ctx.cfg;
    let g = ctx.density.gamma_exponent();
    let d11 = oscidrift::limit::d11(&ctx.disc);
    let digest: String = Sha256::digest(raw_config).iter().map(|b| format!("{b:02x}")).collect();
    let mut artifacts: Vec<&str> = outcome.tables.iter().map(|t| t.name.as_str()).collect();
    artifacts.push("summary.json");
    Ok(json!({
        "tool": { "name": "oscidrift", "version": env!("CARGO_PKG_VERSION") },
        "experiment": cfg.experiment.name(),
        "config": serde_json::to_value(cfg)?,
        "config_sha256": digest,
        "flags": {
            "workers": ctx.flags.workers,
            "expensive": ctx.flags.expensive,
            "route": ctx.flags.route,
        },
        "constants": {
            "c0": ctx.density.c0(),
            "gamma": g.gamma,
            "hurst": g.hurst,
            "D11": d11,
            "m": std::f64::consts::PI * d11,
        },
        "scheme": scheme(cfg),
        "seeds": ctx.seeds.uses,
        "tolerances": outcome.tolerances,
        "checks": outcome.checks,
        "results": outcome.results,
        "artifacts": artifacts,
        "passed": outcome.passed(),
    }))
}

fn scheme(cfg: &ExperimentConfig) -> Value {
    json!({
        "noise": format!("{} Ornstein-Uhlenbeck modes (Gauss-Legendre nodes after a power substitution), exact Gaussian stepping", cfg.n_modes),
        "oscillator": "Strang splitting: half flow of H, trapezoidal noise kick, half flow of H",
        "hamiltonian_flow": match cfg.hamiltonian {
            config::HamiltonianConfig::Quadratic => "exact rotation",
            config::HamiltonianConfig::QuarticWell { .. } => "Gragg-Bulirsch-Stoer extrapolation",
        },
        "dt_fast": cfg.dt_fast(),
        "noise_hold": "trapezoidal average of v over each fast step; weak bias of order dt_fast",
        "limit_sde": format!(
            "Euler-Maruyama, dt <= {}, shrunk so that sd(dI) < I/6, reflection at I = {:e}",
            experiments::tol::SDE_DT,
            oscidrift::limit::ACTION_FLOOR
        ),
        "rng": "ChaCha8, stream index = path index",
    })
}
