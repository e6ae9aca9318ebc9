use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reentry_core::runs::{self, RunReport, TUBE_SLACK_TOLERANCE};
use reentry_core::scenario::{parse_scenario, ScenarioConfig};
use reentry_core::Error;

/// Log filter variable, e.g. `REENTRY_LOG=debug`.
const LOG_ENV: &str = "REENTRY_LOG";

mod exit {
    pub const FAILURE: u8 = 1;
    pub const SCHEMA: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const AUDIT: u8 = 4;
}

#[derive(Parser)]
#[command(
    name = "reentry",
    version,
    about = "Reachable tubes, heating limits and tube-constrained MPC for atmospheric re-entry"
)]
#[command(
    after_help = "Exit codes: 0 success, 1 other failure, 2 invalid scenario or input file, \
3 infeasible (empty set, solver failure, closed loop left its tube), 4 containment audit found violations.\n\
Log level: REENTRY_LOG (error, warn, info, debug, trace; default info)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the reachable tube and audit it by simulation.
    Reach {
        scenario: PathBuf,
        /// Intersect every step with the heat-rate halfspace (no audit).
        #[arg(long)]
        constrained: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run closed-loop MPC tracking the tube centers.
    Mpc {
        scenario: PathBuf,
        /// Track the unconstrained tube's centers without membership constraints.
        #[arg(long)]
        no_tube_constraint: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a stored tube against Monte Carlo trajectories.
    Validate {
        tube: PathBuf,
        scenario: PathBuf,
        /// Number of trajectories; defaults to the scenario's setting.
        #[arg(long)]
        samples: Option<usize>,
        /// Defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Heat-rate limit curve, per-step heat bounds and the nominal heat profile.
    Heat {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Scenario { .. } | Error::Json(_) => exit::SCHEMA,
        Error::EmptySet | Error::Solver(_) | Error::Reach(_) | Error::Singularity(_) => {
            exit::INFEASIBLE
        }
        _ => exit::FAILURE,
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, Error> {
    let cfg = parse_scenario(path)?;
    log::info!(
        "scenario `{}` from {} (seed {})",
        cfg.name,
        path.display(),
        cfg.seed
    );
    Ok(cfg)
}

fn summarize(report: &RunReport, out: &Path) {
    println!("{} run written to {}", report.kind, out.display());
    for f in &report.files {
        println!("  {f}");
    }
    if let Some(last) = report.steps.last() {
        println!(
            "steps: {} (t = {} s), altitude [{:.1}, {:.1}] m, velocity [{:.2}, {:.2}] m/s",
            last.step, last.t, last.lower[0], last.upper[0], last.lower[1], last.upper[1]
        );
    }
    if let Some(c) = &report.containment {
        println!(
            "containment: {} samples, {} violations, worst slack {:e}",
            c.samples, c.violations, c.worst_slack
        );
    }
    if let Some(t) = &report.tracking {
        println!(
            "closed loop: {}/{} samples in tube, max slack {:e}, {} fallbacks, max heat rate {:.4e} W/m²",
            t.samples_in_tube, t.samples, t.max_tube_slack, t.fallbacks, t.max_heat_rate
        );
        match t.first_limit_crossing {
            Some(tc) => println!("heat limit first exceeded at t = {tc} s"),
            None => println!("heat limit never exceeded"),
        }
    }
    if let Some(q) = report.peak_heat_rate {
        println!(
            "nominal peak heat rate {:.4e} W/m² at t = {} s",
            q,
            report.peak_heat_time.unwrap_or(f64::NAN)
        );
    }
    println!(
        "surface temperature at the limit: {:.1} °C",
        report.limit_surface_temperature_c
    );
    for w in &report.warnings {
        println!("warning: {w}");
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let (report, out) = match cli.command {
        Command::Reach {
            scenario,
            constrained,
            out,
        } => {
            let cfg = load(&scenario)?;
            let out = runs::output_dir(&cfg, out.as_deref());
            (runs::run_reach(&cfg, constrained, &out)?, out)
        }
        Command::Mpc {
            scenario,
            no_tube_constraint,
            out,
        } => {
            let cfg = load(&scenario)?;
            let out = runs::output_dir(&cfg, out.as_deref());
            (runs::run_mpc(&cfg, !no_tube_constraint, &out)?, out)
        }
        Command::Validate {
            tube,
            scenario,
            samples,
            seed,
            out,
        } => {
            let cfg = load(&scenario)?;
            let out = runs::output_dir(&cfg, out.as_deref());
            let samples = samples.unwrap_or(cfg.monte_carlo.samples);
            let seed = seed.unwrap_or(cfg.seed);
            (runs::run_validate(&cfg, &tube, samples, seed, &out)?, out)
        }
        Command::Heat { scenario, out } => {
            let cfg = load(&scenario)?;
            let out = runs::output_dir(&cfg, out.as_deref());
            (runs::run_heat_analysis(&cfg, &out)?, out)
        }
    };
    summarize(&report, &out);
    if report.audit_failed() {
        log::error!("containment audit found violations");
        return Ok(exit::AUDIT);
    }
    if let Some(t) = &report.tracking {
        // Only a tube-constrained run promises to stay inside.
        if report.tube_constrained && t.samples_in_tube < t.samples {
            log::error!(
                "closed loop left the tube (max slack {:e} > {TUBE_SLACK_TOLERANCE:e})",
                t.max_tube_slack
            );
            return Ok(exit::INFEASIBLE);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
