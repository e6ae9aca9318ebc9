//! End-to-end runs behind the command line: compute, audit, export.
//!
//! Each run writes into one output directory: the resolved scenario echo,
//! its CSV/JSON records, SVG previews, `report.json` and `timings.json`.
//! Everything except the timings is a deterministic function of the
//! scenario.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_rk4, EntryModel, PiecewiseConstant};
use crate::error::Result;
use crate::export::{
    self, write_closed_loop_csv, write_heat_profile_csv, write_svg, write_tube_csv,
    write_tube_json, Cell, Plot, EXPORT_SCHEMA_VERSION,
};
use crate::montecarlo::{monte_carlo_validate, ContainmentReport};
use crate::mpc::{
    mpc_loop, reference_from_tube, ClosedLoop, LoopStatus, ReferenceTrajectory, SolveStatus,
    TubeSchedule,
};
use crate::reach::{reach, ReachTube, StateConstraint};
use crate::scenario::ScenarioConfig;
use crate::setalg::{project_vertices_2d, IntervalBox, ProjectionOptions};
use crate::thermal::{
    altitude_at_heat_rate, heat_load, heat_rate, kelvin_to_celsius, surface_temperature,
};

/// Closed-loop samples count as inside the tube up to this slack.
pub const TUBE_SLACK_TOLERANCE: f64 = 1e-6;
const CURVE_POINTS: usize = 200;
/// Support directions per outline in plots (previews only).
const PLOT_DIRECTIONS: usize = 32;
const TUBE_COLOR: &str = "#3a6fb0";
const LIMIT_COLOR: &str = "#d62728";
const TRAJECTORY_COLOR: &str = "#1f3fbf";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub step: usize,
    pub t: f64,
    /// Branch sets stored at this step.
    pub sets: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Upper bound on the heat rate over the step's sets.
    pub max_heat_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingStats {
    pub samples: usize,
    pub rms_error: Vec<f64>,
    pub max_abs_error: Vec<f64>,
    /// Largest tube slack over the logged states (NaN without a tube).
    pub max_tube_slack: f64,
    pub samples_in_tube: usize,
    pub fallbacks: usize,
    pub inputs_within_bounds: bool,
    pub max_heat_rate: f64,
    /// First logged time with `Q̇ > Q̇max`.
    pub first_limit_crossing: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

impl Timings {
    fn record(&mut self, stage: &str, since: Instant) {
        self.stages
            .push((stage.into(), since.elapsed().as_secs_f64()));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub kind: String,
    pub scenario: String,
    pub seed: u64,
    pub heat_constrained: bool,
    /// Closed-loop plans were constrained to the tube.
    pub tube_constrained: bool,
    pub steps: Vec<StepSummary>,
    /// Sampling audit; `None` when the run does not audit (heat-constrained
    /// tubes exclude states that uncontrolled trajectories do reach).
    pub containment: Option<ContainmentReport>,
    pub peak_heat_rate: Option<f64>,
    pub peak_heat_time: Option<f64>,
    pub limit_surface_temperature_c: f64,
    pub tracking: Option<TrackingStats>,
    pub split_budget_exhausted: bool,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
    #[serde(skip)]
    pub timings: Timings,
}

impl RunReport {
    fn new(kind: &str, cfg: &ScenarioConfig, heat_constrained: bool) -> Self {
        let limit = surface_temperature(cfg.thermal.heat_rate_limit, &cfg.thermal);
        RunReport {
            schema_version: EXPORT_SCHEMA_VERSION,
            kind: kind.into(),
            scenario: cfg.name.clone(),
            seed: cfg.seed,
            heat_constrained,
            tube_constrained: false,
            steps: vec![],
            containment: None,
            peak_heat_rate: None,
            peak_heat_time: None,
            limit_surface_temperature_c: kelvin_to_celsius(limit),
            tracking: None,
            split_budget_exhausted: false,
            warnings: vec![],
            files: vec![],
            timings: Timings::default(),
        }
    }

    pub fn audit_failed(&self) -> bool {
        self.containment
            .as_ref()
            .map_or(false, |c| c.violations > 0)
    }

    fn add_tube(&mut self, cfg: &ScenarioConfig, tube: &ReachTube) -> Result<()> {
        let t = Instant::now();
        self.steps = step_summaries(cfg, tube)?;
        self.timings.record("summaries", t);
        self.split_budget_exhausted = tube.split_budget_exhausted;
        self.warnings.extend(tube.warnings.iter().cloned());
        Ok(())
    }

    fn finish(mut self, out: &Path) -> Result<Self> {
        self.files.push("report.json".into());
        self.files.push("timings.json".into());
        self.files.sort();
        export::write_json(&out.join("report.json"), &self)?;
        export::write_json(&out.join("timings.json"), &self.timings)?;
        Ok(self)
    }
}

/// Reachable tube of the scenario, optionally cut by the heat limit.
pub fn compute_tube(cfg: &ScenarioConfig, heat_constrained: bool) -> Result<ReachTube> {
    let constraints = if heat_constrained {
        vec![StateConstraint::HeatLimit {
            params: cfg.thermal,
            env: cfg.environment,
        }]
    } else {
        vec![]
    };
    reach(
        &cfg.model()?,
        &cfg.initial_set()?,
        &cfg.reach_config()?,
        &constraints,
    )
}

fn step_summaries(cfg: &ScenarioConfig, tube: &ReachTube) -> Result<Vec<StepSummary>> {
    let per_step: Vec<Result<Option<StepSummary>>> = (0..=tube.num_steps())
        .into_par_iter()
        .map(|k| {
            let sets = tube.sets_at(k);
            let mut hull: Option<IntervalBox> = None;
            let mut q = f64::NEG_INFINITY;
            for set in &sets {
                let h = set.interval_hull()?;
                q = q.max(heat_rate(
                    h.lower[0],
                    h.upper[1],
                    &cfg.thermal,
                    &cfg.environment,
                ));
                hull = Some(match hull {
                    None => h,
                    Some(a) => a.hull(&h),
                });
            }
            Ok(hull.map(|hull| StepSummary {
                step: k,
                t: k as f64 * tube.time_step,
                sets: sets.len(),
                lower: hull.lower.iter().copied().collect(),
                upper: hull.upper.iter().copied().collect(),
                max_heat_rate: q,
            }))
        })
        .collect();
    let mut out = vec![];
    for s in per_step {
        out.extend(s?);
    }
    Ok(out)
}

fn prepare(out: &Path, cfg: &ScenarioConfig, report: &mut RunReport) -> Result<()> {
    std::fs::create_dir_all(out)?;
    cfg.write_echo(out)?;
    report.files.push(crate::scenario::ECHO_FILE.into());
    log::info!("writing to {} (seed {})", out.display(), cfg.seed);
    Ok(())
}

fn export_tube(out: &Path, tube: &ReachTube, report: &mut RunReport) -> Result<()> {
    let t = Instant::now();
    write_tube_csv(&out.join("tube.csv"), tube)?;
    write_tube_json(&out.join("tube.json"), tube)?;
    report.timings.record("tube_export", t);
    report.files.push("tube.csv".into());
    report.files.push("tube.json".into());
    Ok(())
}

/// `(v, h)` outlines of the step-boundary sets, in km/s and km.
fn tube_outlines(tube: &ReachTube) -> Result<Vec<Vec<[f64; 2]>>> {
    let t = Instant::now();
    let plot_options = ProjectionOptions {
        outer_directions: PLOT_DIRECTIONS,
        ..Default::default()
    };
    let mut sets = vec![&tube.initial_set];
    sets.extend(tube.steps.iter().map(|s| &s.set));
    sets.into_par_iter()
        .map(|s| {
            let poly = project_vertices_2d(s, (1, 0), plot_options)?;
            Ok(poly.into_iter().map(|p| [p[0] / 1e3, p[1] / 1e3]).collect())
        })
        .collect::<Result<Vec<_>>>()
        .inspect(|_| log::debug!("projected outlines in {:.2} s", t.elapsed().as_secs_f64()))
}

fn velocity_window(cfg: &ScenarioConfig, steps: &[StepSummary]) -> [f64; 2] {
    if let Some(h) = &cfg.heat {
        return h.velocity_range;
    }
    let lo = steps
        .iter()
        .map(|s| s.lower[1])
        .fold(f64::INFINITY, f64::min);
    let hi = steps
        .iter()
        .map(|s| s.upper[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.05 * (hi - lo).max(1.0);
    [(lo - pad).max(1.0), hi + pad]
}

/// Points `(v, h)` with `Q̇(h, v) = Q̇max`.
fn limit_curve(cfg: &ScenarioConfig, window: [f64; 2]) -> Vec<[f64; 2]> {
    let n = cfg.heat.as_ref().map_or(CURVE_POINTS, |h| h.curve_points);
    (0..n)
        .map(|i| {
            let v = window[0] + (window[1] - window[0]) * i as f64 / (n - 1) as f64;
            [
                v,
                altitude_at_heat_rate(
                    v,
                    cfg.thermal.heat_rate_limit,
                    &cfg.thermal,
                    &cfg.environment,
                ),
            ]
        })
        .collect()
}

fn vh_plot(title: &str, outlines: &[Vec<[f64; 2]>], curve: &[[f64; 2]]) -> Plot {
    let mut plot = Plot::new(title, "velocity (km/s)", "altitude (km)");
    for poly in outlines {
        plot.polygon(poly.clone(), TUBE_COLOR, TUBE_COLOR);
    }
    plot.line(
        curve.iter().map(|p| [p[0] / 1e3, p[1] / 1e3]).collect(),
        LIMIT_COLOR,
        1.5,
        false,
    );
    plot.legend("reachable sets", TUBE_COLOR);
    plot.legend("heat rate limit", LIMIT_COLOR);
    plot
}

fn write_limit_curve(
    out: &Path,
    cfg: &ScenarioConfig,
    curve: &[[f64; 2]],
    report: &mut RunReport,
) -> Result<()> {
    let rows: Vec<Vec<Cell>> = curve
        .iter()
        .map(|p| {
            vec![
                Cell::Num(p[0]),
                Cell::Num(p[1]),
                Cell::Num(heat_rate(p[1], p[0], &cfg.thermal, &cfg.environment)),
            ]
        })
        .collect();
    export::write_csv(
        &out.join("heat_limit.csv"),
        &export::heat_limit_schema(),
        &rows,
    )?;
    report.files.push("heat_limit.csv".into());
    Ok(())
}

/// Reachability with (optionally) the heat constraint; the unconstrained
/// tube is audited by Monte Carlo simulation.
pub fn run_reach(cfg: &ScenarioConfig, heat_constrained: bool, out: &Path) -> Result<RunReport> {
    let mut report = RunReport::new("reach", cfg, heat_constrained);
    prepare(out, cfg, &mut report)?;

    let t = Instant::now();
    let tube = compute_tube(cfg, heat_constrained)?;
    report.timings.record("reach", t);
    report.add_tube(cfg, &tube)?;
    export_tube(out, &tube, &mut report)?;

    if !heat_constrained && cfg.monte_carlo.samples > 0 {
        let t = Instant::now();
        let audit = monte_carlo_validate(
            &cfg.model()?,
            &tube,
            &cfg.input_set()?,
            cfg.monte_carlo.samples,
            cfg.seed,
        )?;
        report.timings.record("monte_carlo", t);
        log::info!(
            "containment audit: {} samples, {} violations, worst slack {:e}",
            audit.samples,
            audit.violations,
            audit.worst_slack
        );
        report.containment = Some(audit);
    }

    let curve = limit_curve(cfg, velocity_window(cfg, &report.steps));
    let title = if heat_constrained {
        "Reachable sets, heat-constrained"
    } else {
        "Reachable sets"
    };
    write_svg(
        &out.join("tube_vh.svg"),
        &vh_plot(title, &tube_outlines(&tube)?, &curve),
    )?;
    report.files.push("tube_vh.svg".into());
    report.finish(out)
}

/// Audits a stored tube against fresh samples.
pub fn run_validate(
    cfg: &ScenarioConfig,
    tube_path: &Path,
    samples: usize,
    seed: u64,
    out: &Path,
) -> Result<RunReport> {
    let mut report = RunReport::new("validate", cfg, false);
    report.seed = seed;
    prepare(out, cfg, &mut report)?;
    let tube = export::read_tube_json(tube_path)?;
    report.add_tube(cfg, &tube)?;
    let t = Instant::now();
    let audit = monte_carlo_validate(&cfg.model()?, &tube, &cfg.input_set()?, samples, seed)?;
    report.timings.record("monte_carlo", t);
    export::write_json(&out.join("containment.json"), &audit)?;
    report.files.push("containment.json".into());
    report.containment = Some(audit);
    report.finish(out)
}

fn tracking_stats(
    cfg: &ScenarioConfig,
    run: &ClosedLoop,
    reference: &ReferenceTrajectory,
    bounds: &IntervalBox,
) -> TrackingStats {
    let n = 6;
    let mut sq = vec![0.0; n];
    let mut max_abs = vec![0.0f64; n];
    let states: Vec<&DVector<f64>> = run.states().collect();
    for (k, x) in states.iter().enumerate() {
        let e = *x - reference.state(k);
        for i in 0..n {
            sq[i] += e[i] * e[i];
            max_abs[i] = max_abs[i].max(e[i].abs());
        }
    }
    let count = states.len();
    let slacks: Vec<f64> = run
        .records
        .iter()
        .map(|r| r.tube_slack)
        .chain(std::iter::once(run.final_tube_slack))
        .collect();
    let times: Vec<f64> = run
        .records
        .iter()
        .map(|r| r.t)
        .chain(std::iter::once(run.final_time))
        .collect();
    let rates: Vec<f64> = states
        .iter()
        .map(|x| heat_rate(x[0], x[1], &cfg.thermal, &cfg.environment))
        .collect();
    TrackingStats {
        samples: count,
        rms_error: sq.iter().map(|s| (s / count as f64).sqrt()).collect(),
        max_abs_error: max_abs,
        max_tube_slack: run.max_tube_slack(),
        samples_in_tube: slacks
            .iter()
            .filter(|s| **s <= TUBE_SLACK_TOLERANCE)
            .count(),
        fallbacks: run.fallbacks,
        inputs_within_bounds: run.records.iter().all(|r| {
            (0..r.input.len())
                .all(|i| r.input[i] >= bounds.lower[i] && r.input[i] <= bounds.upper[i])
        }),
        max_heat_rate: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        first_limit_crossing: rates
            .iter()
            .zip(&times)
            .find(|(q, _)| **q > cfg.thermal.heat_rate_limit)
            .map(|(_, t)| *t),
    }
}

/// Closed-loop MPC tracking the tube centers. With `tube_constraint` the
/// planned states must stay in the scenario's tube (heat-constrained when
/// the scenario says so); without it the controller tracks the centers of
/// the tube computed without the heat limit and is otherwise unconstrained.
pub fn run_mpc(cfg: &ScenarioConfig, tube_constraint: bool, out: &Path) -> Result<RunReport> {
    let heat_constrained = tube_constraint && cfg.heat_constraint;
    let mut report = RunReport::new("mpc", cfg, heat_constrained);
    report.tube_constrained = tube_constraint;
    let mpc_cfg = cfg
        .mpc_config()
        .ok_or_else(|| crate::error::Error::scenario("mpc", "the scenario has no `mpc` block"))?;
    prepare(out, cfg, &mut report)?;

    let t = Instant::now();
    let tube = compute_tube(cfg, heat_constrained)?;
    report.timings.record("reach", t);
    report.add_tube(cfg, &tube)?;
    export_tube(out, &tube, &mut report)?;

    let duration = cfg.mpc_duration();
    let bounds = cfg.input_bounds()?;
    let reference = reference_from_tube(&tube, &bounds, mpc_cfg.sampling_time, duration)?;
    let schedule = TubeSchedule::from_tube(&tube)?;
    let t = Instant::now();
    let mut run = mpc_loop(
        &cfg.model()?,
        &cfg.initial_set.center.to_vector(),
        tube_constraint.then_some(&schedule),
        &reference,
        &bounds,
        &mpc_cfg,
        duration,
    )?;
    report.timings.record("mpc", t);
    if !tube_constraint {
        // Distance to the tube is still reported.
        for r in &mut run.records {
            r.tube_slack = schedule.slack_at(&r.state, r.t)?;
        }
        run.final_tube_slack = schedule.slack_at(&run.final_state, run.final_time)?;
    }
    if run.fallbacks > 0 {
        report.warnings.push(format!(
            "{} samples fell back to holding the input",
            run.fallbacks
        ));
    }
    let failed = run
        .records
        .iter()
        .filter(|r| r.status != LoopStatus::Solved(SolveStatus::Optimal))
        .count();
    if failed > 0 {
        log::warn!(
            "{failed} of {} solves did not reach optimality",
            run.records.len()
        );
    }

    write_closed_loop_csv(
        &out.join("closed_loop.csv"),
        &run,
        &cfg.thermal,
        &cfg.environment,
    )?;
    report.files.push("closed_loop.csv".into());
    let stats = tracking_stats(cfg, &run, &reference, &bounds);
    log::info!(
        "closed loop: {} samples, {} in tube, max Q̇ {:.4e} W/m²",
        stats.samples,
        stats.samples_in_tube,
        stats.max_heat_rate
    );
    report.tracking = Some(stats);

    let curve = limit_curve(cfg, velocity_window(cfg, &report.steps));
    let mut plot = vh_plot(
        "Closed-loop trajectory and reachable sets",
        &tube_outlines(&tube)?,
        &curve,
    );
    plot.line(
        run.states().map(|x| [x[1] / 1e3, x[0] / 1e3]).collect(),
        TRAJECTORY_COLOR,
        2.0,
        !tube_constraint,
    );
    plot.legend("closed loop", TRAJECTORY_COLOR);
    write_svg(&out.join("closed_loop_vh.svg"), &plot)?;
    report.files.push("closed_loop_vh.svg".into());
    report.finish(out)
}

/// Heat-limit curve, per-step heat-rate bounds over the tube and the heat
/// profile of the nominal trajectory (center state, midpoint inputs).
pub fn run_heat_analysis(cfg: &ScenarioConfig, out: &Path) -> Result<RunReport> {
    let mut report = RunReport::new("heat", cfg, cfg.heat_constraint);
    prepare(out, cfg, &mut report)?;
    let t = Instant::now();
    let tube = compute_tube(cfg, cfg.heat_constraint)?;
    report.timings.record("reach", t);
    report.add_tube(cfg, &tube)?;
    export_tube(out, &tube, &mut report)?;

    let rows: Vec<Vec<Cell>> = report
        .steps
        .iter()
        .map(|s| {
            vec![
                Cell::Int(s.step),
                Cell::Num(s.t),
                Cell::Num(s.lower[0]),
                Cell::Num(s.upper[0]),
                Cell::Num(s.lower[1]),
                Cell::Num(s.upper[1]),
                Cell::Num(s.max_heat_rate),
                Cell::Num(surface_temperature(s.max_heat_rate, &cfg.thermal)),
            ]
        })
        .collect();
    export::write_csv(
        &out.join("heat_steps.csv"),
        &export::heat_steps_schema(),
        &rows,
    )?;
    report.files.push("heat_steps.csv".into());

    let profile = nominal_heat_profile(cfg)?;
    write_heat_profile_csv(&out.join("heat_profile.csv"), &profile, &cfg.thermal)?;
    report.files.push("heat_profile.csv".into());
    report.peak_heat_rate = Some(profile.peak_rate);
    report.peak_heat_time = Some(profile.peak_time);

    let curve = limit_curve(cfg, velocity_window(cfg, &report.steps));
    write_limit_curve(out, cfg, &curve, &mut report)?;
    let mut plot = vh_plot(
        "Reachable sets and heat rate limit",
        &tube_outlines(&tube)?,
        &curve,
    );
    plot.line(
        profile
            .velocities
            .iter()
            .zip(&profile.altitudes)
            .map(|(v, h)| [v / 1e3, h / 1e3])
            .collect(),
        TRAJECTORY_COLOR,
        1.5,
        true,
    );
    plot.legend("nominal trajectory", TRAJECTORY_COLOR);
    write_svg(&out.join("heat_vh.svg"), &plot)?;
    report.files.push("heat_vh.svg".into());
    log::info!(
        "surface temperature at the limit: {:.1} °C",
        report.limit_surface_temperature_c
    );
    report.finish(out)
}

fn nominal_heat_profile(cfg: &ScenarioConfig) -> Result<crate::thermal::HeatProfile> {
    let model: EntryModel = cfg.model()?;
    let u = cfg.input_bounds()?.center();
    let dt = cfg.reach.time_step / 10.0;
    let traj = integrate_rk4(
        &model,
        &cfg.initial_set.center.to_vector(),
        &PiecewiseConstant::constant(u),
        cfg.reach.horizon,
        dt,
    )?;
    let samples: Vec<(f64, f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, x)| (*t, x[0], x[1]))
        .collect();
    heat_load(&samples, &cfg.thermal, &cfg.environment)
}

/// `--out` when given, else the scenario's `output_dir`.
pub fn output_dir(cfg: &ScenarioConfig, flag: Option<&Path>) -> PathBuf {
    flag.map_or_else(|| cfg.output_dir.clone(), Path::to_path_buf)
}
