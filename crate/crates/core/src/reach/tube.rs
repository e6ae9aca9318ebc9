use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Environment, VectorField};
use crate::error::{Error, Result};
use crate::reach::step::{
    affine_image, interval_set, linearize_with_hull, propagation, safe_hull, LinearizedStep,
};
use crate::setalg::{ConstrainedZonotope, Halfspace, IntervalBox, Zonotope};
use crate::thermal::{heat_limit_halfspace, ThermalParams};

/// Fraction of the initial hull width used as the default per-step error
/// tolerance.
pub const DEFAULT_TOLERANCE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ReachConfig {
    pub time_step: f64,
    pub horizon: f64,
    /// Per-state bound on the linearization-error half-widths of one step;
    /// `None` means 1% of the initial hull width.
    pub error_tolerance: Option<Vec<f64>>,
    pub max_splits: usize,
    pub max_zonotope_order: f64,
    pub input_set: Zonotope,
    /// Multiplier `κ ≥ 1` on the linearization-error box.
    pub curvature_margin: f64,
    /// Internal propagation steps per stored step. Each one re-linearizes,
    /// which keeps the remainder small when `time_step` is long.
    pub substeps: usize,
}

impl ReachConfig {
    pub fn new(time_step: f64, horizon: f64, input_set: Zonotope) -> Self {
        ReachConfig {
            time_step,
            horizon,
            error_tolerance: None,
            max_splits: 8,
            max_zonotope_order: 20.0,
            input_set,
            curvature_margin: 1.0,
            substeps: 1,
        }
    }

    pub fn substep(&self) -> f64 {
        self.time_step / self.substeps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time_step > 0.0) {
            return Err(Error::InvalidArgument("time step must be positive".into()));
        }
        if !(self.horizon >= self.time_step) {
            return Err(Error::InvalidArgument(
                "horizon must cover at least one step".into(),
            ));
        }
        if !(self.max_zonotope_order >= 1.0) {
            return Err(Error::InvalidArgument(
                "zonotope order must be at least 1".into(),
            ));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidArgument(
                "at least one substep is required".into(),
            ));
        }
        if !(self.curvature_margin >= 1.0) {
            return Err(Error::InvalidArgument(
                "curvature margin must be at least 1".into(),
            ));
        }
        if let Some(tol) = &self.error_tolerance {
            if tol.iter().any(|t| !(*t > 0.0)) {
                return Err(Error::InvalidArgument(
                    "error tolerances must be positive".into(),
                ));
            }
        }
        self.num_steps().map(|_| ())
    }

    pub fn num_steps(&self) -> Result<usize> {
        let n = (self.horizon / self.time_step).round();
        if (n * self.time_step - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(Error::InvalidArgument(format!(
                "time step {} does not divide the horizon {}",
                self.time_step, self.horizon
            )));
        }
        Ok(n as usize)
    }

    /// The configured tolerance, or 1% of the initial hull widths (axes of
    /// zero width get no limit).
    pub fn resolved_tolerance(&self, initial: &IntervalBox) -> DVector<f64> {
        match &self.error_tolerance {
            Some(t) => DVector::from_column_slice(t),
            None => initial.widths().map(|w| {
                if w > 0.0 {
                    DEFAULT_TOLERANCE_FRACTION * w
                } else {
                    f64::INFINITY
                }
            }),
        }
    }
}

/// A state constraint applied after every step.
#[derive(Debug, Clone, PartialEq)]
pub enum StateConstraint {
    Fixed(Halfspace),
    /// Heat-rate limit, re-linearized at the center of each new set.
    HeatLimit {
        params: ThermalParams,
        env: Environment,
    },
}

impl StateConstraint {
    pub fn halfspace_for(&self, set: &ConstrainedZonotope) -> Result<Halfspace> {
        match self {
            StateConstraint::Fixed(h) => Ok(h.clone()),
            StateConstraint::HeatLimit { params, env } => {
                let c = set.center();
                heat_limit_halfspace((c[0], c[1]), params, env)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachStep {
    pub branch: usize,
    /// Step number `k ≥ 1`; the step covers `[(k−1)Δt, kΔt]`.
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Enclosure of the reachable states at `t_end`.
    pub set: ConstrainedZonotope,
    /// Enclosure of the reachable states over `[t_start, t_end]`.
    pub interval_set: ConstrainedZonotope,
    pub linearization_state: DVector<f64>,
    pub linearization_input: DVector<f64>,
    pub error_bound: DVector<f64>,
    /// Halfspaces intersected into `set` and `interval_set`.
    pub constraints: Vec<Halfspace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    pub parent: Option<usize>,
    /// First step computed by this branch (its parent owns the earlier ones).
    pub first_step: usize,
    pub split_axis: Option<usize>,
    /// Why the branch stopped before the horizon, if it did.
    pub terminated: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachTube {
    pub time_step: f64,
    pub horizon: f64,
    pub initial_set: ConstrainedZonotope,
    pub steps: Vec<ReachStep>,
    pub branches: Vec<Branch>,
    /// Set when the error tolerance was exceeded with no split budget left.
    pub split_budget_exhausted: bool,
    pub warnings: Vec<String>,
}

impl ReachTube {
    pub fn num_steps(&self) -> usize {
        self.steps.iter().map(|s| s.index).max().unwrap_or(0)
    }

    /// Every stored set at step `k` (all branches); `k = 0` is the
    /// initial set.
    pub fn sets_at(&self, k: usize) -> Vec<&ConstrainedZonotope> {
        if k == 0 {
            return vec![&self.initial_set];
        }
        self.steps
            .iter()
            .filter(|s| s.index == k)
            .map(|s| &s.set)
            .collect()
    }

    pub fn steps_at(&self, k: usize) -> impl Iterator<Item = &ReachStep> {
        self.steps.iter().filter(move |s| s.index == k)
    }

    /// `branch` followed by its ancestors up to the root.
    pub fn branch_lineage(&self, branch: usize) -> Vec<usize> {
        let mut chain = vec![];
        let mut cur = Some(branch);
        while let Some(b) = cur {
            chain.push(b);
            cur = self.branches.get(b).and_then(|br| br.parent);
        }
        chain
    }

    /// Steps seen by `branch`, inherited ones included, in time order.
    pub fn branch_path(&self, branch: usize) -> Vec<&ReachStep> {
        let chain = self.branch_lineage(branch);
        let mut out: Vec<&ReachStep> = vec![];
        for k in 1..=self.num_steps() {
            // The deepest ancestor-or-self that owns step k.
            if let Some(s) = chain
                .iter()
                .find_map(|&b| self.steps.iter().find(|s| s.branch == b && s.index == k))
            {
                out.push(s);
            }
        }
        out
    }

    /// Branches with no children.
    pub fn leaves(&self) -> Vec<usize> {
        self.branches
            .iter()
            .filter(|b| !self.branches.iter().any(|c| c.parent == Some(b.id)))
            .map(|b| b.id)
            .collect()
    }

    /// Union of the interval hulls at step `k`.
    pub fn hull_at(&self, k: usize) -> Result<Option<IntervalBox>> {
        let mut acc: Option<IntervalBox> = None;
        for s in self.sets_at(k) {
            let h = s.interval_hull()?;
            acc = Some(match acc {
                None => h,
                Some(a) => a.hull(&h),
            });
        }
        Ok(acc)
    }
}

fn normalized_error(half_widths: &DVector<f64>, tol: &DVector<f64>) -> f64 {
    half_widths
        .iter()
        .zip(tol.iter())
        .map(|(e, t)| if t.is_finite() { e / t } else { 0.0 })
        .fold(0.0, f64::max)
}

/// Result of propagating one stored step (all of its substeps).
struct Advance {
    next: ConstrainedZonotope,
    during: ConstrainedZonotope,
    /// Linearization of the first substep.
    lin: LinearizedStep,
    /// Component-wise maximum of `l` over the substeps.
    error_bound: DVector<f64>,
    /// Summed error half-widths over the substeps, normalized by `tol`.
    score: f64,
}

fn substep<F: VectorField>(
    f: &F,
    set: &ConstrainedZonotope,
    cfg: &ReachConfig,
    want_during: bool,
) -> Result<(
    LinearizedStep,
    DVector<f64>,
    ConstrainedZonotope,
    Option<ConstrainedZonotope>,
)> {
    let dt = cfg.substep();
    let hull = safe_hull(set)?;
    let lin = linearize_with_hull(f, &hull, &cfg.input_set, dt)?;
    let prop = propagation(&lin, &hull, &cfg.input_set, dt, cfg.curvature_margin)?;
    let err_box = Zonotope::from_half_widths(DVector::zeros(set.dim()), &prop.error_half_widths)?;
    let next =
        affine_image(&lin, &prop.series, set, &cfg.input_set)?.minkowski_sum_zonotope(&err_box)?;
    let during = if want_during {
        Some(interval_set(&lin, &prop, set, &cfg.input_set)?)
    } else {
        None
    };
    Ok((lin, prop.error_half_widths, next, during))
}

/// Propagates `set` over one stored step. Constraints are not applied.
/// `want_during` skips the time-interval set when only the score matters.
fn advance<F: VectorField>(
    f: &F,
    set: &ConstrainedZonotope,
    cfg: &ReachConfig,
    tol: &DVector<f64>,
    want_during: bool,
) -> Result<Advance> {
    let n = set.dim();
    let mut cur = set.clone();
    let mut first = None;
    let mut bound = DVector::zeros(n);
    let mut total = DVector::zeros(n);
    let mut pieces = vec![];
    for _ in 0..cfg.substeps {
        let (lin, err, next, during) = substep(f, &cur, cfg, want_during)?;
        bound = bound.sup(&lin.error_bound);
        total += err;
        pieces.extend(during);
        if first.is_none() {
            first = Some(lin);
        }
        cur = next.reduce_order(cfg.max_zonotope_order);
    }
    let during = if !want_during {
        cur.clone()
    } else if pieces.len() == 1 {
        pieces.pop().unwrap()
    } else {
        // Box around every substep's time-interval set.
        let mut acc: Option<IntervalBox> = None;
        for p in &pieces {
            let h = safe_hull(p)?;
            acc = Some(match acc {
                None => h,
                Some(a) => a.hull(&h),
            });
        }
        Zonotope::from_box(&acc.expect("at least one substep")).into()
    };
    Ok(Advance {
        next: cur,
        during,
        lin: first.expect("at least one substep"),
        error_bound: bound,
        score: normalized_error(&total, tol),
    })
}

fn split_set(
    set: &ConstrainedZonotope,
    axis: usize,
) -> Result<(ConstrainedZonotope, ConstrainedZonotope)> {
    if set.is_unconstrained() {
        let (a, b) = set.zonotope_part().split(axis)?;
        return Ok((a.into(), b.into()));
    }
    let hull = safe_hull(set)?;
    set.split_at(axis, 0.5 * (hull.lower[axis] + hull.upper[axis]))
}

fn score_or_inf<F: VectorField>(
    f: &F,
    set: &ConstrainedZonotope,
    cfg: &ReachConfig,
    tol: &DVector<f64>,
) -> Result<f64> {
    match advance(f, set, cfg, tol, false) {
        Ok(a) => Ok(a.score),
        Err(Error::Singularity(_)) | Err(Error::NonFinite(_)) | Err(Error::Reach(_)) => {
            Ok(f64::INFINITY)
        }
        Err(e) => Err(e),
    }
}

/// The state axis whose split yields the smallest worst child error
/// (normalized by `tol`), with its score; ties go to the lower axis.
pub fn choose_split_axis<F: VectorField>(
    f: &F,
    set: &ConstrainedZonotope,
    cfg: &ReachConfig,
    tol: &DVector<f64>,
) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for axis in 0..set.dim() {
        let (a, b) = split_set(set, axis)?;
        let score = score_or_inf(f, &a, cfg, tol)?.max(score_or_inf(f, &b, cfg, tol)?);
        if best.map_or(true, |(_, s)| score < s) {
            best = Some((axis, score));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("cannot split a zero-dimensional set".into()))
}

/// Computes the reachable tube from `initial`: linearize, propagate, add
/// the error box, intersect the constraints, reduce, and split where the
/// linearization error exceeds the tolerance. A branch whose propagation
/// leaves the model's domain is terminated with a reason.
pub fn reach<F: VectorField>(
    f: &F,
    initial: &ConstrainedZonotope,
    cfg: &ReachConfig,
    constraints: &[StateConstraint],
) -> Result<ReachTube> {
    cfg.validate()?;
    let n = f.state_dim();
    if initial.dim() != n {
        return Err(Error::dim("initial set", n, initial.dim()));
    }
    if cfg.input_set.dim() != f.input_dim() {
        return Err(Error::dim("input set", f.input_dim(), cfg.input_set.dim()));
    }
    if initial.is_empty()? {
        return Err(Error::EmptySet);
    }
    let steps_total = cfg.num_steps()?;
    let tol = cfg.resolved_tolerance(&safe_hull(initial)?);
    if tol.len() != n {
        return Err(Error::dim("error tolerance", n, tol.len()));
    }
    let dt = cfg.time_step;

    let mut tube = ReachTube {
        time_step: dt,
        horizon: cfg.horizon,
        initial_set: initial.clone(),
        steps: vec![],
        branches: vec![Branch {
            id: 0,
            parent: None,
            first_step: 1,
            split_axis: None,
            terminated: None,
        }],
        split_budget_exhausted: false,
        warnings: vec![],
    };
    let mut splits_used = 0;
    // (branch id, next step, start set); processed depth-first, lower child first.
    let mut work: Vec<(usize, usize, ConstrainedZonotope)> = vec![(0, 1, initial.clone())];

    while let Some((branch, first, start)) = work.pop() {
        let mut set = start;
        let mut k = first;
        while k <= steps_total {
            let step = match advance(f, &set, cfg, &tol, true) {
                Ok(a) => a,
                Err(e @ (Error::Singularity(_) | Error::NonFinite(_) | Error::Reach(_))) => {
                    let reason = format!("propagation failed at step {k}: {e}");
                    log::warn!("branch {branch}: {reason}");
                    tube.warnings.push(format!("branch {branch}: {reason}"));
                    tube.branches[branch].terminated = Some(reason);
                    break;
                }
                Err(e) => return Err(e),
            };
            if step.score > 1.0 {
                if splits_used < cfg.max_splits {
                    let (axis, child_score) = choose_split_axis(f, &set, cfg, &tol)?;
                    if child_score < step.score * (1.0 - 1e-3) {
                        splits_used += 1;
                        let (lo, hi) = split_set(&set, axis)?;
                        let ids = [tube.branches.len(), tube.branches.len() + 1];
                        for id in ids {
                            tube.branches.push(Branch {
                                id,
                                parent: Some(branch),
                                first_step: k,
                                split_axis: Some(axis),
                                terminated: None,
                            });
                        }
                        log::debug!("step {k}: branch {branch} split on axis {axis}");
                        work.push((ids[1], k, hi));
                        work.push((ids[0], k, lo));
                        break;
                    }
                    log::debug!("step {k}: splitting would not reduce the linearization error");
                } else if !tube.split_budget_exhausted {
                    tube.split_budget_exhausted = true;
                    tube.warnings.push(format!(
                        "linearization error exceeds tolerance at step {k} with no split budget left"
                    ));
                }
            }
            let Advance {
                mut next,
                mut during,
                lin,
                error_bound,
                ..
            } = step;
            let mut used = vec![];
            for c in constraints {
                let h = c.halfspace_for(&next)?;
                next = next.intersect_halfspace(&h)?;
                during = during.intersect_halfspace(&h)?;
                used.push(h);
            }
            if !next.is_unconstrained() && next.is_empty()? {
                let reason = format!("empty after constraint intersection at step {k}");
                log::info!("branch {branch}: {reason}");
                tube.branches[branch].terminated = Some(reason);
                break;
            }
            next = next.reduce_order(cfg.max_zonotope_order);
            during = during.reduce_order(cfg.max_zonotope_order);
            tube.steps.push(ReachStep {
                branch,
                index: k,
                t_start: (k - 1) as f64 * dt,
                t_end: k as f64 * dt,
                set: next.clone(),
                interval_set: during,
                linearization_state: lin.state_point,
                linearization_input: lin.input_point,
                error_bound,
                constraints: used,
            });
            set = next;
            k += 1;
        }
    }
    tube.steps
        .sort_by(|a, b| a.branch.cmp(&b.branch).then(a.index.cmp(&b.index)));
    Ok(tube)
}
