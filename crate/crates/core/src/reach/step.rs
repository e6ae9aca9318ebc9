use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::VectorField;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::reach::series::{step_series, StepSeries};
use crate::setalg::{ConstrainedZonotope, IntervalBox, Zonotope};

const ENCLOSURE_ITERATIONS: usize = 40;
/// Relative allowance for round-off in the affine image.
const IMAGE_MARGIN: f64 = 1e-12;

/// First-order model `ẋ ≈ f₀ + A(x − x*) + B(u − u*)` about `z* = (x*, u*)`,
/// with `|ẋ − model| ≤ l` component-wise over `enclosure × U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedStep {
    pub state_point: DVector<f64>,
    pub input_point: DVector<f64>,
    pub state_matrix: DMatrix<f64>,
    pub input_matrix: DMatrix<f64>,
    pub constant: DVector<f64>,
    pub error_bound: DVector<f64>,
    /// Box containing every state reachable within the step.
    pub enclosure: IntervalBox,
}

/// Interval hull that is never tighter than the true one: LP bounds are
/// relaxed by a relative margin and clipped to the unconstrained hull.
pub(crate) fn safe_hull(set: &ConstrainedZonotope) -> Result<IntervalBox> {
    let outer = set.zonotope_part().interval_hull();
    if set.is_unconstrained() {
        return Ok(outer);
    }
    let mut h = set.interval_hull()?;
    for i in 0..h.dim() {
        let slack = 1e-7 * (h.upper[i] - h.lower[i]) + 1e-9 * (outer.upper[i] - outer.lower[i]);
        h.lower[i] = (h.lower[i] - slack).max(outer.lower[i]);
        h.upper[i] = (h.upper[i] + slack).min(outer.upper[i]);
    }
    Ok(h)
}

/// Box containing `x(t)` for `t ∈ [0, Δt]` from any start in `start` under
/// any constant input in `inputs` (Picard iteration with inflation).
pub fn a_priori_enclosure<F: VectorField>(
    f: &F,
    start: &IntervalBox,
    inputs: &IntervalBox,
    dt: f64,
) -> Result<IntervalBox> {
    let h = start.intervals();
    let u = inputs.intervals();
    let sweep = Interval::new(0.0, dt);
    let mut e = h.clone();
    for _ in 0..ENCLOSURE_ITERATIONS {
        let rates = f.rate_enclosure(&e, &u)?;
        let cand: Vec<Interval> = h
            .iter()
            .zip(&rates)
            .map(|(hi, r)| *hi + sweep * *r)
            .collect();
        if cand.iter().zip(&e).all(|(c, ei)| c.subset_of(ei)) {
            return Ok(IntervalBox::from_intervals(&cand));
        }
        e = cand
            .iter()
            .zip(&e)
            .map(|(c, ei)| {
                let c = c.hull(ei);
                let pad = 0.1 * c.width() + 1e-12 * c.mag() + f64::MIN_POSITIVE;
                Interval::new(c.lo - pad, c.hi + pad)
            })
            .collect();
    }
    Err(Error::Reach(
        "no a-priori state enclosure found; reduce the time step".into(),
    ))
}

fn input_box(u: &Zonotope) -> IntervalBox {
    u.interval_hull()
}

/// Linearizes about the hull midpoint of `set` and the center of `inputs`
/// and bounds the Lagrange remainder over everything reachable in `dt`.
pub fn linearize_at<F: VectorField>(
    f: &F,
    set: &ConstrainedZonotope,
    inputs: &Zonotope,
    dt: f64,
) -> Result<LinearizedStep> {
    let hull = safe_hull(set)?;
    linearize_with_hull(f, &hull, inputs, dt)
}

pub(crate) fn linearize_with_hull<F: VectorField>(
    f: &F,
    hull: &IntervalBox,
    inputs: &Zonotope,
    dt: f64,
) -> Result<LinearizedStep> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("time step must be positive".into()));
    }
    let n = f.state_dim();
    let ubox = input_box(inputs);
    let x_star = hull.center();
    let u_star = inputs.center().clone();
    let constant = f.rates(&x_star, &u_star)?;
    let (a, b) = f.jacobians(&x_star, &u_star)?;
    let enclosure = a_priori_enclosure(f, hull, &ubox, dt)?;

    let mut gamma = Vec::with_capacity(n + u_star.len());
    for i in 0..n {
        let lo = (enclosure.lower[i] - x_star[i]).abs();
        let hi = (enclosure.upper[i] - x_star[i]).abs();
        gamma.push(lo.max(hi).next_up());
    }
    for j in 0..u_star.len() {
        let lo = (ubox.lower[j] - u_star[j]).abs();
        let hi = (ubox.upper[j] - u_star[j]).abs();
        gamma.push(lo.max(hi).next_up());
    }
    let zbox = enclosure.product(&ubox);
    let hess = f.hessian_bounds(&zbox)?;
    let error_bound = DVector::from_iterator(
        n,
        hess.iter().map(|h| {
            let mut s = 0.0;
            for (r, gr) in gamma.iter().enumerate() {
                for (c, gc) in gamma.iter().enumerate() {
                    s += gr * h[(r, c)] * gc;
                }
            }
            0.5 * s * (1.0 + 1e-12)
        }),
    );
    Ok(LinearizedStep {
        state_point: x_star,
        input_point: u_star,
        state_matrix: a,
        input_matrix: b,
        constant,
        error_bound,
        enclosure,
    })
}

/// Everything one step needs beyond the linearization itself.
pub(crate) struct Propagation {
    pub series: StepSeries,
    /// Bound on `|x − x*|` over the start set.
    pub state_offset: DVector<f64>,
    /// Bound on `|f₀ + B(u − u*)|` over the input set.
    pub forcing_bound: DVector<f64>,
    /// Half-widths of the linearization error and truncation remainder box.
    pub error_half_widths: DVector<f64>,
}

pub(crate) fn propagation(
    step: &LinearizedStep,
    hull: &IntervalBox,
    inputs: &Zonotope,
    dt: f64,
    kappa: f64,
) -> Result<Propagation> {
    let series = step_series(&step.state_matrix, dt)?;
    let x_star = &step.state_point;
    let state_offset = DVector::from_fn(x_star.len(), |i, _| {
        (hull.lower[i] - x_star[i])
            .abs()
            .max((hull.upper[i] - x_star[i]).abs())
    });
    let u_radius = inputs.radius();
    let forcing_bound = step.constant.abs() + step.input_matrix.abs() * &u_radius;
    let mut err = &series.forcing * &step.error_bound * kappa
        + &series.phi_tail * &state_offset
        + &series.gamma_tail * &forcing_bound;
    let image_scale = x_star.abs() + &state_offset + (&series.gamma * &step.constant).abs();
    err += image_scale * IMAGE_MARGIN;
    Ok(Propagation {
        series,
        state_offset,
        forcing_bound,
        error_half_widths: err,
    })
}

/// The affine image `x* + Φ(R − x*) + Γf₀ ⊕ ΓB(U − u*)` of the linearized
/// model over one step, bloated by the series truncation remainder.
pub fn lin_reach_step(
    step: &LinearizedStep,
    set: &ConstrainedZonotope,
    inputs: &Zonotope,
    dt: f64,
) -> Result<ConstrainedZonotope> {
    let hull = safe_hull(set)?;
    let prop = propagation(step, &hull, inputs, dt, 0.0)?;
    let image = affine_image(step, &prop.series, set, inputs)?;
    image.minkowski_sum_zonotope(&Zonotope::from_half_widths(
        DVector::zeros(set.dim()),
        &prop.error_half_widths,
    )?)
}

pub(crate) fn affine_image(
    step: &LinearizedStep,
    series: &StepSeries,
    set: &ConstrainedZonotope,
    inputs: &Zonotope,
) -> Result<ConstrainedZonotope> {
    let x_star = &step.state_point;
    let moved = set
        .translate(&-x_star)?
        .linear_map(&series.phi)?
        .translate(&(x_star + &series.gamma * &step.constant))?;
    let gb = &series.gamma * &step.input_matrix;
    let input_part = Zonotope::new(DVector::zeros(set.dim()), gb * inputs.generators())?;
    moved.minkowski_sum_zonotope(&input_part)
}

/// Axis-aligned box of half-widths `κ·(∫₀^Δt e^{|A|s} ds)·l`; equals
/// `κ·l·Δt` when `A = 0`.
pub fn error_set(step: &LinearizedStep, dt: f64, kappa: f64) -> Result<Zonotope> {
    let series = step_series(&step.state_matrix, dt)?;
    let hw = &series.forcing * &step.error_bound * kappa;
    Zonotope::from_half_widths(DVector::zeros(hw.len()), &hw)
}

/// Enclosure of every state visited during the step: the segment between
/// the start set and its affine image (sharing coefficients), bloated by
/// the curvature of `t ↦ e^{At}` and by the error box.
pub(crate) fn interval_set(
    step: &LinearizedStep,
    prop: &Propagation,
    set: &ConstrainedZonotope,
    inputs: &Zonotope,
) -> Result<ConstrainedZonotope> {
    let n = set.dim();
    let s = &prop.series;
    let x_star = &step.state_point;
    let eye = DMatrix::<f64>::identity(n, n);
    let offset = set.center() - x_star;
    let drift = &s.gamma * &step.constant;
    let center = x_star + (&offset + &s.phi * &offset + &drift) * 0.5;
    let sweep = ((&s.phi - &eye) * &offset + &drift) * 0.5;
    let g = set.generators();
    let shared = (&eye + &s.phi) * g * 0.5;
    let free = (&s.phi - &eye) * g * 0.5;
    let input_gens = &s.gamma * &step.input_matrix * inputs.generators();
    let bloat = &s.state_bow * &prop.state_offset
        + &s.input_bow * &prop.forcing_bound
        + &prop.error_half_widths;

    let p = g.ncols();
    let extra = 1 + free.ncols() + input_gens.ncols() + n;
    let mut gens = DMatrix::zeros(n, p + extra);
    gens.view_mut((0, 0), (n, p)).copy_from(&shared);
    gens.set_column(p, &sweep);
    let mut col = p + 1;
    gens.view_mut((0, col), (n, free.ncols())).copy_from(&free);
    col += free.ncols();
    gens.view_mut((0, col), (n, input_gens.ncols()))
        .copy_from(&input_gens);
    col += input_gens.ncols();
    for i in 0..n {
        gens[(i, col + i)] = bloat[i];
    }
    let m = set.num_constraints();
    let mut a = DMatrix::zeros(m, p + extra);
    a.view_mut((0, 0), (m, p))
        .copy_from(set.constraint_matrix());
    ConstrainedZonotope::new(center, gens, a, set.constraint_vector().clone())
}
