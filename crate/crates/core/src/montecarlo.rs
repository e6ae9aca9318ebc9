//! Sampling audit of a reachable tube: simulate random admissible
//! trajectories with RK4 and check that every step-boundary state lies in
//! the stored sets.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_rk4, PiecewiseConstant, VectorField};
use crate::error::{Error, Result};
use crate::reach::ReachTube;
use crate::setalg::{ConstrainedZonotope, Zonotope};

/// Tolerance on the coefficient norm when testing membership.
pub const CONTAINMENT_SLACK: f64 = 1e-9;
/// RK4 sub-steps per reachability step.
pub const SUBSTEPS: usize = 100;
const REJECTION_LIMIT: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub samples: usize,
    pub seed: u64,
    /// Step-boundary checks performed.
    pub checks: usize,
    pub violations: usize,
    /// Largest `‖ξ‖∞ − 1` needed to represent a simulated state (negative
    /// when every state lies strictly inside).
    pub worst_slack: f64,
    pub worst_sample: Option<usize>,
    pub worst_step: Option<usize>,
    /// Seed that reproduces the worst violating sample through
    /// [`replay_sample`].
    pub replay_seed: Option<u64>,
    /// Samples whose simulation left the model's domain.
    pub failed_simulations: usize,
}

/// Seed of sample `i` derived from the run seed (SplitMix64 finalizer).
pub fn sample_seed(seed: u64, i: usize) -> u64 {
    let mut z = seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn uniform_coefficients(rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |_, _| rng.gen_range(-1.0..=1.0))
}

/// A random member of `set`: uniform in coefficient space when
/// unconstrained, otherwise uniform over the set by rejection from its hull.
pub fn sample_set(set: &ConstrainedZonotope, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
    if set.is_unconstrained() {
        return Ok(set.point_at(&uniform_coefficients(rng, set.num_generators())));
    }
    let hull = set.interval_hull()?;
    for _ in 0..REJECTION_LIMIT {
        let x = DVector::from_fn(hull.dim(), |i, _| {
            if hull.lower[i] < hull.upper[i] {
                rng.gen_range(hull.lower[i]..=hull.upper[i])
            } else {
                hull.lower[i]
            }
        });
        if set.contains_point(&x, 0.0) {
            return Ok(x);
        }
    }
    Err(Error::Reach(
        "rejection sampling of the initial set failed".into(),
    ))
}

fn sample_input(u: &Zonotope, rng: &mut ChaCha8Rng) -> DVector<f64> {
    u.point_at(&uniform_coefficients(rng, u.num_generators()))
}

/// One simulated trajectory: states at every step boundary `0, Δt, …`.
pub fn replay_sample<F: VectorField>(
    f: &F,
    tube: &ReachTube,
    inputs: &Zonotope,
    sample_seed: u64,
) -> Result<Vec<DVector<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let x0 = sample_set(&tube.initial_set, &mut rng)?;
    let steps = tube.num_steps();
    let controls: Vec<DVector<f64>> = (0..steps.max(1))
        .map(|_| sample_input(inputs, &mut rng))
        .collect();
    let signal = PiecewiseConstant::new(tube.time_step, controls)?;
    let dt = tube.time_step / SUBSTEPS as f64;
    let traj = integrate_rk4(f, &x0, &signal, steps as f64 * tube.time_step, dt)?;
    Ok((0..=steps)
        .map(|k| traj.states[k * SUBSTEPS].clone())
        .collect())
}

/// Smallest coefficient norm of `x` over the sets stored at step `k`.
pub fn membership_at(tube: &ReachTube, k: usize, x: &DVector<f64>) -> Result<f64> {
    let mut best = f64::INFINITY;
    for set in tube.sets_at(k) {
        if let Some(t) = set.membership_norm(x)? {
            best = best.min(t);
            if best <= 1.0 {
                break;
            }
        }
    }
    Ok(best)
}

struct SampleOutcome {
    worst: f64,
    worst_step: usize,
    violations: usize,
    checks: usize,
    failed: bool,
}

pub fn monte_carlo_validate<F: VectorField>(
    f: &F,
    tube: &ReachTube,
    inputs: &Zonotope,
    n_samples: usize,
    seed: u64,
) -> Result<ContainmentReport> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument(
            "at least one sample is required".into(),
        ));
    }
    let outcomes: Vec<Result<SampleOutcome>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let states = match replay_sample(f, tube, inputs, sample_seed(seed, i)) {
                Ok(s) => s,
                Err(Error::Singularity(_)) | Err(Error::NonFinite(_)) => {
                    return Ok(SampleOutcome {
                        worst: f64::NEG_INFINITY,
                        worst_step: 0,
                        violations: 0,
                        checks: 0,
                        failed: true,
                    })
                }
                Err(e) => return Err(e),
            };
            let mut out = SampleOutcome {
                worst: f64::NEG_INFINITY,
                worst_step: 0,
                violations: 0,
                checks: 0,
                failed: false,
            };
            for (k, x) in states.iter().enumerate() {
                let t = membership_at(tube, k, x)?;
                out.checks += 1;
                if t > 1.0 + CONTAINMENT_SLACK {
                    out.violations += 1;
                }
                if t - 1.0 > out.worst {
                    out.worst = t - 1.0;
                    out.worst_step = k;
                }
            }
            Ok(out)
        })
        .collect();

    let mut report = ContainmentReport {
        samples: n_samples,
        seed,
        checks: 0,
        violations: 0,
        worst_slack: f64::NEG_INFINITY,
        worst_sample: None,
        worst_step: None,
        replay_seed: None,
        failed_simulations: 0,
    };
    for (i, o) in outcomes.into_iter().enumerate() {
        let o = o?;
        report.checks += o.checks;
        report.violations += o.violations;
        if o.failed {
            report.failed_simulations += 1;
        }
        if o.worst > report.worst_slack {
            report.worst_slack = o.worst;
            report.worst_sample = Some(i);
            report.worst_step = Some(o.worst_step);
            report.replay_seed = Some(sample_seed(seed, i));
        }
    }
    Ok(report)
}
