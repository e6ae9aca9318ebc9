//! Stagnation-point convective heating `Q̇ = C·√ρ·v^3.05`, the accumulated
//! heat load, radiative-equilibrium surface temperature, and the linearized
//! heat-rate constraint.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{density, Environment};
use crate::error::{Error, Result};
use crate::setalg::{ConstrainedZonotope, Halfspace};

/// Velocity exponent of the heating correlation.
pub const VELOCITY_EXPONENT: f64 = 3.05;

const KELVIN_OFFSET: f64 = 273.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalParams {
    /// `C` in kg^0.5·m^1.5/s³.
    pub heating_constant: f64,
    pub stefan_boltzmann: f64,
    pub emissivity: f64,
    /// `Q̇max` in W/m².
    pub heat_rate_limit: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        ThermalParams {
            heating_constant: 1.1813e-3,
            stefan_boltzmann: 5.67e-8,
            emissivity: 0.8,
            heat_rate_limit: 4.0e6,
        }
    }
}

impl ThermalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.heating_constant > 0.0
            && self.stefan_boltzmann > 0.0
            && self.heat_rate_limit > 0.0)
        {
            return Err(Error::InvalidArgument(
                "thermal constants must be positive".into(),
            ));
        }
        if !(self.emissivity > 0.0 && self.emissivity <= 1.0) {
            return Err(Error::InvalidArgument(
                "emissivity must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Heat rate in W/m² at altitude `h` (m) and speed `v` (m/s).
pub fn heat_rate(h: f64, v: f64, params: &ThermalParams, env: &Environment) -> f64 {
    params.heating_constant * density(h, env).sqrt() * v.max(0.0).powf(VELOCITY_EXPONENT)
}

/// `(∂Q̇/∂h, ∂Q̇/∂v)` at `(h, v)`.
pub fn heat_rate_gradient(h: f64, v: f64, params: &ThermalParams, env: &Environment) -> (f64, f64) {
    let q = heat_rate(h, v, params, env);
    let dv = if v > 0.0 {
        VELOCITY_EXPONENT * q / v
    } else {
        0.0
    };
    (-q / (2.0 * env.scale_height), dv)
}

/// Altitude at which `Q̇(h, v) = q`.
pub fn altitude_at_heat_rate(v: f64, q: f64, params: &ThermalParams, env: &Environment) -> f64 {
    // q = C·√ρ₀·exp(−h/2h_r)·v^n  ⇒  h = 2h_r·ln(C·√ρ₀·v^n / q)
    let at_sea_level =
        params.heating_constant * env.sea_level_density.sqrt() * v.powf(VELOCITY_EXPONENT);
    2.0 * env.scale_height * (at_sea_level / q).ln()
}

/// Radiative-equilibrium surface temperature in kelvin.
pub fn surface_temperature(qdot: f64, params: &ThermalParams) -> f64 {
    (qdot.max(0.0) / (params.stefan_boltzmann * params.emissivity)).powf(0.25)
}

pub fn kelvin_to_celsius(t: f64) -> f64 {
    t - KELVIN_OFFSET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatProfile {
    pub times: Vec<f64>,
    pub altitudes: Vec<f64>,
    pub velocities: Vec<f64>,
    pub rates: Vec<f64>,
    /// Trapezoidal integral of the rate from the first sample (J/m²).
    pub cumulative: Vec<f64>,
    pub peak_rate: f64,
    pub peak_time: f64,
}

impl HeatProfile {
    pub fn total_load(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }
}

/// Heat rates and load along sampled `(t, h, v)` points.
pub fn heat_load(
    samples: &[(f64, f64, f64)],
    params: &ThermalParams,
    env: &Environment,
) -> Result<HeatProfile> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "heat load needs at least two samples".into(),
        ));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidArgument(
            "sample times must increase strictly".into(),
        ));
    }
    let rates: Vec<f64> = samples
        .iter()
        .map(|&(_, h, v)| heat_rate(h, v, params, env))
        .collect();
    let mut cumulative = Vec::with_capacity(samples.len());
    let mut total = 0.0;
    cumulative.push(0.0);
    for k in 1..samples.len() {
        total += 0.5 * (rates[k] + rates[k - 1]) * (samples[k].0 - samples[k - 1].0);
        cumulative.push(total);
    }
    let (peak_idx, peak_rate) =
        rates
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, r)| if r > acc.1 { (i, r) } else { acc },
            );
    Ok(HeatProfile {
        times: samples.iter().map(|s| s.0).collect(),
        altitudes: samples.iter().map(|s| s.1).collect(),
        velocities: samples.iter().map(|s| s.2).collect(),
        rates,
        cumulative,
        peak_rate,
        peak_time: samples[peak_idx].0,
    })
}

/// First-order expansion of `Q̇(h, v) ≤ Q̇max` about `(h₀, v₀)`, as a
/// halfspace over the full six-dimensional state. The residual at the
/// anchor equals `Q̇(h₀, v₀) − Q̇max`.
pub fn heat_limit_halfspace(
    anchor: (f64, f64),
    params: &ThermalParams,
    env: &Environment,
) -> Result<Halfspace> {
    let (h0, v0) = anchor;
    if !(v0 > 0.0) {
        return Err(Error::InvalidArgument(
            "heat limit cannot be linearized at nonpositive speed".into(),
        ));
    }
    let q0 = heat_rate(h0, v0, params, env);
    let (dh, dv) = heat_rate_gradient(h0, v0, params, env);
    let mut normal = DVector::zeros(6);
    normal[0] = dh;
    normal[1] = dv;
    Halfspace::new(normal, params.heat_rate_limit - q0 + dh * h0 + dv * v0)
}

/// Upper bound on `Q̇` over a set: the rate at its lowest altitude and
/// highest speed.
pub fn max_heat_rate_over_set(
    set: &ConstrainedZonotope,
    params: &ThermalParams,
    env: &Environment,
) -> Result<f64> {
    let hull = set.interval_hull()?;
    Ok(heat_rate(hull.lower[0], hull.upper[1], params, env))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setalg::Zonotope;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (ThermalParams, Environment) {
        (ThermalParams::default(), Environment::default())
    }

    #[test]
    fn heat_rate_values() {
        let (p, env) = setup();
        assert_eq!(heat_rate(50e3, 0.0, &p, &env), 0.0);
        // 1.1813e-3·√(1.225·e^(−80000/7500))·7800^3.05
        let want =
            1.1813e-3 * (1.225f64 * (-80000.0f64 / 7500.0).exp()).sqrt() * 7800f64.powf(3.05);
        let q = heat_rate(80e3, 7800.0, &p, &env);
        assert!((q - want).abs() < 1e-6 * want);
        assert!((q - 4.69e6).abs() < 0.01e6);
        let ratio = heat_rate(60e3, 6000.0, &p, &env) / heat_rate(60e3, 3000.0, &p, &env);
        assert!((ratio - 2f64.powf(3.05)).abs() < 1e-12);
        assert!((2f64.powf(3.05) - 8.28).abs() < 0.01);
    }

    #[test]
    fn temperature_at_the_limit() {
        let (p, _) = setup();
        assert_eq!(surface_temperature(0.0, &p), 0.0);
        let t = surface_temperature(4.0e6, &p);
        assert!((t - 3064.0).abs() < 1.0);
        assert!((kelvin_to_celsius(t) - 2791.0).abs() < 1.0);
        assert!((kelvin_to_celsius(t) - 2800.0).abs() < 28.0);
        let t16 = surface_temperature(16.0 * 4.0e6, &p);
        assert!((t16 / t - 2.0).abs() < 1e-14);
    }

    #[test]
    fn temperature_inverts_stefan_boltzmann() {
        let (p, _) = setup();
        for t in [300.0, 1500.0, 2791.0, 5000.0] {
            let q = p.stefan_boltzmann * p.emissivity * f64::powi(t, 4);
            assert!((surface_temperature(q, &p) - t).abs() <= 1e-12 * t);
        }
    }

    #[test]
    fn heat_load_integration() {
        let (p, env) = setup();
        let hv = (60e3, 5000.0);
        let q = heat_rate(hv.0, hv.1, &p, &env);
        let samples: Vec<_> = (0..11).map(|k| (k as f64 * 3.0, hv.0, hv.1)).collect();
        let prof = heat_load(&samples, &p, &env).unwrap();
        assert!((prof.total_load() - q * 30.0).abs() < 1e-9 * q * 30.0);

        let still: Vec<_> = (0..5).map(|k| (k as f64, 60e3, 0.0)).collect();
        assert_eq!(heat_load(&still, &p, &env).unwrap().total_load(), 0.0);

        assert!(heat_load(&samples[..1], &p, &env).is_err());
        let backwards = [(1.0, 60e3, 5000.0), (0.5, 60e3, 5000.0)];
        assert!(heat_load(&backwards, &p, &env).is_err());
    }

    #[test]
    fn heat_load_trapezoid_order() {
        let (p, env) = setup();
        let traj = |t: f64| (70e3 - 150.0 * t, 7500.0 - 20.0 * t + 2.0 * (0.3 * t).sin());
        let load = |n: usize| {
            let samples: Vec<_> = (0..=n)
                .map(|k| {
                    let t = 60.0 * k as f64 / n as f64;
                    let (h, v) = traj(t);
                    (t, h, v)
                })
                .collect();
            heat_load(&samples, &p, &env).unwrap().total_load()
        };
        let fine = load(4096);
        let ratio = (load(64) - fine) / (load(128) - fine);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn heat_load_is_additive() {
        let (p, env) = setup();
        let pts: Vec<_> = (0..21)
            .map(|k| (k as f64, 70e3 - 100.0 * k as f64, 7000.0 - 5.0 * k as f64))
            .collect();
        let whole = heat_load(&pts, &p, &env).unwrap().total_load();
        let a = heat_load(&pts[..11], &p, &env).unwrap().total_load();
        let b = heat_load(&pts[10..], &p, &env).unwrap().total_load();
        assert!((whole - a - b).abs() < 1e-9 * whole);
    }

    #[test]
    fn halfspace_on_the_limit_curve() {
        let (p, env) = setup();
        let v0 = 7000.0;
        let h0 = altitude_at_heat_rate(v0, p.heat_rate_limit, &p, &env);
        assert!((heat_rate(h0, v0, &p, &env) / p.heat_rate_limit - 1.0).abs() < 1e-9);
        let hs = heat_limit_halfspace((h0, v0), &p, &env).unwrap();
        let x = DVector::from_vec(vec![h0, v0, 0.0, 0.0, 0.0, 0.0]);
        assert!(hs.residual(&x).abs() < 1e-9 * p.heat_rate_limit);
        assert!(heat_limit_halfspace((h0, 0.0), &p, &env).is_err());
    }

    #[test]
    fn halfspace_far_from_limit_is_not_binding() {
        let (p, env) = setup();
        let v0 = 5000.0;
        let h0 = altitude_at_heat_rate(v0, p.heat_rate_limit / 100.0, &p, &env);
        let hs = heat_limit_halfspace((h0, v0), &p, &env).unwrap();
        let set: ConstrainedZonotope = Zonotope::from_half_widths(
            DVector::from_vec(vec![h0, v0, 0.0, 0.0, 0.0, 0.0]),
            &DVector::from_vec(vec![1000.0, 50.0, 0.01, 0.01, 0.01, 0.01]),
        )
        .unwrap()
        .into();
        assert_eq!(set.intersect_halfspace(&hs).unwrap(), set);
    }

    fn audit(anchor: (f64, f64), p: &ThermalParams, env: &Environment, seed: u64) -> usize {
        let hs = heat_limit_halfspace(anchor, p, env).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut admitted = 0;
        for _ in 0..10_000 {
            let h = anchor.0 + rng.gen_range(-2000.0..2000.0);
            let v = anchor.1 + rng.gen_range(-100.0..100.0);
            let x = DVector::from_vec(vec![h, v, 0.0, 0.0, 0.0, 0.0]);
            if hs.contains(&x) {
                admitted += 1;
                assert!(heat_rate(h, v, p, env) <= 1.05 * p.heat_rate_limit);
            }
        }
        admitted
    }

    #[test]
    fn halfspace_audit_near_entry_center() {
        let (p, env) = setup();
        // Q̇ ≈ 7.4 MW/m² here, so the whole box lies beyond a 4 MW/m² limit
        // and the audit holds vacuously.
        assert_eq!(audit((71932.0, 7600.0), &p, &env, 5), 0);
        let on_curve = altitude_at_heat_rate(7600.0, p.heat_rate_limit, &p, &env);
        let admitted = audit((on_curve, 7600.0), &p, &env, 6);
        assert!(admitted > 1000, "{admitted}");
        let loose = ThermalParams {
            heat_rate_limit: 8.0e6,
            ..p
        };
        let admitted = audit((71932.0, 7600.0), &loose, &env, 7);
        assert!(admitted > 1000, "{admitted}");
    }

    #[test]
    fn set_bound_uses_low_high_corner() {
        let (p, env) = setup();
        let c = DVector::from_vec(vec![65e3, 6500.0, 0.0, 0.0, 0.0, 0.0]);
        let point: ConstrainedZonotope = Zonotope::point(c.clone()).into();
        assert_eq!(
            max_heat_rate_over_set(&point, &p, &env).unwrap(),
            heat_rate(65e3, 6500.0, &p, &env)
        );

        let hw = DVector::from_vec(vec![800.0, 60.0, 0.01, 0.01, 0.01, 0.01]);
        let boxed: ConstrainedZonotope = Zonotope::from_half_widths(c.clone(), &hw).unwrap().into();
        let bound = max_heat_rate_over_set(&boxed, &p, &env).unwrap();
        assert!((bound - heat_rate(64.2e3, 6560.0, &p, &env)).abs() < 1e-6 * bound);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let h = 65e3 + rng.gen_range(-800.0..=800.0);
            let v = 6500.0 + rng.gen_range(-60.0..=60.0);
            assert!(heat_rate(h, v, &p, &env) <= bound);
        }
        let bigger: ConstrainedZonotope =
            Zonotope::from_half_widths(c, &(hw * 2.0)).unwrap().into();
        assert!(max_heat_rate_over_set(&bigger, &p, &env).unwrap() >= bound);
    }

    #[test]
    fn monotone_in_altitude_and_speed() {
        let (p, env) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let h = rng.gen_range(20e3..100e3);
            let v = rng.gen_range(100.0..8000.0);
            let q = heat_rate(h, v, &p, &env);
            assert!(heat_rate(h + 10.0, v, &p, &env) < q);
            assert!(heat_rate(h, v + 1.0, &p, &env) > q);
            let (dh, dv) = heat_rate_gradient(h, v, &p, &env);
            assert!(dh < 0.0 && dv > 0.0);
        }
    }
}
