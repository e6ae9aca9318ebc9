use std::f64::consts::PI;

use nalgebra::{Vector2, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `[h, v, γ, θ, ψ, φ]`: altitude (m), speed (m/s), flight-path angle,
/// latitude, heading, longitude (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryState {
    pub altitude: f64,
    pub velocity: f64,
    pub flight_path_angle: f64,
    pub latitude: f64,
    pub heading: f64,
    pub longitude: f64,
}

impl EntryState {
    pub const DIM: usize = 6;

    pub fn from_vector(x: &Vector6<f64>) -> Self {
        EntryState {
            altitude: x[0],
            velocity: x[1],
            flight_path_angle: x[2],
            latitude: x[3],
            heading: x[4],
            longitude: x[5],
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.altitude,
            self.velocity,
            self.flight_path_angle,
            self.latitude,
            self.heading,
            self.longitude,
        )
    }
}

/// Angle of attack α and bank angle β, both in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub angle_of_attack: f64,
    pub bank_angle: f64,
}

impl ControlInput {
    pub const DIM: usize = 2;

    pub fn from_degrees(alpha_deg: f64, beta_deg: f64) -> Self {
        ControlInput {
            angle_of_attack: alpha_deg.to_radians(),
            bank_angle: beta_deg.to_radians(),
        }
    }

    pub fn from_vector(u: &Vector2<f64>) -> Self {
        ControlInput {
            angle_of_attack: u[0],
            bank_angle: u[1],
        }
    }

    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.angle_of_attack, self.bank_angle)
    }
}

/// Mass, reference area and the aerodynamic coefficient polynomials.
///
/// The polynomials take the angle of attack in degrees:
/// `C_L = a0 + a1·α°`, `C_D = b0 + b1·α° + b2·α°²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    pub mass: f64,
    pub reference_area: f64,
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            mass: 340.0,
            reference_area: 0.30,
            a0: -0.20704,
            a1: 0.029244,
            b0: 0.07854,
            b1: -0.61592e-2,
            b2: 0.621408e-3,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::InvalidArgument(
                "vehicle mass must be positive".into(),
            ));
        }
        if !(self.reference_area > 0.0) {
            return Err(Error::InvalidArgument(
                "reference area must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn lift_coefficient<S: Scalar>(&self, alpha: &S) -> S {
        let deg = alpha.scale(180.0 / PI);
        S::cst(self.a0) + deg.scale(self.a1)
    }

    pub fn drag_coefficient<S: Scalar>(&self, alpha: &S) -> S {
        let deg = alpha.scale(180.0 / PI);
        S::cst(self.b0) + deg.scale(self.b1) + deg.sqr().scale(self.b2)
    }
}

/// Exponential atmosphere and inverse-square gravity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Environment {
    pub sea_level_density: f64,
    pub scale_height: f64,
    pub gravitational_parameter: f64,
    pub planet_radius: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Environment {
            sea_level_density: 1.225,
            scale_height: 7500.0,
            gravitational_parameter: 3.986e14,
            planet_radius: 6378.0e3,
        }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sea_level_density > 0.0
            && self.scale_height > 0.0
            && self.gravitational_parameter > 0.0
            && self.planet_radius > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "environment constants must be positive".into(),
            ))
        }
    }

    pub fn density_of<S: Scalar>(&self, h: &S) -> S {
        h.scale(-1.0 / self.scale_height)
            .exp()
            .scale(self.sea_level_density)
    }

    pub fn gravity_of<S: Scalar>(&self, h: &S) -> S {
        let r = h.clone() + S::cst(self.planet_radius);
        r.sqr().recip().scale(self.gravitational_parameter)
    }
}

/// `ρ₀·exp(−h/h_r)` in kg/m³.
pub fn density(h: f64, env: &Environment) -> f64 {
    env.density_of(&h)
}

/// `G/(Rₑ + h)²` in m/s².
pub fn gravity(h: f64, env: &Environment) -> Result<f64> {
    if !(env.planet_radius + h > 0.0) {
        return Err(Error::Singularity(format!(
            "nonpositive geocentric radius at altitude {h} m"
        )));
    }
    Ok(env.gravity_of(&h))
}

/// Lift and drag in newtons.
pub fn aero_forces(
    h: f64,
    v: f64,
    alpha: f64,
    params: &VehicleParams,
    env: &Environment,
) -> (f64, f64) {
    let q = 0.5 * params.reference_area * density(h, env) * v * v;
    (
        params.lift_coefficient(&alpha) * q,
        params.drag_coefficient(&alpha) * q,
    )
}

/// The six state rates in `[h, v, γ, θ, ψ, φ]` order.
pub fn entry_rates<S: Scalar>(
    x: &[S],
    u: &[S],
    params: &VehicleParams,
    env: &Environment,
) -> [S; 6] {
    let (h, v, gam, th, psi) = (&x[0], &x[1], &x[2], &x[3], &x[4]);
    let (alpha, beta) = (&u[0], &u[1]);
    let rho = env.density_of(h);
    let g = env.gravity_of(h);
    let r = h.clone() + S::cst(env.planet_radius);
    let inv_r = r.recip();
    let inv_v = v.recip();
    let q = rho * v.sqr().scale(0.5 * params.reference_area);
    let lift = params.lift_coefficient(alpha) * q.clone();
    let drag = params.drag_coefficient(alpha) * q;
    let (sg, cg) = (gam.sin(), gam.cos());
    let (sth, cth) = (th.sin(), th.cos());
    let (spsi, cpsi) = (psi.sin(), psi.cos());
    let lift_per_mv = lift.scale(1.0 / params.mass) * inv_v.clone();
    let v_over_r = v.clone() * inv_r;

    let h_dot = v.clone() * sg.clone();
    let v_dot = -drag.scale(1.0 / params.mass) - g.clone() * sg;
    let gam_dot = lift_per_mv.clone() * beta.cos() + cg.clone() * (v_over_r.clone() - g * inv_v);
    let th_dot = v_over_r.clone() * cg.clone() * spsi;
    let psi_dot = lift_per_mv * beta.sin() * cg.recip()
        - v_over_r.clone() * cg.clone() * cpsi.clone() * sth * cth.recip();
    let phi_dot = v_over_r * cg * cpsi * cth.recip();
    [h_dot, v_dot, gam_dot, th_dot, psi_dot, phi_dot]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_values() {
        let env = Environment::default();
        assert_eq!(density(0.0, &env), 1.225);
        assert!((density(7500.0, &env) - 1.225 * (-1.0f64).exp()).abs() < 1e-15);
        // 1.225·exp(−80000/7500), evaluated independently.
        assert!((density(80000.0, &env) - 2.8563e-5).abs() < 1e-8);
    }

    #[test]
    fn gravity_values() {
        let env = Environment::default();
        let g0 = gravity(0.0, &env).unwrap();
        assert!((g0 - 3.986e14 / 6.378e6f64.powi(2)).abs() < 1e-12);
        assert!((g0 - 9.7988).abs() < 1e-3);
        let g_re = gravity(env.planet_radius, &env).unwrap();
        assert!((g_re - g0 / 4.0).abs() < 1e-14);
        assert!((gravity(80000.0, &env).unwrap() - 9.5578).abs() < 1e-3);
        assert!(gravity(-7e6, &env).is_err());
    }

    #[test]
    fn coefficients_in_degrees() {
        let p = VehicleParams::default();
        let a = 15f64.to_radians();
        assert!((p.lift_coefficient(&a) - 0.23162).abs() < 1e-5);
        assert!((p.drag_coefficient(&a) - 0.1259688).abs() < 1e-7);
        let (l, d) = aero_forces(50_000.0, 0.0, a, &p, &Environment::default());
        assert_eq!((l, d), (0.0, 0.0));
    }
}
