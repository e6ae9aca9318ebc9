use nalgebra::{DMatrix, DVector, Matrix6, Matrix6x2};

use crate::dynamics::field::VectorField;
use crate::dynamics::vehicle::{entry_rates, ControlInput, EntryState, Environment, VehicleParams};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::scalar::Scalar;
use crate::setalg::IntervalBox;

/// Evaluations closer than this to `cos θ = 0` or `cos γ = 0` are rejected.
pub const MIN_COS: f64 = 1e-6;
/// Evaluations below this speed (m/s) are rejected.
pub const MIN_SPEED: f64 = 1.0;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EntryModel {
    pub vehicle: VehicleParams,
    pub env: Environment,
}

impl EntryModel {
    pub fn new(vehicle: VehicleParams, env: Environment) -> Result<Self> {
        vehicle.validate()?;
        env.validate()?;
        Ok(EntryModel { vehicle, env })
    }
}

fn cos_clear(c: Interval) -> bool {
    c.lo >= MIN_COS || c.hi <= -MIN_COS
}

impl VectorField for EntryModel {
    fn state_dim(&self) -> usize {
        EntryState::DIM
    }

    fn input_dim(&self) -> usize {
        ControlInput::DIM
    }

    fn eval<S: Scalar>(&self, x: &[S], u: &[S]) -> Vec<S> {
        entry_rates(x, u, &self.vehicle, &self.env).to_vec()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        let iv: Vec<Interval> = x.iter().map(|&v| Interval::point(v)).collect();
        self.check_box(&iv)
    }

    fn check_box(&self, x: &[Interval]) -> Result<()> {
        if x.iter().any(|i| !i.is_finite()) {
            return Err(Error::NonFinite("entry state"));
        }
        if x[0].lo + self.env.planet_radius <= 0.0 {
            return Err(Error::Singularity("nonpositive geocentric radius".into()));
        }
        if x[1].lo < MIN_SPEED {
            return Err(Error::Singularity(format!(
                "speed {} m/s below {MIN_SPEED} m/s",
                x[1].lo
            )));
        }
        if !cos_clear(x[2].cos()) {
            return Err(Error::Singularity("flight-path angle near ±90°".into()));
        }
        if !cos_clear(x[3].cos()) {
            return Err(Error::Singularity("latitude near ±90°".into()));
        }
        Ok(())
    }
}

/// State rates at a point.
pub fn eom(
    x: &EntryState,
    u: &ControlInput,
    params: &VehicleParams,
    env: &Environment,
) -> Result<EntryState> {
    let model = EntryModel::new(*params, *env)?;
    let xv = DVector::from_column_slice(x.to_vector().as_slice());
    let uv = DVector::from_column_slice(u.to_vector().as_slice());
    let r = model.rates(&xv, &uv)?;
    Ok(EntryState::from_vector(&r.fixed_rows::<6>(0).into_owned()))
}

/// `(∂ẋ/∂x, ∂ẋ/∂u)` at a point.
pub fn jacobian(
    x: &EntryState,
    u: &ControlInput,
    params: &VehicleParams,
    env: &Environment,
) -> Result<(Matrix6<f64>, Matrix6x2<f64>)> {
    let model = EntryModel::new(*params, *env)?;
    let xv = DVector::from_column_slice(x.to_vector().as_slice());
    let uv = DVector::from_column_slice(u.to_vector().as_slice());
    let (a, b) = model.jacobians(&xv, &uv)?;
    Ok((
        a.fixed_view::<6, 6>(0, 0).into_owned(),
        b.fixed_view::<6, 2>(0, 0).into_owned(),
    ))
}

/// Entry-wise bound on `|∇²ẋᵢ|` over an 8-dimensional `(x, u)` box.
pub fn hessian_abs_max(
    i: usize,
    zbox: &IntervalBox,
    params: &VehicleParams,
    env: &Environment,
) -> Result<DMatrix<f64>> {
    if i >= EntryState::DIM {
        return Err(Error::InvalidAxis {
            axis: i,
            dim: EntryState::DIM,
        });
    }
    let model = EntryModel::new(*params, *env)?;
    Ok(model.hessian_bounds(zbox)?.swap_remove(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    /// Plain transcription with `tan`, kept separate from `entry_rates`.
    fn reference_rates(x: &[f64; 6], u: &[f64; 2]) -> [f64; 6] {
        let [h, v, gam, th, psi, _] = *x;
        let [alpha, beta] = *u;
        let (m, s) = (340.0, 0.30);
        let rho = 1.225 * (-h / 7500.0).exp();
        let r = 6378e3 + h;
        let g = 3.986e14 / (r * r);
        let ad = alpha * 180.0 / std::f64::consts::PI;
        let cl = -0.20704 + 0.029244 * ad;
        let cd = 0.07854 - 0.61592e-2 * ad + 0.621408e-3 * ad * ad;
        let l = 0.5 * cl * s * rho * v * v;
        let d = 0.5 * cd * s * rho * v * v;
        [
            v * gam.sin(),
            -d / m - g * gam.sin(),
            l * beta.cos() / (m * v) + (v / r - g / v) * gam.cos(),
            v * gam.cos() * psi.sin() / r,
            l * beta.sin() / (m * v * gam.cos()) - v / r * gam.cos() * psi.cos() * th.tan(),
            v * gam.cos() * psi.cos() / (r * th.cos()),
        ]
    }

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn random_point(rng: &mut ChaCha8Rng) -> ([f64; 6], [f64; 2]) {
        (
            [
                rng.gen_range(20e3..100e3),
                rng.gen_range(2000.0..8000.0),
                rng.gen_range(-0.3..0.1),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..3.0),
                rng.gen_range(-3.0..3.0),
            ],
            [rng.gen_range(0.2..0.6), rng.gen_range(-1.2..0.0)],
        )
    }

    #[test]
    fn matches_independent_transcription() {
        let x = [80000.0, 7800.0, (-0.1f64).to_radians(), 0.0, FRAC_PI_2, 0.0];
        let u = [22.5f64.to_radians(), (-60f64).to_radians()];
        let got = EntryModel::default().rates(&dv(&x), &dv(&u)).unwrap();
        let want = reference_rates(&x, &u);
        for i in 0..6 {
            let scale = want[i].abs().max(1e-300);
            assert!(
                (got[i] - want[i]).abs() <= 1e-10 * scale,
                "rate {i}: {} vs {}",
                got[i],
                want[i]
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (x, u) = random_point(&mut rng);
            let got = EntryModel::default().rates(&dv(&x), &dv(&u)).unwrap();
            let want = reference_rates(&x, &u);
            for i in 0..6 {
                assert!((got[i] - want[i]).abs() <= 1e-10 * want[i].abs().max(1e-12));
            }
        }
    }

    #[test]
    fn flight_path_limits() {
        let p = VehicleParams::default();
        let env = Environment::default();
        let u = ControlInput::from_degrees(20.0, -30.0);
        let mut x = EntryState {
            altitude: 60e3,
            velocity: 6000.0,
            flight_path_angle: 0.0,
            latitude: 0.2,
            heading: 1.0,
            longitude: 0.3,
        };
        assert_eq!(eom(&x, &u, &p, &env).unwrap().altitude, 0.0);

        // γ = −π/2 sits on the cos γ guard; nudge inside it.
        x.flight_path_angle = -FRAC_PI_2 + 1e-5;
        let r = eom(&x, &u, &p, &env).unwrap();
        assert!((r.altitude + 6000.0).abs() < 1e-3);
        let (_, d) = crate::dynamics::aero_forces(60e3, 6000.0, u.angle_of_attack, &p, &env);
        let g = crate::dynamics::gravity(60e3, &env).unwrap();
        assert!((r.velocity - (-d / p.mass + g)).abs() < 1e-6);
    }

    #[test]
    fn free_fall_without_aerodynamics() {
        let p = VehicleParams {
            a0: 0.0,
            a1: 0.0,
            b0: 0.0,
            b1: 0.0,
            b2: 0.0,
            ..Default::default()
        };
        let env = Environment::default();
        let x = dv(&[40e3, 3000.0, -FRAC_PI_2 + 1e-4, 0.1, 0.5, 0.0]);
        let r = EntryModel::new(p, env)
            .unwrap()
            .rates(&x, &dv(&[0.3, 0.2]))
            .unwrap();
        let g = crate::dynamics::gravity(40e3, &env).unwrap();
        assert!((r[1] - g * (1e-4f64).cos()).abs() < 1e-12);
        let exact = dv(&[40e3, 3000.0, -FRAC_PI_2, 0.1, 0.5, 0.0]);
        let r = EntryModel::new(p, env)
            .unwrap()
            .eval(exact.as_slice(), &[0.3, 0.2]);
        assert_eq!(r[1], g);
    }

    #[test]
    fn singular_points_rejected() {
        let m = EntryModel::default();
        let u = dv(&[0.3, -0.5]);
        assert!(m.rates(&dv(&[50e3, 0.5, 0.0, 0.0, 0.0, 0.0]), &u).is_err());
        assert!(m
            .rates(&dv(&[50e3, 5000.0, 0.0, FRAC_PI_2, 0.0, 0.0]), &u)
            .is_err());
        assert!(m
            .rates(&dv(&[50e3, 5000.0, FRAC_PI_2, 0.0, 0.0, 0.0]), &u)
            .is_err());
        assert!(m
            .rates(&dv(&[-7e6, 5000.0, 0.0, 0.0, 0.0, 0.0]), &u)
            .is_err());
    }

    #[test]
    fn exact_partials() {
        let x = EntryState {
            altitude: 70e3,
            velocity: 7000.0,
            flight_path_angle: -0.05,
            latitude: 0.1,
            heading: 1.5,
            longitude: 0.0,
        };
        let (a, _) = jacobian(
            &x,
            &ControlInput::from_degrees(20.0, -40.0),
            &Default::default(),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(a[(0, 1)], (-0.05f64).sin());
        assert_eq!(a[(0, 0)], 0.0);
        for i in 0..6 {
            assert_eq!(a[(i, 5)], 0.0);
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let m = EntryModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (x, u) = random_point(&mut rng);
            let z: Vec<f64> = x.iter().chain(u.iter()).copied().collect();
            let (a, b) = m.jacobians(&dv(&x), &dv(&u)).unwrap();
            let jac =
                nalgebra::DMatrix::from_fn(
                    6,
                    8,
                    |i, j| if j < 6 { a[(i, j)] } else { b[(i, j - 6)] },
                );
            for j in 0..8 {
                let step = 1e-6 * z[j].abs().max(1.0);
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[j] += step;
                zm[j] -= step;
                let fp = m.eval(&zp[..6], &zp[6..]);
                let fm = m.eval(&zm[..6], &zm[6..]);
                for i in 0..6 {
                    let fd = (fp[i] - fm[i]) / (2.0 * step);
                    let scale = jac.row(i).amax().max(1e-12);
                    assert!(
                        (fd - jac[(i, j)]).abs() <= 1e-5 * scale,
                        "∂{i}/∂{j}: fd {fd} vs {}",
                        jac[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn hessian_bound_for_altitude_rate() {
        let lo = [60e3, 6000.0, -0.1, 0.0, 1.5, 0.0, 0.3, -0.5];
        let hi = [61e3, 6100.0, 0.1, 0.01, 1.6, 0.01, 0.4, -0.4];
        let zbox = IntervalBox::new(dv(&lo), dv(&hi)).unwrap();
        let h = hessian_abs_max(0, &zbox, &Default::default(), &Default::default()).unwrap();
        assert!(h[(1, 2)] >= 1.0 && h[(1, 2)] <= 1.0 + 1e-12);
        assert_eq!(h[(1, 1)], 0.0);
        assert_eq!(h[(0, 0)], 0.0);
    }

    struct Linear;

    impl VectorField for Linear {
        fn state_dim(&self) -> usize {
            2
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, x: &[S], u: &[S]) -> Vec<S> {
            vec![
                x[1].scale(2.0) - x[0].clone(),
                u[0].scale(-3.0) + S::cst(1.0),
            ]
        }
    }

    #[test]
    fn linear_field_has_zero_hessian_bound() {
        let zbox = IntervalBox::new(dv(&[-5.0, -5.0, -5.0]), dv(&[5.0, 5.0, 5.0])).unwrap();
        for h in Linear.hessian_bounds(&zbox).unwrap() {
            assert_eq!(h, nalgebra::DMatrix::zeros(3, 3));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn hessian_bound_dominates_samples(
            seed in any::<u64>(),
            h0 in 20e3..90e3f64, v0 in 2500.0..7800.0f64,
            g0 in -0.3..0.05f64, th0 in -0.8..0.8f64, psi0 in 0.0..3.0f64,
            a0 in 0.26..0.5f64, b0 in -1.1..-0.1f64,
        ) {
            let lo = [h0, v0, g0, th0, psi0, 0.0, a0, b0];
            let w = [2000.0, 150.0, 0.03, 0.05, 0.1, 0.05, 0.05, 0.1];
            let hi: Vec<f64> = lo.iter().zip(w).map(|(l, w)| l + w).collect();
            let zbox = IntervalBox::new(dv(&lo), dv(&hi)).unwrap();
            let m = EntryModel::default();
            let bounds = m.hessian_bounds(&zbox).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..100 {
                let z: Vec<f64> = (0..8).map(|k| rng.gen_range(lo[k]..=hi[k])).collect();
                let hs = m.point_hessians(&dv(&z[..6]), &dv(&z[6..])).unwrap();
                for (b, h) in bounds.iter().zip(&hs) {
                    for r in 0..8 {
                        for c in 0..8 {
                            prop_assert!(h[(r, c)].abs() <= b[(r, c)] * (1.0 + 1e-12) + 1e-300);
                        }
                    }
                }
            }
        }

        #[test]
        fn rates_ignore_longitude(phi in -3.0..3.0f64, other in -3.0..3.0f64) {
            let m = EntryModel::default();
            let u = dv(&[0.4, -0.9]);
            let a = m.rates(&dv(&[65e3, 6500.0, -0.02, 0.3, 1.2, phi]), &u).unwrap();
            let b = m.rates(&dv(&[65e3, 6500.0, -0.02, 0.3, 1.2, other]), &u).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn density_and_gravity_decrease(h in -1e5..2e5f64, dh in 1.0..1e4f64) {
            let env = Environment::default();
            let (d0, d1) = (crate::dynamics::density(h, &env), crate::dynamics::density(h + dh, &env));
            prop_assert!(d0 > d1 && d1 > 0.0);
            let (g0, g1) = (crate::dynamics::gravity(h, &env).unwrap(), crate::dynamics::gravity(h + dh, &env).unwrap());
            prop_assert!(g0 > g1 && g1 > 0.0);
        }
    }
}
