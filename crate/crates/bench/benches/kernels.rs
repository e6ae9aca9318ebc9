use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reentry_core::dynamics::{hessian_abs_max, EntryState, Environment, VehicleParams};
use reentry_core::mpc::{reference_from_tube, solve_ocp, OcpProblem};
use reentry_core::reach::reach;
use reentry_core::scenario::{parse_scenario, ScenarioConfig};
use reentry_core::setalg::{ConstrainedZonotope, Halfspace, IntervalBox, Zonotope};

fn scenario(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    parse_scenario(&path).expect("bundled scenario parses")
}

fn random_zonotope(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Zonotope {
    let c = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let g = DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
    Zonotope::new(c, g).unwrap()
}

fn set_algebra(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = random_zonotope(&mut rng, 6, 40);
    let b = random_zonotope(&mut rng, 6, 12);
    let m = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
    let cz: ConstrainedZonotope = a.clone().into();
    let h = Halfspace::new(DVector::from_element(6, 1.0), 0.5).unwrap();
    let cut = cz.intersect_halfspace(&h).unwrap();
    let d = DVector::from_fn(6, |i, _| (i as f64 + 1.0).sin());

    c.bench_function("zonotope/minkowski_sum", |bch| {
        bch.iter(|| black_box(&a).minkowski_sum(&b))
    });
    c.bench_function("zonotope/linear_map", |bch| {
        bch.iter(|| black_box(&a).linear_map(&m))
    });
    c.bench_function("zonotope/reduce_order_40_to_20", |bch| {
        bch.iter(|| black_box(&a).reduce_order(20.0 / 6.0))
    });
    c.bench_function("conzono/intersect_halfspace", |bch| {
        bch.iter(|| black_box(&cz).intersect_halfspace(&h))
    });
    c.bench_function("conzono/support_lp", |bch| {
        bch.iter(|| black_box(&cut).support(&d))
    });
    c.bench_function("conzono/interval_hull_lp", |bch| {
        bch.iter(|| black_box(&cut).interval_hull())
    });
}

fn dynamics(c: &mut Criterion) {
    let x = EntryState {
        altitude: 71932.0,
        velocity: 7600.0,
        flight_path_angle: (-0.1f64).to_radians(),
        latitude: 0.0,
        heading: 90f64.to_radians(),
        longitude: 0.0,
    };
    let xv = x.to_vector();
    let lo: Vec<f64> = xv
        .iter()
        .map(|v| v - 1e-3 * v.abs().max(1.0))
        .chain([0.26, -1.05])
        .collect();
    let hi: Vec<f64> = xv
        .iter()
        .map(|v| v + 1e-3 * v.abs().max(1.0))
        .chain([0.52, -0.17])
        .collect();
    let zbox = IntervalBox::new(DVector::from_vec(lo), DVector::from_vec(hi)).unwrap();
    let (p, e) = (VehicleParams::default(), Environment::default());
    c.bench_function("dynamics/hessian_abs_max_velocity_row", |bch| {
        bch.iter(|| hessian_abs_max(1, black_box(&zbox), &p, &e))
    });
}

fn reachability(c: &mut Criterion) {
    let cfg = scenario("heat_reach.json");
    let model = cfg.model().unwrap();
    let x0 = cfg.initial_set().unwrap();
    let mut rc = cfg.reach_config().unwrap();
    rc.horizon = 2.0 * rc.time_step;
    let mut group = c.benchmark_group("reach");
    group.sample_size(10);
    group.bench_function("two_steps_ten_substeps", |bch| {
        bch.iter(|| reach(&model, &x0, &rc, &[]))
    });
    group.finish();
}

fn mpc(c: &mut Criterion) {
    let cfg = scenario("nominal_tracking.json");
    let model = cfg.model().unwrap();
    let mut rc = cfg.reach_config().unwrap();
    rc.horizon = rc.time_step;
    let tube = reach(&model, &cfg.initial_set().unwrap(), &rc, &[]).unwrap();
    let mcfg = cfg.mpc_config().unwrap();
    let bounds = cfg.input_bounds().unwrap();
    let reference = reference_from_tube(&tube, &bounds, mcfg.sampling_time, rc.time_step).unwrap();
    let problem = OcpProblem {
        x0: cfg.initial_set.center.to_vector(),
        state_refs: (0..mcfg.horizon)
            .map(|j| reference.state(j).clone())
            .collect(),
        input_refs: (0..mcfg.horizon)
            .map(|j| reference.input(j).clone())
            .collect(),
        tube: vec![None; mcfg.horizon],
        input_bounds: bounds,
        previous_input: None,
        warm_start: None,
    };
    let mut group = c.benchmark_group("mpc");
    group.sample_size(10);
    group.bench_function("solve_ocp_untubed_n20", |bch| {
        bch.iter(|| solve_ocp(&model, black_box(&problem), &mcfg))
    });
    group.finish();
}

criterion_group!(benches, set_algebra, dynamics, reachability, mpc);
criterion_main!(benches);
