use gwmc_core::dynamics::{
    advance, run_trajectory, InitialState, ModelParams, RngStream, StepConfig, Trajectory, TrajectoryConfig,
};
use gwmc_core::lattice::build_lattice;
use gwmc_core::observables::{Sample, StructureFactorAccumulator, WaveVector};
use gwmc_core::state::{init_all_plus_x, ProductState, Spinor};

#[test]
fn waiting_times_are_exponential() {
    let g = build_lattice(1, 1).unwrap();
    let p = ModelParams { jx: 0.0, jy: 0.0, jz: 0.0, gamma: 1.0 };
    let step = StepConfig::default();
    let up = ProductState::uniform(1, Spinor::UP);
    let mut rng = RngStream::new(7, 0).rng();
    let events = 10_000;
    let mut waits = Vec::with_capacity(events);
    let mut steps = 0u64;
    while waits.len() < events {
        steps += 1;
        let (_, jumps) = advance(&up, &g, &p, &step, &mut rng).unwrap();
        if !jumps.is_empty() {
            waits.push(steps as f64 * step.dt);
            steps = 0;
        }
    }
    waits.sort_by(f64::total_cmp);
    let n = waits.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &w) in waits.iter().enumerate() {
        let cdf = 1.0 - (-p.gamma * w).exp();
        d = d.max((cdf - i as f64 / n).abs()).max(((i + 1) as f64 / n - cdf).abs());
    }
    // Kolmogorov-Smirnov critical value at the 1% level.
    assert!(d < 1.628 / n.sqrt(), "D = {d}");
    let mean = waits.iter().sum::<f64>() / n;
    assert!((mean - 1.0 / p.gamma).abs() < 0.05, "mean = {mean}");
}

fn sxx(dt: f64, seed: u64) -> (f64, f64) {
    let g = build_lattice(4, 4).unwrap();
    let tc = TrajectoryConfig { t_total: 2000.0, seed, ..TrajectoryConfig::default() };
    let step = StepConfig { dt, ..StepConfig::default() };
    let mut acc = StructureFactorAccumulator::new(&g, WaveVector::ZERO).unwrap();
    run_trajectory(&g, &ModelParams::with_jy(1.2), &tc, &step, 0, &mut |s: &Sample, _| {
        acc.push(s);
    })
    .unwrap();
    let e = acc.estimate().unwrap();
    (e.value, e.standard_error)
}

#[test]
fn steady_state_is_step_size_converged() {
    let (a, sa) = sxx(0.01, 1);
    let (b, sb) = sxx(0.005, 1);
    let se = (sa * sa + sb * sb).sqrt();
    assert!((a - b).abs() < 3.0 * se, "{a} +- {sa} vs {b} +- {sb}");
}

#[test]
fn resumed_trajectory_continues_bit_for_bit() {
    let g = build_lattice(3, 3).unwrap();
    let p = ModelParams::with_jy(1.5);
    let step = StepConfig::default();
    let mut whole = Trajectory::new(&g, p, step, init_all_plus_x(9, false), RngStream::new(3, 1)).unwrap();
    let mut first = whole.clone();
    for _ in 0..500 {
        first.step().unwrap();
    }
    let record = first.checkpoint();
    let mut resumed = Trajectory::resume(&g, p, step, first.state().clone(), &record).unwrap();
    for _ in 0..1000 {
        whole.step().unwrap();
    }
    for _ in 0..500 {
        resumed.step().unwrap();
    }
    assert_eq!(whole.state(), resumed.state());
    assert_eq!(whole.total_jumps(), resumed.total_jumps());
}

#[test]
fn all_down_start_is_rejected() {
    let down = ProductState::uniform(4, Spinor::DOWN);
    assert!(InitialState::Snapshot(down).build(4).is_err());
}

#[test]
fn zero_dissipation_conserves_magnetization_direction_on_isotropic_coupling() {
    let g = build_lattice(4, 4).unwrap();
    let p = ModelParams { jx: 1.0, jy: 1.0, jz: 1.0, gamma: 0.0 };
    let tc = TrajectoryConfig { t_total: 20.0, burn_in: 0.0, ..TrajectoryConfig::default() };
    let mut last = None;
    run_trajectory(&g, &p, &tc, &StepConfig::default(), 0, &mut |s: &Sample, jumps| {
        assert_eq!(jumps, 0);
        last = Some(s.clone());
    })
    .unwrap();
    for b in last.unwrap().bloch {
        assert!((b.x - 1.0).abs() < 1e-10 && b.y.abs() < 1e-10 && b.z.abs() < 1e-10);
    }
}
