use raonakra_core::hum::{HumConfig, HumProblem};
use raonakra_core::*;

fn system(n: usize) -> SemiDiscreteSystem {
    build_system(Grid1D::new(n, 1.0).unwrap(), &PhysicalParams::unit(), Variant::ControlledConservative).unwrap()
}

fn problem(sys: &SemiDiscreteSystem, t_final: f64) -> HumProblem<'_> {
    let mut cfg = HumConfig::standard(sys, 0.01);
    cfg.t_final = t_final;
    HumProblem::new(sys, cfg).unwrap()
}

#[test]
fn gramian_is_positive_on_smooth_data() {
    let sys = system(24);
    let hp = problem(&sys, 4.0);
    for seed in 0..6 {
        let b = hp.unit_sample(seed, 5);
        let lb = hp.apply_gramian(&b).unwrap();
        assert!(hp.inner(&lb, &b) > 0.0);
    }
}

#[test]
fn gramian_is_symmetric_on_rough_data() {
    let sys = system(16);
    let hp = problem(&sys, 3.0);
    let (a, b) = (hp.rough_sample(1), hp.rough_sample(2));
    let ab = hp.inner(&hp.apply_gramian(&a).unwrap(), &b);
    let ba = hp.inner(&a, &hp.apply_gramian(&b).unwrap());
    assert!((ab - ba).abs() <= 1e-8 * ab.abs().max(ba.abs()));
}

#[test]
fn quotient_grows_with_horizon() {
    let sys = system(24);
    let short = problem(&sys, 2.0);
    let long = problem(&sys, 5.0);
    for seed in 0..4 {
        let b = short.unit_sample(40 + seed, 6);
        let qs = short.observability_quotient(&b).unwrap();
        let ql = long.observability_quotient(&b).unwrap();
        assert!(ql >= qs, "seed {seed}: {ql} < {qs}");
    }
}

#[test]
fn quotient_is_scale_invariant() {
    let sys = system(16);
    let hp = problem(&sys, 3.0);
    let b = hp.unit_sample(8, 4);
    let q1 = hp.observability_quotient(&b).unwrap();
    let q2 = hp.observability_quotient(&b.scaled(-7.5)).unwrap();
    assert!((q1 - q2).abs() <= 1e-12 * q1);
}

#[test]
fn null_control_is_linear_in_the_data() {
    let sys = system(16);
    let hp = HumProblem::new(&sys, HumConfig::standard(&sys, 0.02)).unwrap();
    let u0 = presets::initial_state(
        &sys,
        &InitialPreset::SingleMode {
            field: Channel::V,
            mode: 1,
            amplitude: 1.0,
        },
    );
    let a = hp.compute_null_control(&u0).unwrap();
    let b = hp.compute_null_control(&u0.scaled(3.0)).unwrap();
    let peak = a.controls.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
    let gap = a
        .controls
        .iter()
        .zip(&b.controls)
        .flat_map(|(x, y)| (0..3).map(move |k| (3.0 * x[k] - y[k]).abs()))
        .fold(0.0, f64::max);
    assert!(gap <= 1e-5 * 3.0 * peak, "{gap} vs {peak}");
    assert!((b.cost / a.cost - 9.0).abs() < 1e-4);
}

#[test]
fn steered_state_lands_near_rest() {
    let sys = system(16);
    let hp = HumProblem::new(&sys, HumConfig::standard(&sys, 0.02)).unwrap();
    let u0 = presets::initial_state(&sys, &InitialPreset::RandomSmooth { seed: 4, cutoff: 2 });
    let sol = hp.compute_null_control(&u0).unwrap();
    let end = hp.forward(&u0, &sol.controls).unwrap();
    assert!(hp.norm(&end) <= 1e-3 * hp.norm(&u0));
    // free evolution keeps the norm
    let free = hp.forward(&u0, &vec![[0.0; 3]; hp.nsteps() + 1]).unwrap();
    assert!((sys.mechanical_energy(&free) / sys.mechanical_energy(&u0) - 1.0).abs() < 1e-9);
}

#[test]
fn delayed_layout_is_refused() {
    let sys = build_system(Grid1D::new(16, 1.0).unwrap(), &PhysicalParams::unit(), Variant::StabilizedDelayed).unwrap();
    let cfg = HumConfig {
        dt: 0.01,
        t_final: 1.0,
        tol: 1e-8,
        max_iter: 10,
        verify_tol: 1e-3,
        tikhonov: 0.0,
        reorthogonalize: true,
    };
    assert!(HumProblem::new(&sys, cfg).is_err());
}
