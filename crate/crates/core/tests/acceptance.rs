//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use raonakra_core::analysis::{
    check_dissipation_identity, check_theoretical_bound, check_trace_estimates, transport_residual,
};
use raonakra_core::hum::{HumConfig, HumProblem};
use raonakra_core::model::{gain_threshold, BoundaryQuadForm};
use raonakra_core::study::{spatial_convergence, temporal_convergence, Scenario};
use raonakra_core::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, secs: u64) -> bool {
    elapsed <= Duration::from_secs(secs)
}

/// Negative definiteness of a symmetric 2x2 form from its eigenvalues.
fn eig_negative(m: &BoundaryQuadForm) -> bool {
    let tr = m.m11 + m.m22;
    let disc = ((m.m11 - m.m22).powi(2) + 4.0 * m.m12 * m.m12).sqrt();
    0.5 * (tr + disc) < 0.0
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut passing = 0;
    let mut phi_ok = true;
    for _ in 0..1000 {
        let mut p = PhysicalParams::unit();
        p.E1h1 = rng.random_range(0.1..5.0);
        p.E3h3 = rng.random_range(0.1..5.0);
        p.EI = rng.random_range(0.1..5.0);
        let d: [f64; 3] = [0, 1, 2].map(|_| rng.random_range(0.0..0.95));
        let delays = DelaySpec {
            channels: d.map(|d| ChannelDelay::sinusoidal(1.0, d / 2.0, 2.0)),
        };
        let gains = GainConfig {
            alpha: [0, 1, 2].map(|_| rng.random_range(0.0..6.0)),
            beta: [0, 1, 2].map(|_| rng.random_range(-3.0..3.0)),
        };
        let report = validate_gains(&p, &gains, &delays).unwrap();
        for ch in Channel::ALL {
            let k = ch.index();
            let c = [p.E1h1, p.E3h3, p.EI][k];
            let dk = delays.channels[k].d;
            // closed-form threshold, written out independently
            let expected = gains.beta[k].abs() / (2.0 * c) * ((c * c + 1.0 - dk) / (1.0 - dk));
            let cond = &report.conditions[k];
            worst = worst.max((cond.rhs - expected).abs() / expected.abs().max(1.0));
            worst = worst.max((gain_threshold(c, gains.beta[k], dk) - expected).abs() / expected.abs().max(1.0));
            if cond.pass != (gains.alpha[k] > expected) {
                worst = f64::INFINITY;
            }
            if cond.pass && gains.beta[k] != 0.0 {
                passing += 1;
                if !eig_negative(&phi_matrix(ch, dk, &p, &gains)) {
                    phi_ok = false;
                }
            }
        }
    }
    let el = start.elapsed();
    outcome(
        worst <= 1e-12 && phi_ok && passing > 0 && within(el, 1),
        format!("max threshold deviation {worst:e}, {passing} passing channels all negative definite: {phi_ok}, {el:?}"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let p = PhysicalParams::unit();
    let sys = build_system(Grid1D::new(64, 1.0).unwrap(), &p, Variant::ControlledConservative).unwrap();
    let u0 = presets::initial_state(&sys, &InitialPreset::RandomSmooth { seed: 2, cutoff: 5 });
    let out = simulate_controlled(&u0, &sys, &SchemeConfig::new(1e-3, 2.0), Controls::Zero).unwrap();
    let e0 = out.energy[0];
    let drift = out.energy.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max);
    let el = start.elapsed();
    outcome(
        drift <= 1e-6 && within(el, 10),
        format!("relative energy drift {drift:e} over {} steps, {el:?}", out.energy.len() - 1),
    )
}

struct DecaySetup {
    params: PhysicalParams,
    delays: DelaySpec,
    damping: DampingSpec,
    gains: GainConfig,
}

fn decay_setup() -> DecaySetup {
    DecaySetup {
        params: PhysicalParams::unit(),
        delays: DelaySpec::uniform(ChannelDelay::sinusoidal(0.5, 0.25, 2.0)),
        damping: DampingSpec::uniform(ChannelDamping::constant(1.0)),
        gains: GainConfig {
            alpha: [1.0; 3],
            beta: [0.5; 3],
        },
    }
}

fn decay_run(s: &DecaySetup, dt: f64) -> SimOutput {
    let sys = build_system(Grid1D::new(64, s.params.L).unwrap(), &s.params, Variant::StabilizedDelayed).unwrap();
    let u0 = presets::initial_state(&sys, &InitialPreset::RandomSmooth { seed: 7, cutoff: 3 });
    simulate_delayed(
        &u0,
        &sys,
        &SchemeConfig::new(dt, 10.0),
        &s.delays,
        &s.damping,
        &s.gains,
        HistoryPreset::Zero,
    )
    .unwrap()
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let s = decay_setup();
    let gains_ok = validate_gains(&s.params, &s.gains, &s.delays).unwrap().all_pass();
    let coarse = decay_run(&s, 0.01);
    let fine = decay_run(&s, 0.005);
    let e0 = coarse.energy[0];
    let rise = |o: &SimOutput| {
        o.energy
            .windows(2)
            .map(|w| (w[1] - w[0]) / e0)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let max_rise = rise(&coarse).max(rise(&fine));
    let r = |o: &SimOutput| check_dissipation_identity(o).unwrap().into_iter().fold(0.0, f64::max);
    let ratio = r(&coarse) / r(&fine);
    let el = start.elapsed();
    outcome(
        gains_ok && max_rise <= 1e-10 && (3.0..=5.0).contains(&ratio) && within(el, 30),
        format!("max per-step rise {max_rise:e} E0, residual ratio {ratio:.3} under dt halving, {el:?}"),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let s = decay_setup();
    let rates = select_mus(&s.params, &s.delays, &s.damping, &s.gains).unwrap();
    let out = decay_run(&s, 0.01);
    let rep = check_theoretical_bound(&out, &rates, (0.2, 0.9)).unwrap();
    let el = start.elapsed();
    outcome(
        rep.bound_violations == 0
            && rep.fit.omega >= 0.95 * rates.decay_exponent()
            && rep.equivalence_violations == 0,
        format!(
            "violations {}, fitted rate {:.4} vs bound rate {:.4}, equivalence failures {}, {el:?}",
            rep.bound_violations,
            rep.fit.omega,
            rates.decay_exponent(),
            rep.equivalence_violations
        ),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    // linear history, linear lookups
    let delays = DelaySpec::uniform(ChannelDelay::sinusoidal(0.5, 0.2, 1.5));
    let f = |s: f64| 0.3 - 1.7 * s;
    let mut h = delay::TraceHistory::init(Channel::V, f, delays.get(Channel::V).tau(0.0), 1.0, Interp::Linear).unwrap();
    let dt = 0.01;
    for n in 0..=300 {
        let t = n as f64 * dt;
        h.push(t, f(t), -1.7).unwrap();
    }
    let mut lin_err: f64 = 0.0;
    for k in 0..500 {
        let t = 0.004 * k as f64 + 0.0013;
        if delays.get(Channel::V).theta(t) < h.earliest() {
            continue;
        }
        let z = h.eval_delayed(t, &delays).unwrap();
        lin_err = lin_err.max((z - f(delays.get(Channel::V).theta(t))).abs());
    }
    // transport residual of a smooth history under refinement
    let delay = ChannelDelay::sinusoidal(0.6, 0.2, 2.0);
    let residual = |step: f64| {
        let g = |s: f64| (3.0 * s).sin();
        let mut h = delay::TraceHistory::init(Channel::U, g, delay.tau(0.0), 2.0, Interp::CubicHermite).unwrap();
        let n = (1.6 / step).round() as usize;
        for k in 0..=n {
            let t = k as f64 * step;
            h.push(t, g(t), 3.0 * (3.0 * t).cos()).unwrap();
        }
        transport_residual(&h, &delay, 1.5, (0.25 / step).round() as usize, step).unwrap()
    };
    let (r1, r2) = (residual(0.02), residual(0.01));
    let order = (r1 / r2).log2();
    let el = start.elapsed();
    outcome(
        lin_err <= 1e-14 && (1.7..=2.3).contains(&order),
        format!("linear lookup error {lin_err:e}, transport residual {r1:e} -> {r2:e} (order {order:.3}), {el:?}"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let p = PhysicalParams::unit();
    let sys = build_system(Grid1D::new(32, 1.0).unwrap(), &p, Variant::StabilizedDelayed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut min_trace = f64::INFINITY;
    let mut min_initial = f64::INFINITY;
    let mut runs = 0;
    let mut draws = 0;
    while runs < 20 && draws < 10_000 {
        draws += 1;
        let d: f64 = rng.random_range(0.0..0.35);
        let mean = rng.random_range(0.3..0.8);
        let freq = 2.0;
        let delays = DelaySpec::uniform(ChannelDelay::sinusoidal(mean, (d / freq).min(0.5 * mean), freq));
        // |beta| (1 - d) > 1 and a generous alpha keep most draws in the strong set
        let beta = [0, 1, 2].map(|_| rng.random_range(1.6..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 });
        let gains = GainConfig {
            alpha: beta.map(|b: f64| b.abs() + rng.random_range(2.0..6.0)),
            beta,
        };
        // unit trace constant needs the boundary form below -1
        let strong = Channel::ALL.iter().all(|&c| {
            let m = phi_matrix(c, delays.get(c).d, &p, &gains);
            let tr = m.m11 + m.m22;
            let disc = ((m.m11 - m.m22).powi(2) + 4.0 * m.m12 * m.m12).sqrt();
            0.5 * (tr + disc) <= -1.0
        });
        if !strong {
            continue;
        }
        let damping = DampingSpec::uniform(ChannelDamping::constant(rng.random_range(0.1..2.0)));
        let u0 = presets::initial_state(
            &sys,
            &InitialPreset::RandomSmooth {
                seed: rng.random(),
                cutoff: 4,
            },
        );
        let out = simulate_delayed(
            &u0,
            &sys,
            &SchemeConfig::new(0.01, 3.0),
            &delays,
            &damping,
            &gains,
            HistoryPreset::MatchInitialTrace,
        )
        .unwrap();
        let rep = check_trace_estimates(&out, &p, &gains, &damping).unwrap();
        min_trace = min_trace.min(rep.trace_slack() / rep.trace_rhs);
        min_initial = min_initial.min(rep.initial_slack() / rep.initial_rhs);
        runs += 1;
    }
    let el = start.elapsed();
    outcome(
        runs == 20 && min_trace > 0.0 && min_initial > 0.0,
        format!("smallest relative slack: trace {min_trace:.4}, initial energy {min_initial:.4} over {runs} runs, {el:?}"),
    )
}

fn hum_problem(sys: &SemiDiscreteSystem, t_final: f64) -> HumProblem<'_> {
    let mut cfg = HumConfig::standard(sys, 0.01);
    cfg.t_final = t_final;
    HumProblem::new(sys, cfg).unwrap()
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let p = PhysicalParams::unit();
    let sys = build_system(Grid1D::new(32, 1.0).unwrap(), &p, Variant::ControlledConservative).unwrap();
    let hp = hum_problem(&sys, 4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst: f64 = 0.0;
    for k in 0..20u64 {
        let u0 = hp.unit_sample(1000 + k, 5);
        let wt = hp.unit_sample(2000 + k, 5);
        let amp: [[f64; 3]; 3] = [0, 1, 2].map(|_| [0, 1, 2].map(|_| rng.random_range(-1.0..1.0)));
        let controls: Vec<[f64; 3]> = (0..=hp.nsteps())
            .map(|n| {
                let t = n as f64 * 0.01;
                [0, 1, 2].map(|i| amp[i][0] + amp[i][1] * (1.3 * t).sin() + amp[i][2] * (0.7 * t).cos())
            })
            .collect();
        let (lhs, rhs) = hp.duality_sides(&u0, &wt, &controls).unwrap();
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300));
    }
    let el = start.elapsed();
    outcome(
        worst <= 1e-6 && within(el, 20),
        format!("max relative duality mismatch {worst:e} over 20 triples, {el:?}"),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let p = PhysicalParams::unit();
    let coarse = build_system(Grid1D::new(32, 1.0).unwrap(), &p, Variant::ControlledConservative).unwrap();
    let fine = build_system(Grid1D::new(64, 1.0).unwrap(), &p, Variant::ControlledConservative).unwrap();
    let t_final = 8.0 / p.c_min();
    let hc = hum_problem(&coarse, t_final);
    let hf = hum_problem(&fine, t_final);
    let mut asym: f64 = 0.0;
    let mut ident: f64 = 0.0;
    for k in 0..5u64 {
        let a = hc.unit_sample(10 + k, 6);
        let b = hc.unit_sample(20 + k, 6);
        let la = hc.apply_gramian(&a).unwrap();
        let lb = hc.apply_gramian(&b).unwrap();
        asym = asym.max((hc.inner(&la, &b) - hc.inner(&a, &lb)).abs());
        let obs = hc.solve_adjoint(&a).unwrap().observation.norm_sq();
        ident = ident.max((hc.inner(&la, &a) - obs).abs() / obs);
    }
    let ec = hc.estimate_observability(20, 5).unwrap();
    let ef = hf.estimate_observability(20, 5).unwrap();
    let drift_min = (ef.min_quotient / ec.min_quotient - 1.0).abs();
    let drift_max = (ef.max_quotient / ec.max_quotient - 1.0).abs();
    let el = start.elapsed();
    outcome(
        asym <= 1e-8
            && ident <= 1e-8
            && ec.min_quotient > 0.0
            && ec.max_quotient.is_finite()
            && drift_min <= 0.2
            && drift_max <= 0.2,
        format!(
            "asymmetry {asym:e}, pairing vs observation {ident:e}, quotients [{:.4}, {:.4}] at N=32 and [{:.4}, {:.4}] at N=64, {el:?}",
            ec.min_quotient, ec.max_quotient, ef.min_quotient, ef.max_quotient
        ),
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let p = PhysicalParams::unit();
    let sys = build_system(Grid1D::new(32, 1.0).unwrap(), &p, Variant::ControlledConservative).unwrap();
    let hp = HumProblem::new(&sys, HumConfig::standard(&sys, 0.01)).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for field in Channel::ALL {
        let u0 = presets::initial_state(
            &sys,
            &InitialPreset::SingleMode {
                field,
                mode: 1,
                amplitude: 1.0,
            },
        );
        match hp.compute_null_control(&u0) {
            Ok(s) => {
                ok &= s.terminal_ratio <= 1e-3 && s.iterations <= 200;
                parts.push(format!("{field:?} mode: {} iterations, terminal {:.2e}", s.iterations, s.terminal_ratio));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{field:?} mode: {e}"));
            }
        }
    }
    let el = start.elapsed();
    outcome(ok && within(el, 120), format!("{}; {el:?}", parts.join("; ")))
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let p = PhysicalParams::unit();
    let pre = InitialPreset::RandomSmooth { seed: 7, cutoff: 3 };
    let s = spatial_convergence(&p, &pre, None, Scenario::Conservative, &[16, 32, 64], 256, 1e-3, 0.5).unwrap();
    let t = temporal_convergence(&p, &pre, Some(8), Scenario::Conservative, 32, &[0.02, 0.01, 0.005], 0.000625, 1.0)
        .unwrap();
    let orders = |tab: &study::ConvergenceTable| tab.rows.iter().filter_map(|r| r.order).collect::<Vec<_>>();
    let (so, to) = (orders(&s), orders(&t));
    let ok = so.iter().chain(&to).all(|o| (1.7..=2.3).contains(o)) && so.len() == 2 && to.len() == 2;
    let el = start.elapsed();
    outcome(
        ok && within(el, 120),
        format!("spatial orders {so:.3?}, temporal orders {to:.3?}, {el:?}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("hypothesis suite", criterion_1),
        ("conservation", criterion_2),
        ("monotone decay", criterion_3),
        ("theoretical decay bound", criterion_4),
        ("delay fidelity", criterion_5),
        ("trace estimates", criterion_6),
        ("duality identity", criterion_7),
        ("gramian structure", criterion_8),
        ("null control", criterion_9),
        ("convergence orders", criterion_10),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failures += 1;
        }
        println!("{tag} criterion {} ({name}): {}", k + 1, o.detail);
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
