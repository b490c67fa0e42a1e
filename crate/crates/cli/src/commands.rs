use serde_json::json;

use raonakra_core::analysis::{check_exact_balance, check_theoretical_bound, decay_csv};
use raonakra_core::hum::HumProblem;
use raonakra_core::study::{spatial_convergence, temporal_convergence, Scenario};
use raonakra_core::{
    build_system, check_hypotheses, presets, select_mus, simulate, Controls, Dynamics, Grid1D, SemiDiscreteSystem, Variant,
};

use crate::config::{ConvergenceKind, ScenarioConfig, VariantName};
use crate::{CliError, Command, Outcome};

/// Per-step energy rise still counted as monotone, relative to the initial energy.
const MONOTONE_SLACK: f64 = 1e-10;

pub fn dispatch(cmd: Command, cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    match cmd {
        Command::Validate => validate(cfg),
        Command::Simulate => simulate_cmd(cfg),
        Command::DecayReport => decay_report(cfg),
        Command::Hum => hum(cfg),
        Command::Observability => observability(cfg),
        Command::Convergence => convergence(cfg),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("plain data serializes")
}

fn system(cfg: &ScenarioConfig) -> Result<SemiDiscreteSystem, CliError> {
    let params = cfg.physical_params()?;
    let grid = Grid1D::new(cfg.grid.n, params.L).map_err(|e| CliError::Config(e.to_string()))?;
    build_system(grid, &params, cfg.variant.into()).map_err(|e| CliError::Config(e.to_string()))
}

fn require(cfg: &ScenarioConfig, want: VariantName, cmd: &str) -> Result<(), CliError> {
    if cfg.variant != want {
        return Err(CliError::Config(format!("{cmd} needs variant = {want:?}").to_lowercase()));
    }
    Ok(())
}

fn validate(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let params = cfg.physical_params()?;
    let report = check_hypotheses(&params, &cfg.delays(), &cfg.damping_spec(), &cfg.gain_config());
    let failing: Vec<&str> = report.failing().map(|c| c.condition_id.as_str()).collect();
    let summary = if failing.is_empty() {
        format!("all {} conditions hold", report.conditions.len())
    } else {
        format!("failing: {}", failing.join(", "))
    };
    Ok(Outcome {
        pass: failing.is_empty(),
        summary,
        invariants: json!({ "failing": failing }),
        files: vec![("hypotheses.json".into(), to_json(&report))],
    })
}

fn simulate_cmd(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let sys = system(cfg)?;
    let u0 = presets::initial_state(&sys, &cfg.initial_preset());
    let (delays, damping, gains) = (cfg.delays(), cfg.damping_spec(), cfg.gain_config());
    let dynamics = match cfg.variant {
        VariantName::Delayed => Dynamics::Delayed {
            delays: &delays,
            damping: &damping,
            gains: &gains,
            history: cfg.history_preset(),
        },
        VariantName::Controlled => Dynamics::Controlled {
            controls: Controls::Zero,
        },
    };
    let out = simulate(&u0, &sys, &cfg.scheme_config(), dynamics)?;
    let e0 = out.energy[0];
    let e1 = *out.energy.last().expect("initial energy is recorded");
    let rise = out
        .energy
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    let invariants = match cfg.variant {
        VariantName::Controlled => {
            let drift = out
                .energy
                .iter()
                .map(|e| (e - e0).abs() / e0.max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            json!({ "initial_energy": e0, "final_energy": e1, "max_relative_drift": drift })
        }
        VariantName::Delayed => {
            let balance = check_exact_balance(&out)?.into_iter().fold(0.0, f64::max);
            json!({
                "initial_energy": e0,
                "final_energy": e1,
                "max_energy_increase": rise,
                "monotone_energy": rise <= MONOTONE_SLACK * e0,
                "max_balance_residual": balance,
            })
        }
    };
    Ok(Outcome {
        pass: true,
        summary: format!("{} steps, energy {e0:e} -> {e1:e}", out.energy.len() - 1),
        invariants,
        files: vec![("trajectory.csv".into(), out.to_csv())],
    })
}

fn decay_report(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    require(cfg, VariantName::Delayed, "decay-report")?;
    let params = cfg.physical_params()?;
    let (delays, damping, gains) = (cfg.delays(), cfg.damping_spec(), cfg.gain_config());
    let rates = select_mus(&params, &delays, &damping, &gains)
        .map_err(|e| CliError::Criterion(format!("no admissible decay constants: {e}")))?;
    let sys = system(cfg)?;
    let u0 = presets::initial_state(&sys, &cfg.initial_preset());
    let dynamics = Dynamics::Delayed {
        delays: &delays,
        damping: &damping,
        gains: &gains,
        history: cfg.history_preset(),
    };
    let out = simulate(&u0, &sys, &cfg.scheme_config(), dynamics)?;
    let [a, b] = cfg.decay.window;
    let report = check_theoretical_bound(&out, &rates, (a, b))?;
    let pass = report.bound_violations == 0 && report.equivalence_violations == 0;
    let summary = format!(
        "fitted rate {:.4}, bound rate {:.4}, {} bound violations",
        report.fit.omega,
        rates.decay_exponent(),
        report.bound_violations
    );
    Ok(Outcome {
        pass,
        summary,
        invariants: json!({
            "bound_violations": report.bound_violations,
            "equivalence_violations": report.equivalence_violations,
            "fitted_rate": report.fit.omega,
            "theoretical_rate": rates.decay_exponent(),
        }),
        files: vec![
            ("decay_report.json".into(), to_json(&json!({ "rates": rates, "report": report }))),
            ("decay.csv".into(), decay_csv(&out, &rates)?),
        ],
    })
}

fn hum(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    require(cfg, VariantName::Controlled, "hum")?;
    let sys = system(cfg)?;
    let hp = HumProblem::new(&sys, cfg.hum_config(&sys))?;
    let u0 = presets::initial_state(&sys, &cfg.initial_preset());
    let sol = hp.compute_null_control(&u0)?;
    Ok(Outcome {
        pass: sol.terminal_ratio <= hp.cfg.verify_tol,
        summary: format!("{} CG iterations, terminal ratio {:e}", sol.iterations, sol.terminal_ratio),
        invariants: json!({
            "iterations": sol.iterations,
            "terminal_ratio": sol.terminal_ratio,
            "cost": sol.cost,
        }),
        files: vec![
            ("controls.csv".into(), sol.controls_csv()),
            ("hum_solution.json".into(), to_json(&sol)),
        ],
    })
}

fn observability(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    require(cfg, VariantName::Controlled, "observability")?;
    let sys = system(cfg)?;
    let hp = HumProblem::new(&sys, cfg.hum_config(&sys))?;
    let est = hp.estimate_observability(cfg.observability.samples, cfg.observability.seed)?;
    Ok(Outcome {
        pass: est.min_quotient > 0.0 && est.max_quotient.is_finite(),
        summary: format!("quotients in [{:e}, {:e}]", est.min_quotient, est.max_quotient),
        invariants: json!({ "min_quotient": est.min_quotient, "max_quotient": est.max_quotient }),
        files: vec![("observability.json".into(), to_json(&est))],
    })
}

fn convergence(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let params = cfg.physical_params()?;
    let (delays, damping, gains) = (cfg.delays(), cfg.damping_spec(), cfg.gain_config());
    let scenario = match Variant::from(cfg.variant) {
        Variant::ControlledConservative => Scenario::Conservative,
        Variant::StabilizedDelayed => Scenario::Delayed {
            delays: &delays,
            damping: &damping,
            gains: &gains,
            history: cfg.history_preset(),
        },
    };
    let c = &cfg.convergence;
    let preset = cfg.initial_preset();
    let table = match c.kind {
        ConvergenceKind::Spatial => spatial_convergence(
            &params,
            &preset,
            c.filter,
            scenario,
            &c.ns,
            c.n_ref,
            cfg.scheme.dt,
            cfg.scheme.t_final,
        )?,
        ConvergenceKind::Temporal => temporal_convergence(
            &params,
            &preset,
            c.filter,
            scenario,
            cfg.grid.n,
            &c.dts,
            c.dt_ref,
            cfg.scheme.t_final,
        )?,
    };
    let summary = if table.degenerate {
        "reference solution is zero; no order can be read".to_string()
    } else {
        format!("finest observed order {:?}", table.finest_order())
    };
    Ok(Outcome {
        pass: table.monotone || table.degenerate,
        summary,
        invariants: json!({
            "monotone": table.monotone,
            "degenerate": table.degenerate,
            "finest_order": table.finest_order(),
        }),
        files: vec![
            ("convergence.csv".into(), table.to_csv()),
            ("convergence.json".into(), to_json(&table)),
        ],
    })
}
