//! Observed orders of accuracy under grid and step refinement.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::grid::{build_system, DiscreteState, Grid1D, SemiDiscreteSystem, Variant};
use crate::integrate::{simulate, Controls, Dynamics, HistoryPreset, SchemeConfig};
use crate::model::{Channel, DampingSpec, DelaySpec, GainConfig, PhysicalParams};
use crate::presets::{initial_state, InitialPreset};

/// What is being integrated.
#[derive(Debug, Clone, Copy)]
pub enum Scenario<'a> {
    Conservative,
    Delayed {
        delays: &'a DelaySpec,
        damping: &'a DampingSpec,
        gains: &'a GainConfig,
        history: HistoryPreset,
    },
}

impl<'a> Scenario<'a> {
    pub fn variant(&self) -> Variant {
        match self {
            Scenario::Conservative => Variant::ControlledConservative,
            Scenario::Delayed { .. } => Variant::StabilizedDelayed,
        }
    }

    fn dynamics(&self) -> Dynamics<'a> {
        match *self {
            Scenario::Conservative => Dynamics::Controlled {
                controls: Controls::Zero,
            },
            Scenario::Delayed {
                delays,
                damping,
                gains,
                history,
            } => Dynamics::Delayed {
                delays,
                damping,
                gains,
                history,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Refinement {
    Spatial,
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// `dx` or `dt`.
    pub h: f64,
    pub error: f64,
    /// Order against the previous (coarser) row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub kind: Refinement,
    pub rows: Vec<ConvergenceRow>,
    pub reference_h: f64,
    /// Errors shrink at every refinement.
    pub monotone: bool,
    /// Reference solution is zero, so no order can be read.
    pub degenerate: bool,
}

impl ConvergenceTable {
    fn from_errors(kind: Refinement, hs: &[f64], errs: &[f64], reference_h: f64, degenerate: bool) -> Self {
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(hs.len());
        for k in 0..hs.len() {
            let order = (k > 0 && errs[k] > 0.0 && errs[k - 1] > 0.0)
                .then(|| (errs[k - 1] / errs[k]).ln() / (hs[k - 1] / hs[k]).ln());
            rows.push(ConvergenceRow {
                h: hs[k],
                error: errs[k],
                order,
            });
        }
        let monotone = errs.windows(2).all(|w| w[1] < w[0]);
        Self {
            kind,
            rows,
            reference_h,
            monotone,
            degenerate,
        }
    }

    /// Order between the two finest rows.
    pub fn finest_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order)
    }

    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("h,error,order\n");
        for r in &self.rows {
            let _ = write!(s, "{:e},{:e},", r.h, r.error);
            if let Some(p) = r.order {
                let _ = write!(s, "{:e}", p);
            }
            s.push('\n');
        }
        s
    }
}

/// Keeps the components of `state` along the `k` lowest modes of `(K, M)`.
///
/// Grid interpolants of smooth shapes carry tiny amounts of the stiffest
/// discrete modes, whose phase error does not shrink with `dt` until
/// `omega_max dt` is small; filtering isolates the asymptotic regime.
pub fn project_low_modes(sys: &SemiDiscreteSystem, state: &DiscreteState, k: usize) -> DiscreteState {
    let n = sys.ndof();
    let dense = sys.stiffness.to_dense();
    let s: Vec<f64> = sys.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let a = DMatrix::from_fn(n, n, |i, j| s[i] * dense[i][j] * s[j]);
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let project = |x: &[f64]| {
        let mut out = vec![0.0; n];
        for &m in order.iter().take(k.min(n)) {
            let v = eig.eigenvectors.column(m);
            // M^{1/2} x along the unit vector v, mapped back by M^{-1/2}
            let c: f64 = (0..n).map(|i| v[i] * x[i] / s[i]).sum();
            for i in 0..n {
                out[i] += c * v[i] * s[i];
            }
        }
        out
    };
    DiscreteState {
        q: project(&state.q),
        p: project(&state.p),
        t: state.t,
    }
}

fn run(
    sys: &SemiDiscreteSystem,
    preset: &InitialPreset,
    filter: Option<usize>,
    scenario: Scenario<'_>,
    dt: f64,
    t_final: f64,
) -> Result<DiscreteState, SimError> {
    let mut u0 = initial_state(sys, preset);
    if let Some(k) = filter {
        u0 = project_low_modes(sys, &u0, k);
    }
    let mut cfg = SchemeConfig::new(dt, t_final);
    cfg.stride = usize::MAX;
    let out = simulate(&u0, sys, &cfg, scenario.dynamics())?;
    Ok(out.final_state().clone())
}

/// Discrete `L^2` distance of displacements and velocities at the coarse nodes.
fn coarse_distance(coarse: &SemiDiscreteSystem, a: &DiscreteState, fine: &SemiDiscreteSystem, b: &DiscreteState) -> f64 {
    let ratio = fine.grid.n / coarse.grid.n;
    let mut s = 0.0;
    for ch in Channel::ALL {
        for (j, d) in coarse.layout.field_dofs(ch) {
            let df = fine.layout.dof(ch, j * ratio).expect("nested grids share nodes");
            let w = coarse.l2_weight[d];
            s += w * ((a.q[d] - b.q[df]).powi(2) + (a.p[d] - b.p[df]).powi(2));
        }
    }
    s.sqrt()
}

/// Grid ladder `ns` against a reference on `n_ref` nodes, same `dt` everywhere.
pub fn spatial_convergence(
    params: &PhysicalParams,
    preset: &InitialPreset,
    filter: Option<usize>,
    scenario: Scenario<'_>,
    ns: &[usize],
    n_ref: usize,
    dt: f64,
    t_final: f64,
) -> Result<ConvergenceTable, SimError> {
    if ns.len() < 3 {
        return Err(SimError::Config(format!("need at least 3 resolutions, got {}", ns.len())));
    }
    if ns.iter().any(|&n| n_ref % n != 0) {
        return Err(SimError::Config(format!("reference {n_ref} is not a multiple of every level")));
    }
    let variant = scenario.variant();
    let fine = build_system(Grid1D::new(n_ref, params.L)?, params, variant)?;
    let reference = run(&fine, preset, filter, scenario, dt, t_final)?;
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for &n in ns {
        let sys = build_system(Grid1D::new(n, params.L)?, params, variant)?;
        let st = run(&sys, preset, filter, scenario, dt, t_final)?;
        hs.push(sys.grid.dx);
        errs.push(coarse_distance(&sys, &st, &fine, &reference));
    }
    let degenerate = fine.norm_sq(&reference) == 0.0;
    Ok(ConvergenceTable::from_errors(
        Refinement::Spatial,
        &hs,
        &errs,
        fine.grid.dx,
        degenerate,
    ))
}

/// Step ladder `dts` on a fixed grid against a reference step `dt_ref`.
pub fn temporal_convergence(
    params: &PhysicalParams,
    preset: &InitialPreset,
    filter: Option<usize>,
    scenario: Scenario<'_>,
    n: usize,
    dts: &[f64],
    dt_ref: f64,
    t_final: f64,
) -> Result<ConvergenceTable, SimError> {
    if dts.len() < 3 {
        return Err(SimError::Config(format!("need at least 3 resolutions, got {}", dts.len())));
    }
    let sys = build_system(Grid1D::new(n, params.L)?, params, scenario.variant())?;
    let reference = run(&sys, preset, filter, scenario, dt_ref, t_final)?;
    let mut errs = Vec::new();
    for &dt in dts {
        let st = run(&sys, preset, filter, scenario, dt, t_final)?;
        errs.push(coarse_distance(&sys, &st, &sys, &reference));
    }
    let degenerate = sys.norm_sq(&reference) == 0.0;
    Ok(ConvergenceTable::from_errors(
        Refinement::Temporal,
        dts,
        &errs,
        dt_ref,
        degenerate,
    ))
}
