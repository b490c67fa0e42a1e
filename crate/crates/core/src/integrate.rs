//! Average-acceleration time stepping for both variants.
//!
//! The step is written in velocity form,
//! `(M + dt/2 C + dt^2/4 K) v1 = M v0 - dt/2 C v0 - K (dt q0 + dt^2/4 v0) + dt F`,
//! `q1 = q0 + dt/2 (v0 + v1)`, with `C` frozen at the step midpoint and `F`
//! the mean of the end-point forces. For this scheme the change in
//! `1/2 (v^T M v + q^T K q)` over a step equals `dt (-vm^T C vm + vm^T F)` with
//! `vm = (v0 + v1)/2`, exactly.

use serde::{Deserialize, Serialize};

use crate::delay::{init_histories, Histories, Interp};
use crate::error::SimError;
use crate::grid::{apply_functional, discrete_energy, DiscreteState, SemiDiscreteSystem, Variant};
use crate::linalg::{BandCholesky, SymBand};
use crate::model::{phi_matrix, Channel, DampingSpec, DelaySpec, GainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Keep every `stride`-th state (the last one is always kept).
    pub stride: usize,
    pub interp: Interp,
    pub enforce_delay_safety: bool,
}

impl SchemeConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            stride: 1,
            interp: Interp::StepMean,
            enforce_delay_safety: true,
        }
    }

    pub fn steps(&self) -> Result<usize, SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_final >= 0.0) {
            return Err(SimError::Config(format!("T = {} must be nonnegative", self.t_final)));
        }
        if self.stride == 0 {
            return Err(SimError::Config("stride must be at least 1".into()));
        }
        let n = (self.t_final / self.dt).round();
        if (n * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(self.dt) {
            return Err(SimError::Config(format!(
                "T = {} is not a multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(n as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HistoryPreset {
    #[default]
    Zero,
    /// Constant history equal to the initial velocity trace.
    MatchInitialTrace,
}

/// Power balance of one step, evaluated at its midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepLedger {
    pub t_mid: f64,
    /// `-sum a_i(t_mid) |field_t|^2` with mean step velocities.
    pub damping_power: f64,
    /// `|field_t|^2` of the mean step velocity per field.
    pub vel_sq: [f64; 3],
    /// Mean step velocity trace per channel.
    pub y: [f64; 3],
    /// Mean delayed trace per channel.
    pub z: [f64; 3],
    pub tau_dot: [f64; 3],
    /// `1/2 (y, z) Phi (y, z)` per channel, `Phi` taken at `t_mid`.
    pub quad_form: [f64; 3],
    /// Exact boundary contribution to the step's energy change over `dt`:
    /// feedback work plus delay-line inflow minus outflow.
    pub boundary_rate: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub variant: Variant,
    pub dt: f64,
    /// Every step time `t_n`.
    pub times: Vec<f64>,
    /// Total energy at every step (delay integrals included).
    pub energy: Vec<f64>,
    /// `1/2 (p^T M p + q^T K q)` at every step.
    pub mech_energy: Vec<f64>,
    /// Velocity traces `u_t(L)`, `v_t(L)`, `w_tx(L)` (delayed) or `u_t(L)`, `v_t(L)`, `w_t(L)` (controlled).
    pub velocity_traces: Vec<[f64; 3]>,
    /// `u(L)`, `v(L)`, `w(L)`; zeros for the delayed variant.
    pub displacement_traces: Vec<[f64; 3]>,
    /// `z_i(1, t_n)`; zeros for the controlled variant.
    pub delayed_traces: Vec<[f64; 3]>,
    /// `q^T M p` at every step.
    pub cross: Vec<f64>,
    /// `(|beta_i|/2) tau_i int (1-rho) z_i^2` at every step.
    pub lyapunov_delay: Vec<[f64; 3]>,
    pub ledger: Vec<StepLedger>,
    pub state_times: Vec<f64>,
    pub states: Vec<DiscreteState>,
}

impl SimOutput {
    fn new(variant: Variant, dt: f64) -> Self {
        Self {
            variant,
            dt,
            times: Vec::new(),
            energy: Vec::new(),
            mech_energy: Vec::new(),
            velocity_traces: Vec::new(),
            displacement_traces: Vec::new(),
            delayed_traces: Vec::new(),
            cross: Vec::new(),
            lyapunov_delay: Vec::new(),
            ledger: Vec::new(),
            state_times: Vec::new(),
            states: Vec::new(),
        }
    }

    pub fn final_state(&self) -> &DiscreteState {
        self.states.last().expect("output always holds the initial state")
    }

    /// One row per stored state:
    /// `t,energy,ut_L,vt_L,wt_L,z1,z2,z3,u_L,v_L,w_L`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("t,energy,ut_L,vt_L,wt_L,z1,z2,z3,u_L,v_L,w_L\n");
        let stride_idx = self
            .state_times
            .iter()
            .map(|t| ((t / self.dt).round() as usize).min(self.times.len() - 1));
        for n in stride_idx {
            let _ = write!(s, "{:e},{:e}", self.times[n], self.energy[n]);
            for arr in [&self.velocity_traces[n], &self.delayed_traces[n], &self.displacement_traces[n]] {
                for v in arr.iter() {
                    let _ = write!(s, ",{:e}", v);
                }
            }
            s.push('\n');
        }
        s
    }
}

fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Cached factorization of `M + dt/2 C + dt^2/4 K`.
struct Implicit {
    key: Vec<f64>,
    chol: BandCholesky,
}

fn implicit_matrix(sys: &SemiDiscreteSystem, c: &SymBand, dt: f64) -> SymBand {
    let mut a = sys.stiffness.combine(0.25 * dt * dt, c, 0.5 * dt.abs());
    a.add_diag(&sys.mass, 1.0);
    a
}

fn key_changed(old: &[f64], new: &[f64]) -> bool {
    old.iter()
        .zip(new)
        .any(|(a, b)| (a - b).abs() > 1e-14 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
}

/// Integrator of the damped system with delayed boundary feedback.
pub struct DelayedIntegrator<'a> {
    sys: &'a SemiDiscreteSystem,
    delays: DelaySpec,
    damping: DampingSpec,
    gains: GainConfig,
    dt: f64,
    cache: Option<Implicit>,
    last_theta: [f64; 3],
    /// Channels whose delayed trace is looked up; a channel without delayed
    /// feedback is skipped when the step outruns its delay.
    tracked: [bool; 3],
}

impl<'a> DelayedIntegrator<'a> {
    pub fn new(
        sys: &'a SemiDiscreteSystem,
        delays: &DelaySpec,
        damping: &DampingSpec,
        gains: &GainConfig,
        cfg: &SchemeConfig,
    ) -> Result<Self, SimError> {
        if sys.variant() != Variant::StabilizedDelayed {
            return Err(SimError::Variant("delayed integrator needs the delayed layout".into()));
        }
        cfg.steps()?;
        delays.validate()?;
        if cfg.enforce_delay_safety && gains.has_delay_feedback() && cfg.dt > delays.min_tau0() {
            return Err(SimError::DelaySafety {
                dt: cfg.dt,
                tau0: delays.min_tau0(),
            });
        }
        Ok(Self {
            sys,
            delays: *delays,
            damping: *damping,
            gains: *gains,
            dt: cfg.dt,
            cache: None,
            last_theta: Channel::ALL.map(|c| delays.get(c).theta(0.0)),
            tracked: Channel::ALL.map(|c| gains.beta(c) != 0.0 || cfg.dt <= delays.get(c).tau0),
        })
    }

    fn damping_values(&self, t: f64) -> [f64; 3] {
        Channel::ALL.map(|c| self.damping.a(c, t))
    }

    /// `C(t)`: interior damping plus the instantaneous boundary feedback.
    fn damping_matrix(&self, t: f64) -> SymBand {
        let sys = self.sys;
        let a = self.damping_values(t);
        let mut c = SymBand::zeros(sys.ndof(), sys.stiffness.bandwidth());
        for i in 0..sys.ndof() {
            c.add(i, i, a[sys.field[i].index()] * sys.l2_weight[i]);
        }
        for ch in Channel::ALL {
            let w = sys.params.channel_stiffness(ch) * self.gains.alpha(ch);
            c.add_outer(&sys.feedback[ch.index()], w);
        }
        c
    }

    fn delayed_force(&self, z: &[f64; 3]) -> Vec<f64> {
        let mut f = vec![0.0; self.sys.ndof()];
        for ch in Channel::ALL {
            let s = -self.sys.params.channel_stiffness(ch) * self.gains.beta(ch) * z[ch.index()];
            for &(i, g) in &self.sys.feedback[ch.index()] {
                f[i] += s * g;
            }
        }
        f
    }

    fn delayed_values(&self, t: f64, hist: &Histories) -> Result<[f64; 3], SimError> {
        let mut z = [0.0; 3];
        for ch in Channel::ALL {
            if !self.tracked[ch.index()] {
                continue;
            }
            z[ch.index()] = hist[ch.index()].eval_delayed(t, &self.delays)?;
        }
        Ok(z)
    }

    fn acceleration(&self, s: &DiscreteState, z: &[f64; 3]) -> Vec<f64> {
        let sys = self.sys;
        let f = self.delayed_force(z);
        let cv = self.damping_matrix(s.t).mul_vec(&s.p);
        let kq = sys.stiffness.mul_vec(&s.q);
        (0..sys.ndof())
            .map(|i| (f[i] - cv[i] - kq[i]) / sys.mass[i])
            .collect()
    }

    /// Histories for the given preset, with the initial trace pushed at `t = 0`.
    pub fn start(&self, initial: &DiscreteState, preset: HistoryPreset, interp: Interp) -> Result<Histories, SimError> {
        self.sys.check_state(initial)?;
        let y0 = self.traces(&initial.p);
        let zero = |_: f64| 0.0;
        let (c0, c1, c2) = (move |_: f64| y0[0], move |_: f64| y0[1], move |_: f64| y0[2]);
        let f: [&dyn Fn(f64) -> f64; 3] = match preset {
            HistoryPreset::Zero => [&zero, &zero, &zero],
            HistoryPreset::MatchInitialTrace => [&c0, &c1, &c2],
        };
        let mut hist = init_histories(f, &self.delays, interp)?;
        let z0 = self.delayed_values(initial.t, &hist)?;
        let a0 = self.acceleration(initial, &z0);
        let slope = self.traces(&a0);
        for ch in Channel::ALL {
            let k = ch.index();
            hist[k].push(initial.t, y0[k], slope[k])?;
        }
        Ok(hist)
    }

    pub fn delayed_at(&self, t: f64, hist: &Histories) -> Result<[f64; 3], SimError> {
        self.delayed_values(t, hist)
    }

    pub fn traces(&self, x: &[f64]) -> [f64; 3] {
        Channel::ALL.map(|c| apply_functional(&self.sys.feedback[c.index()], x))
    }

    /// One step from `state`; pushes the new traces into `hist`.
    pub fn step(&mut self, state: &DiscreteState, hist: &mut Histories) -> Result<(DiscreteState, StepLedger), SimError> {
        let sys = self.sys;
        let dt = self.dt;
        let t0 = state.t;
        // step times are integer multiples of dt so that stored and pushed
        // timestamps agree bit for bit
        let t1 = ((t0 / dt).round() + 1.0) * dt;
        let tm = 0.5 * (t0 + t1);

        for ch in Channel::ALL {
            let th = self.delays.get(ch).theta(t1);
            let prev = self.last_theta[ch.index()];
            if !(th > prev) {
                return Err(crate::error::DelayError::NonMonotoneArgument {
                    channel: ch,
                    previous: prev,
                    current: th,
                }
                .into());
            }
            self.last_theta[ch.index()] = th;
        }

        let c = self.damping_matrix(tm);
        let key = self.damping_values(tm).to_vec();
        let refactor = match &self.cache {
            None => true,
            Some(im) => key_changed(&im.key, &key),
        };
        if refactor {
            let chol = implicit_matrix(sys, &c, dt).cholesky()?;
            self.cache = Some(Implicit { key, chol });
        }

        let z0 = self.delayed_values(t0, hist)?;
        let z1 = self.delayed_values(t1, hist)?;
        let mut zm = [0, 1, 2].map(|k| 0.5 * (z0[k] + z1[k]));
        let mut outflow = [0.0; 3];
        for ch in Channel::ALL {
            let k = ch.index();
            let b = self.gains.beta(ch).abs();
            if !self.tracked[k] {
                continue;
            }
            let d = self.delays.get(ch);
            let (th0, th1) = (d.theta(t0), d.theta(t1));
            if hist[k].interp() == Interp::StepMean {
                zm[k] = hist[k].window_mean(th0, th1)?;
            }
            if b != 0.0 {
                outflow[k] = 0.5 * b * hist[k].integral_sq(th0, th1)? / dt;
            }
        }
        let fbar = self.delayed_force(&zm);

        let n = sys.ndof();
        let cv = c.mul_vec(&state.p);
        let kq: Vec<f64> = (0..n)
            .map(|i| dt * state.q[i] + 0.25 * dt * dt * state.p[i])
            .collect();
        let kq = sys.stiffness.mul_vec(&kq);
        let mut v1: Vec<f64> = (0..n)
            .map(|i| sys.mass[i] * state.p[i] - 0.5 * dt * cv[i] - kq[i] + dt * fbar[i])
            .collect();
        self.cache.as_ref().unwrap().chol.solve_in_place(&mut v1);
        let q1: Vec<f64> = (0..n)
            .map(|i| state.q[i] + 0.5 * dt * (state.p[i] + v1[i]))
            .collect();
        let next = DiscreteState { q: q1, p: v1, t: t1 };
        if !all_finite(&next.q) || !all_finite(&next.p) {
            return Err(SimError::NonFinite {
                step: (t1 / dt).round() as usize,
            });
        }

        let a1 = self.acceleration(&next, &z1);
        let y1 = self.traces(&next.p);
        let s1 = self.traces(&a1);
        for ch in Channel::ALL {
            let k = ch.index();
            hist[k].push(t1, y1[k], s1[k])?;
        }

        let mut inflow = [0.0; 3];
        for ch in Channel::ALL {
            let b = self.gains.beta(ch).abs();
            if b != 0.0 {
                inflow[ch.index()] = 0.5 * b * hist[ch.index()].integral_sq(t0, t1)? / dt;
            }
        }

        let vm: Vec<f64> = (0..n).map(|i| 0.5 * (state.p[i] + next.p[i])).collect();
        let a = self.damping_values(tm);
        let vel_sq = Channel::ALL.map(|c| sys.field_l2_sq(&vm, c));
        let y = self.traces(&vm);
        let tau_dot = Channel::ALL.map(|c| self.delays.get(c).tau_dot(tm));
        let quad_form = Channel::ALL.map(|c| {
            let k = c.index();
            0.5 * phi_matrix(c, tau_dot[k], &sys.params, &self.gains).eval(y[k], zm[k])
        });
        let boundary_rate = Channel::ALL.map(|c| {
            let k = c.index();
            let ck = sys.params.channel_stiffness(c);
            -ck * self.gains.alpha(c) * y[k] * y[k] - ck * self.gains.beta(c) * y[k] * zm[k] + inflow[k] - outflow[k]
        });
        let ledger = StepLedger {
            t_mid: tm,
            damping_power: -(0..3).map(|k| a[k] * vel_sq[k]).sum::<f64>(),
            vel_sq,
            y,
            z: zm,
            tau_dot,
            quad_form,
            boundary_rate,
        };
        Ok((next, ledger))
    }
}

/// Free-function form of one delayed step.
pub fn step_damped_delayed(
    integrator: &mut DelayedIntegrator<'_>,
    state: &DiscreteState,
    hist: &mut Histories,
) -> Result<DiscreteState, SimError> {
    integrator.step(state, hist).map(|(s, _)| s)
}

/// Boundary controls sampled on the step grid.
#[derive(Clone, Copy)]
pub enum Controls<'a> {
    Zero,
    /// Values at `t_n`, one per step node.
    Grid(&'a [[f64; 3]]),
    Func(&'a (dyn Fn(f64) -> [f64; 3] + Sync)),
}

impl Controls<'_> {
    fn at(&self, n: usize, t: f64) -> [f64; 3] {
        match self {
            Controls::Zero => [0.0; 3],
            Controls::Grid(g) => g[n],
            Controls::Func(f) => f(t),
        }
    }
}

/// Integrator of the conservative controlled system.
pub struct ConservativeIntegrator<'a> {
    sys: &'a SemiDiscreteSystem,
    dt: f64,
    chol: BandCholesky,
    trace: [usize; 3],
}

impl<'a> ConservativeIntegrator<'a> {
    pub fn new(sys: &'a SemiDiscreteSystem, dt: f64) -> Result<Self, SimError> {
        let trace = sys
            .trace
            .ok_or_else(|| SimError::Variant("controlled integrator needs the controlled layout".into()))?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::Config(format!("dt = {dt} must be positive")));
        }
        let c = SymBand::zeros(sys.ndof(), 0);
        let chol = implicit_matrix(sys, &c, dt).cholesky()?;
        Ok(Self { sys, dt, chol, trace })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn trace_dofs(&self) -> [usize; 3] {
        self.trace
    }

    /// One step of signed length `sign * dt` with mean control `fbar`.
    pub fn step_signed(&self, state: &DiscreteState, backward: bool, fbar: [f64; 3]) -> DiscreteState {
        let sys = self.sys;
        let dt = if backward { -self.dt } else { self.dt };
        let n = sys.ndof();
        let w = sys.params.trace_weights();
        let kq: Vec<f64> = (0..n)
            .map(|i| dt * state.q[i] + 0.25 * dt * dt * state.p[i])
            .collect();
        let kq = sys.stiffness.mul_vec(&kq);
        let mut v1: Vec<f64> = (0..n).map(|i| sys.mass[i] * state.p[i] - kq[i]).collect();
        for k in 0..3 {
            v1[self.trace[k]] += dt * w[k] * fbar[k];
        }
        self.chol.solve_in_place(&mut v1);
        let q1 = (0..n)
            .map(|i| state.q[i] + 0.5 * dt * (state.p[i] + v1[i]))
            .collect();
        DiscreteState {
            q: q1,
            p: v1,
            t: state.t + dt,
        }
    }

    pub fn step(&self, state: &DiscreteState, f0: [f64; 3], f1: [f64; 3]) -> DiscreteState {
        let fbar = [0, 1, 2].map(|k| 0.5 * (f0[k] + f1[k]));
        self.step_signed(state, false, fbar)
    }
}

/// Free-function form of one controlled step.
pub fn step_conservative_controlled(
    integrator: &ConservativeIntegrator<'_>,
    state: &DiscreteState,
    f0: [f64; 3],
    f1: [f64; 3],
) -> DiscreteState {
    integrator.step(state, f0, f1)
}

pub enum Dynamics<'a> {
    Delayed {
        delays: &'a DelaySpec,
        damping: &'a DampingSpec,
        gains: &'a GainConfig,
        history: HistoryPreset,
    },
    Controlled {
        controls: Controls<'a>,
    },
}

pub fn simulate(
    initial: &DiscreteState,
    sys: &SemiDiscreteSystem,
    cfg: &SchemeConfig,
    dynamics: Dynamics<'_>,
) -> Result<SimOutput, SimError> {
    match dynamics {
        Dynamics::Delayed {
            delays,
            damping,
            gains,
            history,
        } => simulate_delayed(initial, sys, cfg, delays, damping, gains, history),
        Dynamics::Controlled { controls } => simulate_controlled(initial, sys, cfg, controls),
    }
}

pub fn simulate_delayed(
    initial: &DiscreteState,
    sys: &SemiDiscreteSystem,
    cfg: &SchemeConfig,
    delays: &DelaySpec,
    damping: &DampingSpec,
    gains: &GainConfig,
    preset: HistoryPreset,
) -> Result<SimOutput, SimError> {
    let nsteps = cfg.steps()?;
    let mut integ = DelayedIntegrator::new(sys, delays, damping, gains, cfg)?;
    let mut state = initial.clone();
    state.t = 0.0;
    let mut hist = integ.start(&state, preset, cfg.interp)?;
    let mut out = SimOutput::new(Variant::StabilizedDelayed, cfg.dt);

    let record = |out: &mut SimOutput,
                  integ_ref: &DelayedIntegrator<'_>,
                  s: &DiscreteState,
                  hist: &Histories,
                  n: usize|
     -> Result<(), SimError> {
        let e = discrete_energy(s, sys, Some(hist), delays, gains)?;
        out.times.push(s.t);
        out.energy.push(e);
        out.mech_energy.push(sys.mechanical_energy(s));
        out.velocity_traces.push(Channel::ALL.map(|c| apply_functional(&sys.feedback[c.index()], &s.p)));
        out.displacement_traces.push([0.0; 3]);
        let z = integ_ref.delayed_at(s.t, hist)?;
        let mut lyap = [0.0; 3];
        for ch in Channel::ALL {
            let k = ch.index();
            lyap[k] = hist[k].lyapunov_term(s.t, delays.get(ch), gains.beta(ch))?;
        }
        out.delayed_traces.push(z);
        out.lyapunov_delay.push(lyap);
        out.cross.push((0..sys.ndof()).map(|i| sys.mass[i] * s.q[i] * s.p[i]).sum());
        if n % cfg.stride == 0 || n == nsteps {
            out.state_times.push(s.t);
            out.states.push(s.clone());
        }
        Ok(())
    };

    record(&mut out, &integ, &state, &hist, 0)?;
    for n in 1..=nsteps {
        let (next, ledger) = integ.step(&state, &mut hist)?;
        debug_assert_eq!(next.t, n as f64 * cfg.dt);
        out.ledger.push(ledger);
        record(&mut out, &integ, &next, &hist, n)?;
        state = next;
    }
    Ok(out)
}

pub fn simulate_controlled(
    initial: &DiscreteState,
    sys: &SemiDiscreteSystem,
    cfg: &SchemeConfig,
    controls: Controls<'_>,
) -> Result<SimOutput, SimError> {
    let nsteps = cfg.steps()?;
    sys.check_state(initial)?;
    let integ = ConservativeIntegrator::new(sys, cfg.dt)?;
    if let Controls::Grid(g) = controls {
        if g.len() != nsteps + 1 {
            return Err(SimError::Config(format!(
                "control grid has {} nodes, expected {}",
                g.len(),
                nsteps + 1
            )));
        }
    }
    let tr = integ.trace_dofs();
    let mut out = SimOutput::new(Variant::ControlledConservative, cfg.dt);
    let mut state = initial.clone();
    state.t = 0.0;
    let record = |out: &mut SimOutput, s: &DiscreteState, n: usize| {
        let e = sys.mechanical_energy(s);
        out.times.push(s.t);
        out.energy.push(e);
        out.mech_energy.push(e);
        out.velocity_traces.push(tr.map(|i| s.p[i]));
        out.displacement_traces.push(tr.map(|i| s.q[i]));
        out.delayed_traces.push([0.0; 3]);
        out.lyapunov_delay.push([0.0; 3]);
        out.cross.push((0..sys.ndof()).map(|i| sys.mass[i] * s.q[i] * s.p[i]).sum());
        if n % cfg.stride == 0 || n == nsteps {
            out.state_times.push(s.t);
            out.states.push(s.clone());
        }
    };
    record(&mut out, &state, 0);
    let mut f_prev = controls.at(0, 0.0);
    for n in 1..=nsteps {
        let t1 = n as f64 * cfg.dt;
        let f_next = controls.at(n, t1);
        let mut next = integ.step(&state, f_prev, f_next);
        next.t = t1;
        if !all_finite(&next.q) || !all_finite(&next.p) {
            return Err(SimError::NonFinite { step: n });
        }
        let vm: Vec<f64> = (0..sys.ndof()).map(|i| 0.5 * (state.p[i] + next.p[i])).collect();
        out.ledger.push(StepLedger {
            t_mid: t1 - 0.5 * cfg.dt,
            vel_sq: Channel::ALL.map(|c| sys.field_l2_sq(&vm, c)),
            y: tr.map(|i| vm[i]),
            ..Default::default()
        });
        record(&mut out, &next, n);
        state = next;
        f_prev = f_next;
    }
    Ok(out)
}
