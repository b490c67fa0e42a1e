//! Physical parameters, feedback gains, delay and damping specifications,
//! hypothesis checks and the theoretical decay constants.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

const LAYER_RTOL: f64 = 1e-12;

/// Boundary channel: 1 drives `u`, 2 drives `v`, 3 drives `w_x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    U,
    V,
    W,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::U, Channel::V, Channel::W];

    pub fn index(self) -> usize {
        match self {
            Channel::U => 0,
            Channel::V => 1,
            Channel::W => 2,
        }
    }

    pub fn number(self) -> usize {
        self.index() + 1
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Optional per-layer data from which the composite coefficients follow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerInputs {
    pub rho: [f64; 3],
    pub h: [f64; 3],
    pub e: [f64; 3],
    pub i: [f64; 3],
}

impl LayerInputs {
    pub fn rhoh(&self) -> f64 {
        (0..3).map(|j| self.rho[j] * self.h[j]).sum()
    }

    pub fn ei(&self) -> f64 {
        self.e[0] * self.i[0] + self.e[2] * self.i[2]
    }

    pub fn alpha(&self) -> f64 {
        self.h[1] + 0.5 * (self.h[0] + self.h[2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct PhysicalParams {
    pub rho1h1: f64,
    pub E1h1: f64,
    pub rho3h3: f64,
    pub E3h3: f64,
    pub rhoh: f64,
    pub EI: f64,
    pub k: f64,
    pub alpha: f64,
    pub L: f64,
    pub layers: Option<LayerInputs>,
}

impl PhysicalParams {
    /// All coefficients equal to one on the unit interval.
    pub fn unit() -> Self {
        Self {
            rho1h1: 1.0,
            E1h1: 1.0,
            rho3h3: 1.0,
            E3h3: 1.0,
            rhoh: 1.0,
            EI: 1.0,
            k: 1.0,
            alpha: 1.0,
            L: 1.0,
            layers: None,
        }
    }

    /// Builds the composite coefficients from layer data.
    pub fn from_layers(layers: LayerInputs, k: f64, length: f64) -> Result<Self, ModelError> {
        let p = Self {
            rho1h1: layers.rho[0] * layers.h[0],
            E1h1: layers.e[0] * layers.h[0],
            rho3h3: layers.rho[2] * layers.h[2],
            E3h3: layers.e[2] * layers.h[2],
            rhoh: layers.rhoh(),
            EI: layers.ei(),
            k,
            alpha: layers.alpha(),
            L: length,
            layers: Some(layers),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("rho1h1", self.rho1h1),
            ("E1h1", self.E1h1),
            ("rho3h3", self.rho3h3),
            ("E3h3", self.E3h3),
            ("rhoh", self.rhoh),
            ("EI", self.EI),
            ("k", self.k),
            ("alpha", self.alpha),
            ("L", self.L),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::NonPositive { name, value });
            }
        }
        if let Some(l) = &self.layers {
            let named = [("rho", &l.rho), ("h", &l.h), ("E", &l.e), ("I", &l.i)];
            for (name, arr) in named {
                for &value in arr.iter() {
                    if !(value > 0.0 && value.is_finite()) {
                        return Err(ModelError::NonPositive { name, value });
                    }
                }
            }
            let checks = [
                ("rhoh", self.rhoh, l.rhoh()),
                ("EI", self.EI, l.ei()),
                ("alpha", self.alpha, l.alpha()),
            ];
            for (name, given, expected) in checks {
                if (given - expected).abs() > LAYER_RTOL * expected.abs() {
                    return Err(ModelError::LayerMismatch {
                        name,
                        given,
                        expected,
                    });
                }
            }
        }
        Ok(())
    }

    /// Stiffness attached to each boundary channel: `E1h1`, `E3h3`, `EI`.
    pub fn channel_stiffness(&self, ch: Channel) -> f64 {
        match ch {
            Channel::U => self.E1h1,
            Channel::V => self.E3h3,
            Channel::W => self.EI,
        }
    }

    /// Mass coefficient of each field.
    pub fn field_mass(&self, ch: Channel) -> f64 {
        match ch {
            Channel::U => self.rho1h1,
            Channel::V => self.rho3h3,
            Channel::W => self.rhoh,
        }
    }

    /// Weights of the boundary trace terms of the controlled system.
    pub fn trace_weights(&self) -> [f64; 3] {
        [self.E1h1, self.E3h3, self.alpha * self.k]
    }

    /// Slowest longitudinal wave speed.
    pub fn c_min(&self) -> f64 {
        (self.E1h1 / self.rho1h1)
            .sqrt()
            .min((self.E3h3 / self.rho3h3).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DelayFn {
    Constant { tau: f64 },
    /// `mean + amplitude * sin(frequency * t)`
    SinusoidalAffine {
        mean: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl DelayFn {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            DelayFn::Constant { tau } => tau,
            DelayFn::SinusoidalAffine {
                mean,
                amplitude,
                frequency,
            } => mean + amplitude * (frequency * t).sin(),
        }
    }

    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            DelayFn::Constant { .. } => 0.0,
            DelayFn::SinusoidalAffine {
                amplitude,
                frequency,
                ..
            } => amplitude * frequency * (frequency * t).cos(),
        }
    }

    /// Exact infimum, supremum and rate supremum over `t >= 0`.
    fn extremes(&self) -> (f64, f64, f64) {
        match *self {
            DelayFn::Constant { tau } => (tau, tau, 0.0),
            DelayFn::SinusoidalAffine {
                mean,
                amplitude,
                frequency,
            } => {
                if frequency == 0.0 || amplitude == 0.0 {
                    (mean, mean, 0.0)
                } else {
                    let a = amplitude.abs();
                    (mean - a, mean + a, (amplitude * frequency).abs())
                }
            }
        }
    }
}

/// Delay on one channel together with its declared bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelDelay {
    pub func: DelayFn,
    pub tau0: f64,
    pub max: f64,
    pub d: f64,
}

impl ChannelDelay {
    pub fn constant(tau: f64) -> Self {
        Self {
            func: DelayFn::Constant { tau },
            tau0: tau,
            max: tau,
            d: 0.0,
        }
    }

    /// Sinusoidal delay with its tightest admissible bounds.
    pub fn sinusoidal(mean: f64, amplitude: f64, frequency: f64) -> Self {
        let func = DelayFn::SinusoidalAffine {
            mean,
            amplitude,
            frequency,
        };
        let (lo, hi, rate) = func.extremes();
        Self {
            func,
            tau0: lo,
            max: hi,
            d: rate,
        }
    }

    pub fn tau(&self, t: f64) -> f64 {
        self.func.value(t)
    }

    pub fn tau_dot(&self, t: f64) -> f64 {
        self.func.rate(t)
    }

    /// Delayed argument `t - tau(t)`.
    pub fn theta(&self, t: f64) -> f64 {
        t - self.tau(t)
    }

    fn check(&self, channel: Channel) -> Result<(), ModelError> {
        let bad = |reason: String| Err(ModelError::DelayBounds { channel, reason });
        if !(self.d < 1.0) {
            return Err(ModelError::DelayRateTooLarge { channel, d: self.d });
        }
        if !(self.tau0 > 0.0) {
            return bad(format!("tau0 = {} must be positive", self.tau0));
        }
        if self.d < 0.0 {
            return bad(format!("d = {} must be nonnegative", self.d));
        }
        let (lo, hi, rate) = self.func.extremes();
        if lo < self.tau0 {
            return bad(format!("inf tau = {lo} below tau0 = {}", self.tau0));
        }
        if hi > self.max {
            return bad(format!("sup tau = {hi} above M = {}", self.max));
        }
        if rate > self.d {
            return bad(format!("sup tau' = {rate} above d = {}", self.d));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySpec {
    pub channels: [ChannelDelay; 3],
}

impl DelaySpec {
    pub fn uniform(c: ChannelDelay) -> Self {
        Self { channels: [c; 3] }
    }

    pub fn get(&self, ch: Channel) -> &ChannelDelay {
        &self.channels[ch.index()]
    }

    pub fn min_tau0(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.tau0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for ch in Channel::ALL {
            self.get(ch).check(ch)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DampingFn {
    Constant { a: f64 },
    /// `floor_value + (initial - floor_value) * exp(-gamma * t)`
    ExponentialToFloor {
        initial: f64,
        limit: f64,
        gamma: f64,
    },
}

impl DampingFn {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            DampingFn::Constant { a } => a,
            DampingFn::ExponentialToFloor {
                initial,
                limit,
                gamma,
            } => limit + (initial - limit) * (-gamma * t).exp(),
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            DampingFn::Constant { a } => a,
            DampingFn::ExponentialToFloor { initial, limit, .. } => initial.max(limit),
        }
    }

    fn inf(&self) -> f64 {
        match *self {
            DampingFn::Constant { a } => a,
            DampingFn::ExponentialToFloor {
                initial,
                limit,
                gamma,
            } => {
                if gamma > 0.0 {
                    initial.min(limit)
                } else {
                    initial
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelDamping {
    pub func: DampingFn,
    pub floor: f64,
}

impl ChannelDamping {
    pub fn constant(a: f64) -> Self {
        Self {
            func: DampingFn::Constant { a },
            floor: a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingSpec {
    pub channels: [ChannelDamping; 3],
}

impl DampingSpec {
    pub fn uniform(c: ChannelDamping) -> Self {
        Self { channels: [c; 3] }
    }

    /// The undamped specification used by the controlled system.
    pub fn none() -> Self {
        Self::uniform(ChannelDamping::constant(0.0))
    }

    pub fn a(&self, ch: Channel, t: f64) -> f64 {
        self.channels[ch.index()].func.value(t)
    }

    pub fn floor(&self, ch: Channel) -> f64 {
        self.channels[ch.index()].floor
    }

    pub fn sup(&self, ch: Channel) -> f64 {
        self.channels[ch.index()].func.sup()
    }

    pub fn is_zero(&self) -> bool {
        self.channels
            .iter()
            .all(|c| c.func == DampingFn::Constant { a: 0.0 })
    }

    /// Non-increasing with values bounded below by a positive floor.
    pub fn validate(&self) -> Result<(), ModelError> {
        for ch in Channel::ALL {
            let c = &self.channels[ch.index()];
            let bad = |reason: String| Err(ModelError::Damping { channel: ch, reason });
            if !(c.floor > 0.0) {
                return bad(format!("floor {} must be positive", c.floor));
            }
            if let DampingFn::ExponentialToFloor {
                initial,
                limit,
                gamma,
            } = c.func
            {
                if gamma < 0.0 || initial < limit {
                    return bad("weight must be non-increasing".into());
                }
            }
            if c.func.inf() < c.floor {
                return bad(format!("inf a = {} below floor {}", c.func.inf(), c.floor));
            }
        }
        Ok(())
    }

    /// Every weight identically zero.
    pub fn validate_control(&self) -> Result<(), ModelError> {
        for ch in Channel::ALL {
            if self.channels[ch.index()].func != (DampingFn::Constant { a: 0.0 }) {
                return Err(ModelError::Damping {
                    channel: ch,
                    reason: "controlled system requires zero damping".into(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainConfig {
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
}

impl GainConfig {
    pub fn alpha(&self, ch: Channel) -> f64 {
        self.alpha[ch.index()]
    }

    pub fn beta(&self, ch: Channel) -> f64 {
        self.beta[ch.index()]
    }

    pub fn has_delay_feedback(&self) -> bool {
        self.beta.iter().any(|&b| b != 0.0)
    }
}

/// Symmetric 2x2 form acting on `(trace, delayed trace)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryQuadForm {
    pub channel: Channel,
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl BoundaryQuadForm {
    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    pub fn eval(&self, y: f64, z: f64) -> f64 {
        self.m11 * y * y + 2.0 * self.m12 * y * z + self.m22 * z * z
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let tr = self.m11 + self.m22;
        let disc = ((self.m11 - self.m22).powi(2) + 4.0 * self.m12 * self.m12).sqrt();
        0.5 * (tr + disc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition_id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub conditions: Vec<ConditionResult>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn failing(&self) -> impl Iterator<Item = &ConditionResult> {
        self.conditions.iter().filter(|c| !c.pass)
    }
}

/// Right side of the gain condition on one channel.
pub fn gain_threshold(c: f64, beta: f64, d: f64) -> f64 {
    beta.abs() / (2.0 * c) * ((c * c + 1.0 - d) / (1.0 - d))
}

pub fn validate_gains(
    params: &PhysicalParams,
    gains: &GainConfig,
    delays: &DelaySpec,
) -> Result<HypothesisReport, ModelError> {
    let mut report = HypothesisReport::default();
    for ch in Channel::ALL {
        let d = delays.get(ch).d;
        if !(d < 1.0) {
            return Err(ModelError::DelayRateTooLarge { channel: ch, d });
        }
        let lhs = gains.alpha(ch);
        let rhs = gain_threshold(params.channel_stiffness(ch), gains.beta(ch), d);
        report.conditions.push(ConditionResult {
            condition_id: format!("gain_{ch}"),
            lhs,
            rhs,
            margin: lhs - rhs,
            pass: lhs > rhs,
        });
    }
    Ok(report)
}

/// Every hypothesis of the delayed system as a pass/fail list; never errors.
pub fn check_hypotheses(
    params: &PhysicalParams,
    delays: &DelaySpec,
    damping: &DampingSpec,
    gains: &GainConfig,
) -> HypothesisReport {
    let mut report = HypothesisReport::default();
    let mut push = |id: String, lhs: f64, rhs: f64, pass: bool| {
        report.conditions.push(ConditionResult {
            condition_id: id,
            lhs,
            rhs,
            margin: rhs - lhs,
            pass,
        })
    };
    let params_ok = params.validate().is_ok();
    push("params_valid".into(), 0.0, 0.0, params_ok);
    for ch in Channel::ALL {
        let c = delays.get(ch);
        let (lo, hi, rate) = c.func.extremes();
        push(format!("delay_rate_{ch}"), c.d, 1.0, c.d < 1.0 && c.d >= 0.0);
        push(format!("delay_lower_{ch}"), c.tau0, lo, c.tau0 > 0.0 && lo >= c.tau0);
        push(format!("delay_upper_{ch}"), hi, c.max, hi <= c.max);
        push(format!("delay_slope_{ch}"), rate, c.d, rate <= c.d);
        let dmp = &damping.channels[ch.index()];
        let monotone = match dmp.func {
            DampingFn::Constant { .. } => true,
            DampingFn::ExponentialToFloor {
                initial,
                limit,
                gamma,
            } => gamma >= 0.0 && initial >= limit,
        };
        push(format!("damping_monotone_{ch}"), 0.0, 0.0, monotone);
        push(
            format!("damping_floor_{ch}"),
            dmp.floor,
            dmp.func.inf(),
            dmp.floor > 0.0 && dmp.func.inf() >= dmp.floor,
        );
    }
    if params_ok {
        for ch in Channel::ALL {
            let d = delays.get(ch).d;
            let lhs = gains.alpha(ch);
            let rhs = if d < 1.0 {
                gain_threshold(params.channel_stiffness(ch), gains.beta(ch), d)
            } else {
                f64::INFINITY
            };
            report.conditions.push(ConditionResult {
                condition_id: format!("gain_{ch}"),
                lhs,
                rhs,
                margin: lhs - rhs,
                pass: lhs > rhs,
            });
        }
    }
    report
}

/// The boundary form attached to channel `ch` at delay rate `d`.
pub fn phi_matrix(ch: Channel, d: f64, params: &PhysicalParams, gains: &GainConfig) -> BoundaryQuadForm {
    let c = params.channel_stiffness(ch);
    let a = gains.alpha(ch);
    let b = gains.beta(ch);
    BoundaryQuadForm {
        channel: ch,
        m11: -2.0 * c * a + b.abs(),
        m12: -c * b,
        m22: b.abs() * (d - 1.0),
    }
}

pub fn is_negative_definite(m: &BoundaryQuadForm) -> bool {
    m.m11 < 0.0 && m.det() > 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalRates {
    pub mu0: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
    pub lambda: f64,
    pub zeta: f64,
    /// Same max with the Poincare constants valid for one pinned end.
    pub mu4_poincare_corrected: f64,
    pub zeta_poincare_corrected: f64,
    /// Max read with bare layer densities and moduli, when layers are known.
    pub mu4_layer_reading: Option<f64>,
    pub young_eps: f64,
    pub young_c: [f64; 3],
}

impl TheoreticalRates {
    pub fn mu(&self, ch: Channel) -> f64 {
        match ch {
            Channel::U => self.mu1,
            Channel::V => self.mu2,
            Channel::W => self.mu3,
        }
    }

    pub fn decay_exponent(&self) -> f64 {
        self.lambda / (1.0 + self.mu4)
    }
}

const YOUNG_EPS: f64 = 0.5;
const BISECTION_STEPS: usize = 60;
/// Any `mu4 < 1` gives a valid bound; pushing it towards 1 sends `zeta` to
/// infinity, so the search stops at this value.
pub const MU4_CAP: f64 = 0.5;

/// `a b <= eps a^2 + b^2 / (4 eps)` combined with `|f(L)| <= sqrt(L) |f'|`.
pub fn young_constant(c: f64, length: f64, eps: f64) -> f64 {
    c * length / (4.0 * eps)
}

fn damping_ratios(params: &PhysicalParams, damping: &DampingSpec) -> [f64; 3] {
    Channel::ALL.map(|ch| damping.floor(ch) / params.field_mass(ch))
}

/// Perturbed boundary form of the Lyapunov derivative.
pub fn pi_matrix(
    ch: Channel,
    mu0: f64,
    mu_i: f64,
    params: &PhysicalParams,
    delays: &DelaySpec,
    gains: &GainConfig,
) -> BoundaryQuadForm {
    let phi = phi_matrix(ch, delays.get(ch).d, params, gains);
    let ce = young_constant(params.channel_stiffness(ch), params.L, YOUNG_EPS);
    let a = gains.alpha(ch);
    let b = gains.beta(ch);
    BoundaryQuadForm {
        channel: ch,
        m11: phi.m11 + 2.0 * mu0 * ce * a * a + mu_i * b.abs(),
        m12: phi.m12 + 2.0 * mu0 * ce * a * b,
        m22: phi.m22 + 2.0 * mu0 * ce * b * b,
    }
}

fn pi_ok(pi: &BoundaryQuadForm, beta: f64) -> bool {
    if beta == 0.0 {
        pi.m11 < 0.0
    } else {
        is_negative_definite(pi)
    }
}

fn poincare_terms(params: &PhysicalParams, factor_wave: f64, factor_beam: f64) -> [f64; 3] {
    let l2 = params.L * params.L;
    [
        factor_wave * params.rho1h1 * l2 / (params.E1h1 * PI * PI),
        factor_wave * params.rho3h3 * l2 / (params.E3h3 * PI * PI),
        factor_beam * params.rhoh * l2 * l2 / (params.EI * PI.powi(4)),
    ]
}

fn max_of(mu0: f64, coeffs: &[f64], mus: &[f64; 3]) -> f64 {
    let mut m = mu0;
    for c in coeffs {
        m = m.max(mu0 * c);
    }
    for &x in mus {
        m = m.max(x);
    }
    m
}

fn mus_for(mu0: f64, delays: &DelaySpec) -> [f64; 3] {
    Channel::ALL.map(|ch| {
        let c = delays.get(ch);
        2.0 * mu0 * c.max / (1.0 - c.d)
    })
}

/// Selects the Lyapunov weights and derives the decay constants.
pub fn select_mus(
    params: &PhysicalParams,
    delays: &DelaySpec,
    damping: &DampingSpec,
    gains: &GainConfig,
) -> Result<TheoreticalRates, ModelError> {
    params.validate()?;
    delays.validate()?;
    damping.validate()?;
    let report = validate_gains(params, gains, delays)?;
    if let Some(f) = report.failing().next() {
        return Err(ModelError::Infeasible {
            binding: format!("{} (margin {:e})", f.condition_id, f.margin),
        });
    }
    let ratios = damping_ratios(params, damping);
    let mu0_max = ratios.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
    let literal = poincare_terms(params, 1.0, 1.0);

    let binding_at = |mu0: f64| -> Option<String> {
        let mus = mus_for(mu0, delays);
        for ch in Channel::ALL {
            let pi = pi_matrix(ch, mu0, mus[ch.index()], params, delays, gains);
            if !pi_ok(&pi, gains.beta(ch)) {
                return Some(format!("perturbed boundary form on channel {ch} not negative definite"));
            }
        }
        if max_of(mu0, &literal, &mus) > MU4_CAP {
            return Some(format!("mu4 <= {MU4_CAP}"));
        }
        None
    };

    let mu0 = match binding_at(mu0_max) {
        None => mu0_max,
        Some(binding) => {
            let (mut lo, mut hi) = (0.0, mu0_max);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if binding_at(mid).is_none() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if lo <= 0.0 {
                return Err(ModelError::Infeasible { binding });
            }
            lo
        }
    };

    let mus = mus_for(mu0, delays);
    let mu4 = max_of(mu0, &literal, &mus);
    let corrected = max_of(mu0, &poincare_terms(params, 4.0, 4.0), &mus);
    let layer_reading = params.layers.as_ref().map(|l| {
        let l2 = params.L * params.L;
        let c = [
            l.rho[0] * l2 / (l.e[0] * PI * PI),
            l.rho[2] * l2 / (l.e[2] * PI * PI),
            params.rhoh * l2 * l2 / (params.EI * PI.powi(4)),
        ];
        max_of(mu0, &c, &mus)
    });
    let lambda = ratios
        .iter()
        .map(|r| 2.0 * (r - mu0))
        .fold(mu0, f64::min);
    Ok(TheoreticalRates {
        mu0,
        mu1: mus[0],
        mu2: mus[1],
        mu3: mus[2],
        mu4,
        lambda,
        zeta: (1.0 + mu4) / (1.0 - mu4),
        mu4_poincare_corrected: corrected,
        zeta_poincare_corrected: (1.0 + corrected) / (1.0 - corrected),
        mu4_layer_reading: layer_reading,
        young_eps: YOUNG_EPS,
        young_c: Channel::ALL
            .map(|ch| young_constant(params.channel_stiffness(ch), params.L, YOUNG_EPS)),
    })
}

pub fn decay_bound(t: f64, e0: f64, rates: &TheoreticalRates) -> f64 {
    rates.zeta * (-rates.decay_exponent() * t).exp() * e0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains(a: [f64; 3], b: [f64; 3]) -> GainConfig {
        GainConfig { alpha: a, beta: b }
    }

    #[test]
    fn threshold_examples() {
        let p = PhysicalParams::unit();
        let d = DelaySpec::uniform(ChannelDelay::constant(0.3));
        let r = validate_gains(&p, &gains([1.0; 3], [0.0; 3]), &d).unwrap();
        assert!(r.all_pass());

        let r = validate_gains(&p, &gains([0.1, 1.0, 1.0], [0.1, 0.0, 0.0]), &d).unwrap();
        assert!((r.conditions[0].rhs - 0.1).abs() < 1e-15);
        assert!(!r.conditions[0].pass);
        let r = validate_gains(&p, &gains([0.11, 1.0, 1.0], [0.1, 0.0, 0.0]), &d).unwrap();
        assert!(r.conditions[0].pass);

        let mut p2 = PhysicalParams::unit();
        p2.E3h3 = 2.0;
        let mut d2 = d;
        d2.channels[1] = ChannelDelay {
            func: DelayFn::Constant { tau: 0.3 },
            tau0: 0.3,
            max: 0.3,
            d: 0.5,
        };
        let r = validate_gains(&p2, &gains([1.0, 0.5, 1.0], [0.0, 0.2, 0.0]), &d2).unwrap();
        assert!((r.conditions[1].rhs - 0.45).abs() < 1e-14);
        assert!(r.conditions[1].pass);
    }

    #[test]
    fn rejects_rate_at_one() {
        let p = PhysicalParams::unit();
        let mut d = DelaySpec::uniform(ChannelDelay::constant(0.3));
        d.channels[0].d = 1.0;
        assert!(matches!(
            validate_gains(&p, &gains([1.0; 3], [0.0; 3]), &d),
            Err(ModelError::DelayRateTooLarge { .. })
        ));
    }

    #[test]
    fn phi_examples() {
        let p = PhysicalParams::unit();
        let m = phi_matrix(Channel::U, 0.0, &p, &gains([1.0; 3], [0.0; 3]));
        assert_eq!((m.m11, m.m12, m.m22), (-2.0, 0.0, 0.0));
        assert!(!is_negative_definite(&m));
        let m = phi_matrix(Channel::U, 0.0, &p, &gains([1.0; 3], [1.0; 3]));
        assert_eq!((m.m11, m.m12, m.m22), (-1.0, -1.0, -1.0));
        let m = phi_matrix(Channel::W, 0.5, &p, &gains([1.0, 1.0, 2.0], [0.0, 0.0, 0.5]));
        assert_eq!((m.m11, m.m12, m.m22), (-3.5, -0.5, -0.25));
    }

    #[test]
    fn sylvester_examples() {
        let f = |m11, m12, m22| BoundaryQuadForm {
            channel: Channel::U,
            m11,
            m12,
            m22,
        };
        assert!(is_negative_definite(&f(-1.0, 0.0, -1.0)));
        assert!(!is_negative_definite(&f(-1.0, 2.0, -1.0)));
    }

    #[test]
    fn layers_must_agree() {
        let layers = LayerInputs {
            rho: [1.0, 2.0, 3.0],
            h: [0.1, 0.2, 0.3],
            e: [5.0, 1.0, 7.0],
            i: [0.01, 0.02, 0.03],
        };
        let mut p = PhysicalParams::from_layers(layers, 1.0, 1.0).unwrap();
        assert!((p.alpha - (0.2 + 0.2)).abs() < 1e-15);
        p.EI *= 1.0 + 1e-9;
        assert!(matches!(p.validate(), Err(ModelError::LayerMismatch { .. })));
    }

    #[test]
    fn sinusoidal_bounds() {
        let c = ChannelDelay::sinusoidal(0.5, 0.25, 2.0);
        assert_eq!((c.tau0, c.max, c.d), (0.25, 0.75, 0.5));
        assert!(DelaySpec::uniform(c).validate().is_ok());
        let mut bad = c;
        bad.d = 0.4;
        assert!(DelaySpec::uniform(bad).validate().is_err());
    }

    #[test]
    fn decay_bound_examples() {
        let mut r = select_mus(
            &PhysicalParams::unit(),
            &DelaySpec::uniform(ChannelDelay::constant(1.0)),
            &DampingSpec::uniform(ChannelDamping::constant(1.0)),
            &gains([1.0; 3], [0.0; 3]),
        )
        .unwrap();
        assert_eq!(decay_bound(0.0, 3.0, &r), r.zeta * 3.0);
        assert_eq!(decay_bound(5.0, 0.0, &r), 0.0);
        r.zeta = 2.0;
        r.lambda = 1.0;
        r.mu4 = 0.0;
        assert!((decay_bound(2f64.ln(), 1.0, &r) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zeta_tends_to_one_with_weak_damping() {
        let p = PhysicalParams::unit();
        let d = DelaySpec::uniform(ChannelDelay::constant(1.0));
        let g = gains([1.0; 3], [0.0; 3]);
        let mut prev = f64::INFINITY;
        for a in [1.0, 1e-2, 1e-4, 1e-6] {
            let r = select_mus(&p, &d, &DampingSpec::uniform(ChannelDamping::constant(a)), &g).unwrap();
            assert!(r.lambda > 0.0 && r.lambda < prev);
            prev = r.lambda;
            if a == 1e-6 {
                assert!(r.mu4 < 1e-5 && (r.zeta - 1.0).abs() < 1e-5);
            }
        }
    }
}
