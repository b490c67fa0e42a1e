//! Boundary trace histories and the delayed lookups built on them.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::DelayError;
use crate::model::{Channel, ChannelDelay, DelaySpec};

/// Number of samples laid down on the initial interval.
pub const INITIAL_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Interp {
    Linear,
    CubicHermite,
    /// Constant on each piece, equal to the mean of its end samples. With
    /// samples at step ends this is the step-mean trace, which keeps the
    /// discrete energy balance exact.
    #[default]
    StepMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub value: f64,
    pub slope: f64,
}

// 4-point Gauss-Legendre on [-1, 1].
const GL_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL_W: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

#[derive(Debug, Clone)]
pub struct TraceHistory {
    channel: Channel,
    samples: VecDeque<Sample>,
    interp: Interp,
    horizon: f64,
}

impl TraceHistory {
    /// Lays down `INITIAL_SAMPLES` points of `f` on `[-tau_at0, 0)`, with
    /// slopes from central differences.
    pub fn init(
        channel: Channel,
        f: impl Fn(f64) -> f64,
        tau_at0: f64,
        horizon: f64,
        interp: Interp,
    ) -> Result<Self, DelayError> {
        if !(tau_at0 > 0.0) {
            return Err(DelayError::NonPositiveDelay(tau_at0));
        }
        let h = 1e-5 * tau_at0;
        let step = tau_at0 / INITIAL_SAMPLES as f64;
        let samples = (0..INITIAL_SAMPLES)
            .map(|k| {
                let s = -tau_at0 + k as f64 * step;
                Sample {
                    t: s,
                    value: f(s),
                    slope: (f(s + h) - f(s - h)) / (2.0 * h),
                }
            })
            .collect();
        Ok(Self {
            channel,
            samples,
            interp,
            horizon: horizon.max(tau_at0),
        })
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn set_interp(&mut self, interp: Interp) {
        self.interp = interp;
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn earliest(&self) -> f64 {
        self.samples.front().map_or(f64::NAN, |s| s.t)
    }

    pub fn latest(&self) -> f64 {
        self.samples.back().map_or(f64::NAN, |s| s.t)
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter()
    }

    pub fn push(&mut self, t: f64, value: f64, slope: f64) -> Result<(), DelayError> {
        let last = self.latest();
        if !(t > last) {
            return Err(DelayError::NonMonotoneTime { t, last });
        }
        let dt = t - last;
        self.samples.push_back(Sample { t, value, slope });
        let cutoff = t - self.horizon - 2.0 * dt;
        while self.samples.len() >= 2 && self.samples[1].t <= cutoff {
            self.samples.pop_front();
        }
        Ok(())
    }

    fn locate(&self, s: f64) -> Result<usize, DelayError> {
        let earliest = self.earliest();
        let latest = self.latest();
        if s < earliest {
            return Err(DelayError::LookupBeforeHistory { s, earliest });
        }
        if s > latest {
            return Err(DelayError::LookupAfterHistory { s, latest });
        }
        let n = self.samples.len();
        if n == 1 {
            return Ok(0);
        }
        // index of the piece [k, k+1] containing s
        let k = self.samples.partition_point(|x| x.t <= s);
        Ok(k.saturating_sub(1).min(n - 2))
    }

    fn eval_piece(&self, k: usize, s: f64) -> f64 {
        let a = self.samples[k];
        if self.samples.len() == 1 {
            return a.value;
        }
        let b = self.samples[k + 1];
        let h = b.t - a.t;
        let x = (s - a.t) / h;
        match self.interp {
            Interp::Linear => a.value + x * (b.value - a.value),
            Interp::CubicHermite => {
                let x2 = x * x;
                let x3 = x2 * x;
                let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
                let h10 = x3 - 2.0 * x2 + x;
                let h01 = -2.0 * x3 + 3.0 * x2;
                let h11 = x3 - x2;
                h00 * a.value + h10 * h * a.slope + h01 * b.value + h11 * h * b.slope
            }
            Interp::StepMean => 0.5 * (a.value + b.value),
        }
    }

    /// Interpolated trace at time `s`.
    pub fn eval(&self, s: f64) -> Result<f64, DelayError> {
        let k = self.locate(s)?;
        Ok(self.eval_piece(k, s))
    }

    /// Trace at the delayed argument `t - tau(t)` of this channel.
    pub fn eval_delayed(&self, t: f64, delays: &DelaySpec) -> Result<f64, DelayError> {
        self.eval(delays.get(self.channel).theta(t))
    }

    /// `z(rho_k, t)` for `rho_k = k / n_panels`, `k = 0..=n_panels`.
    pub fn z_profile(&self, t: f64, delay: &ChannelDelay, n_panels: usize) -> Result<Vec<f64>, DelayError> {
        let tau = delay.tau(t);
        (0..=n_panels)
            .map(|k| self.eval(t - tau * k as f64 / n_panels as f64))
            .collect()
    }

    /// `int_a^b g(s, y(s)) ds` piece by piece; exact when `g` is a
    /// polynomial of degree at most 7 in `s` along the interpolant.
    fn integral_of(&self, a: f64, b: f64, g: impl Fn(f64, f64) -> f64) -> Result<f64, DelayError> {
        if b <= a {
            return Ok(0.0);
        }
        let k0 = self.locate(a)?;
        let k1 = self.locate(b)?;
        let mut total = 0.0;
        for k in k0..=k1 {
            let lo = if k == k0 { a } else { self.samples[k].t };
            let hi = if k == k1 {
                b
            } else {
                self.samples[k + 1].t
            };
            if hi <= lo {
                continue;
            }
            let (m, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            for q in 0..4 {
                let s = m + r * GL_X[q];
                total += r * GL_W[q] * g(s, self.eval_piece(k, s));
            }
        }
        Ok(total)
    }

    /// `int_a^b w(s) y(s)^2 ds` with `w` affine.
    fn integral_weighted(&self, a: f64, b: f64, w: impl Fn(f64) -> f64) -> Result<f64, DelayError> {
        self.integral_of(a, b, |s, y| w(s) * y * y)
    }

    /// Mean of the interpolant over `[a, b]`; the point value when `b <= a`.
    pub fn window_mean(&self, a: f64, b: f64) -> Result<f64, DelayError> {
        if b <= a {
            return self.eval(a);
        }
        Ok(self.integral_of(a, b, |_, y| y)? / (b - a))
    }

    pub fn integral_sq(&self, a: f64, b: f64) -> Result<f64, DelayError> {
        self.integral_weighted(a, b, |_| 1.0)
    }

    /// `(|beta|/2) tau(t) int_0^1 z^2 drho`, evaluated exactly.
    pub fn delay_energy(&self, t: f64, delay: &ChannelDelay, beta: f64) -> Result<f64, DelayError> {
        if beta == 0.0 {
            return Ok(0.0);
        }
        Ok(0.5 * beta.abs() * self.integral_sq(delay.theta(t), t)?)
    }

    /// Same quantity with the composite trapezoid rule on `n_panels`.
    pub fn delay_energy_panels(
        &self,
        t: f64,
        delay: &ChannelDelay,
        beta: f64,
        n_panels: usize,
    ) -> Result<f64, DelayError> {
        if beta == 0.0 {
            return Ok(0.0);
        }
        let z = self.z_profile(t, delay, n_panels)?;
        let h = 1.0 / n_panels as f64;
        let mut s: f64 = z.iter().map(|v| v * v).sum();
        s -= 0.5 * (z[0] * z[0] + z[n_panels] * z[n_panels]);
        Ok(0.5 * beta.abs() * delay.tau(t) * s * h)
    }

    /// `(|beta|/2) tau(t) int_0^1 (1 - rho) z^2 drho`, evaluated exactly.
    pub fn lyapunov_term(&self, t: f64, delay: &ChannelDelay, beta: f64) -> Result<f64, DelayError> {
        if beta == 0.0 {
            return Ok(0.0);
        }
        let tau = delay.tau(t);
        let theta = t - tau;
        Ok(0.5 * beta.abs() * self.integral_weighted(theta, t, |s| (s - theta) / tau)?)
    }

    /// `t,value,slope` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,value,slope\n");
        for x in &self.samples {
            let _ = writeln!(s, "{:e},{:e},{:e}", x.t, x.value, x.slope);
        }
        s
    }
}

/// One history per channel.
pub type Histories = [TraceHistory; 3];

pub fn init_histories(
    f: [&dyn Fn(f64) -> f64; 3],
    delays: &DelaySpec,
    interp: Interp,
) -> Result<Histories, DelayError> {
    let mk = |ch: Channel| {
        let d = delays.get(ch);
        TraceHistory::init(ch, f[ch.index()], d.tau(0.0), d.max, interp)
    };
    Ok([mk(Channel::U)?, mk(Channel::V)?, mk(Channel::W)?])
}
