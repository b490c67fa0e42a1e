//! Named initial data that satisfy the boundary conditions of each variant.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::grid::{DiscreteState, SemiDiscreteSystem, Variant};
use crate::model::Channel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialPreset {
    Zero,
    SingleMode {
        field: Channel,
        mode: usize,
        amplitude: f64,
    },
    /// Random coefficients `c_m / m^2` on the first `cutoff` shapes of every
    /// field; velocities are drawn too except in the delayed variant.
    RandomSmooth { seed: u64, cutoff: usize },
}

/// Root of `tan b = tanh b` near `(m + 1/4) pi`.
fn clamped_pinned_root(m: usize) -> f64 {
    let mut b = (m as f64 + 0.25) * PI;
    for _ in 0..50 {
        let g = b.tan() - b.tanh();
        let dg = 1.0 / b.cos().powi(2) - 1.0 / b.cosh().powi(2);
        let step = g / dg;
        b -= step;
        if step.abs() < 1e-15 * b {
            break;
        }
    }
    b
}

/// Clamped at 0, pinned with zero moment at `L`.
fn clamped_pinned_mode(m: usize, length: f64) -> impl Fn(f64) -> f64 {
    let b = clamped_pinned_root(m);
    let beta = b / length;
    let den = b.sin() - b.sinh();
    let sigma = (b.cos() - b.cosh()) / den;
    let one_minus_sigma = (b.sin() - b.cos() + (-b).exp()) / den;
    let raw = move |x: f64| {
        let y = beta * x;
        // cosh y - sigma sinh y, written to avoid cancellation
        let hyp = 0.5 * ((1.0 + sigma) * (-y).exp() + one_minus_sigma * y.exp());
        y.cos() - sigma * y.sin() - hyp
    };
    let scale = (0..=400)
        .map(|k| raw(length * k as f64 / 400.0).abs())
        .fold(0.0, f64::max);
    move |x| raw(x) / scale
}

/// Shape number `m >= 1` of one field.
pub fn shape(variant: Variant, field: Channel, m: usize, length: f64) -> Box<dyn Fn(f64) -> f64 + Send + Sync> {
    assert!(m >= 1, "mode index starts at 1");
    let kq = (m as f64 - 0.5) * PI / length;
    match (field, variant) {
        (Channel::U | Channel::V, _) => Box::new(move |x| (kq * x).sin()),
        (Channel::W, Variant::StabilizedDelayed) => Box::new(clamped_pinned_mode(m, length)),
        (Channel::W, Variant::ControlledConservative) => Box::new(move |x| (kq * x).cos()),
    }
}

fn random_field(
    sys: &SemiDiscreteSystem,
    field: Channel,
    cutoff: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut out = vec![0.0; sys.ndof()];
    for m in 1..=cutoff {
        let c: f64 = StandardNormal.sample(rng);
        let c = c / (m * m) as f64;
        let s = shape(sys.variant(), field, m, sys.grid.length);
        for (j, d) in sys.layout.field_dofs(field) {
            out[d] += c * s(sys.grid.x(j));
        }
    }
    out
}

pub fn initial_state(sys: &SemiDiscreteSystem, preset: &InitialPreset) -> DiscreteState {
    let mut st = DiscreteState::zeros(sys.ndof());
    match *preset {
        InitialPreset::Zero => {}
        InitialPreset::SingleMode {
            field,
            mode,
            amplitude,
        } => {
            let s = shape(sys.variant(), field, mode, sys.grid.length);
            for (j, d) in sys.layout.field_dofs(field) {
                st.q[d] = amplitude * s(sys.grid.x(j));
            }
        }
        InitialPreset::RandomSmooth { seed, cutoff } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for ch in Channel::ALL {
                let q = random_field(sys, ch, cutoff, &mut rng);
                st.q.iter_mut().zip(&q).for_each(|(a, b)| *a += b);
            }
            if sys.variant() == Variant::ControlledConservative {
                for ch in Channel::ALL {
                    let p = random_field(sys, ch, cutoff, &mut rng);
                    st.p.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
                }
            }
        }
    }
    st
}
