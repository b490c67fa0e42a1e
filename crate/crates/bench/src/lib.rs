//! Fixtures shared by the criterion benchmarks under `benches/`.

use raonakra_core::{
    build_system, presets, ChannelDamping, ChannelDelay, DampingSpec, DelaySpec, DiscreteState, GainConfig, Grid1D,
    InitialPreset, PhysicalParams, SemiDiscreteSystem, Variant,
};

pub fn unit_system(n: usize, variant: Variant) -> SemiDiscreteSystem {
    build_system(Grid1D::new(n, 1.0).expect("n >= 8"), &PhysicalParams::unit(), variant).expect("unit params are valid")
}

pub fn smooth_state(sys: &SemiDiscreteSystem) -> DiscreteState {
    presets::initial_state(sys, &InitialPreset::RandomSmooth { seed: 7, cutoff: 3 })
}

/// The delayed scenario used throughout the test suite.
pub fn feedback() -> (DelaySpec, DampingSpec, GainConfig) {
    (
        DelaySpec::uniform(ChannelDelay::sinusoidal(0.5, 0.25, 2.0)),
        DampingSpec::uniform(ChannelDamping::constant(1.0)),
        GainConfig {
            alpha: [1.0; 3],
            beta: [0.5; 3],
        },
    )
}
