//! TOML scenario documents. Every table rejects unknown keys.

use serde::{Deserialize, Serialize};

use raonakra_core::hum::HumConfig;
use raonakra_core::{
    ChannelDamping, ChannelDelay, DampingFn, DampingSpec, DelaySpec, GainConfig, HistoryPreset, InitialPreset, Interp,
    LayerInputs, PhysicalParams, SchemeConfig, SemiDiscreteSystem, Variant,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub variant: VariantName,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub gains: GainsConfig,
    #[serde(default)]
    pub delay: DelayConfig,
    #[serde(default)]
    pub damping: DampingConfig,
    #[serde(default)]
    pub history: HistoryName,
    #[serde(default)]
    pub decay: DecaySection,
    #[serde(default)]
    pub hum: HumSection,
    #[serde(default)]
    pub observability: ObservabilitySection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    #[default]
    Delayed,
    Controlled,
}

impl From<VariantName> for Variant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Delayed => Variant::StabilizedDelayed,
            VariantName::Controlled => Variant::ControlledConservative,
        }
    }
}

/// Composite coefficients, or layer data when `[params.layers]` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ParamsConfig {
    pub rho1h1: f64,
    pub E1h1: f64,
    pub rho3h3: f64,
    pub E3h3: f64,
    pub rhoh: f64,
    pub EI: f64,
    pub k: f64,
    pub alpha: f64,
    pub L: f64,
    pub layers: Option<LayersConfig>,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        let p = PhysicalParams::unit();
        Self {
            rho1h1: p.rho1h1,
            E1h1: p.E1h1,
            rho3h3: p.rho3h3,
            E3h3: p.E3h3,
            rhoh: p.rhoh,
            EI: p.EI,
            k: p.k,
            alpha: p.alpha,
            L: p.L,
            layers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayersConfig {
    pub rho: [f64; 3],
    pub h: [f64; 3],
    pub e: [f64; 3],
    pub i: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpName {
    #[default]
    StepMean,
    Linear,
    CubicHermite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    pub dt: f64,
    pub t_final: f64,
    pub stride: usize,
    #[serde(default)]
    pub interp: InterpName,
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_final: 10.0,
            stride: 1,
            interp: InterpName::StepMean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldName {
    U,
    V,
    W,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    // braces so that stray keys are still rejected
    Zero {},
    SingleMode { field: FieldName, mode: usize, amplitude: f64 },
    RandomSmooth { seed: u64, cutoff: usize },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::RandomSmooth { seed: 7, cutoff: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsConfig {
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
}

impl Default for GainsConfig {
    fn default() -> Self {
        Self {
            alpha: [1.0; 3],
            beta: [0.5; 3],
        }
    }
}

/// One delay law; `tau0`, `max` and `d` override the bounds derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DelayChannelConfig {
    Constant {
        tau: f64,
        tau0: Option<f64>,
        max: Option<f64>,
        d: Option<f64>,
    },
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        frequency: f64,
        tau0: Option<f64>,
        max: Option<f64>,
        d: Option<f64>,
    },
}

impl DelayChannelConfig {
    fn build(&self) -> ChannelDelay {
        let (mut c, overrides) = match *self {
            DelayChannelConfig::Constant { tau, tau0, max, d } => (ChannelDelay::constant(tau), [tau0, max, d]),
            DelayChannelConfig::Sinusoidal {
                mean,
                amplitude,
                frequency,
                tau0,
                max,
                d,
            } => (ChannelDelay::sinusoidal(mean, amplitude, frequency), [tau0, max, d]),
        };
        let [tau0, max, d] = overrides;
        c.tau0 = tau0.unwrap_or(c.tau0);
        c.max = max.unwrap_or(c.max);
        c.d = d.unwrap_or(c.d);
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayConfig {
    pub channels: [DelayChannelConfig; 3],
}

impl Default for DelayConfig {
    fn default() -> Self {
        let c = DelayChannelConfig::Sinusoidal {
            mean: 0.5,
            amplitude: 0.25,
            frequency: 2.0,
            tau0: None,
            max: None,
            d: None,
        };
        Self { channels: [c; 3] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DampingChannelConfig {
    Constant {
        a: f64,
    },
    Exponential {
        initial: f64,
        limit: f64,
        gamma: f64,
        floor: f64,
    },
}

impl DampingChannelConfig {
    fn build(&self) -> ChannelDamping {
        match *self {
            DampingChannelConfig::Constant { a } => ChannelDamping::constant(a),
            DampingChannelConfig::Exponential {
                initial,
                limit,
                gamma,
                floor,
            } => ChannelDamping {
                func: DampingFn::ExponentialToFloor { initial, limit, gamma },
                floor,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DampingConfig {
    pub channels: [DampingChannelConfig; 3],
}

impl Default for DampingConfig {
    fn default() -> Self {
        Self {
            channels: [DampingChannelConfig::Constant { a: 1.0 }; 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistoryName {
    #[default]
    Zero,
    MatchInitialTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySection {
    pub window: [f64; 2],
}

impl Default for DecaySection {
    fn default() -> Self {
        Self { window: [0.2, 0.9] }
    }
}

/// Unset fields fall back to the standard horizon `8 L / c_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumSection {
    pub dt: f64,
    pub t_final: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub verify_tol: f64,
    pub tikhonov: f64,
    pub reorthogonalize: bool,
}

impl Default for HumSection {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_final: None,
            tol: 1e-8,
            max_iter: 200,
            verify_tol: 1e-3,
            tikhonov: 0.0,
            reorthogonalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservabilitySection {
    pub samples: usize,
    pub seed: u64,
}

impl Default for ObservabilitySection {
    fn default() -> Self {
        Self { samples: 20, seed: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergenceKind {
    #[default]
    Spatial,
    Temporal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    pub kind: ConvergenceKind,
    pub ns: Vec<usize>,
    pub n_ref: usize,
    pub dts: Vec<f64>,
    pub dt_ref: f64,
    /// Keep only this many lowest discrete modes of the initial data.
    pub filter: Option<usize>,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            kind: ConvergenceKind::Spatial,
            ns: vec![16, 32, 64],
            n_ref: 256,
            dts: vec![0.02, 0.01, 0.005],
            dt_ref: 0.000625,
            filter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn physical_params(&self) -> Result<PhysicalParams, CliError> {
        let p = &self.params;
        let built = match &p.layers {
            Some(l) => {
                let layers = LayerInputs {
                    rho: l.rho,
                    h: l.h,
                    e: l.e,
                    i: l.i,
                };
                PhysicalParams::from_layers(layers, p.k, p.L)
            }
            None => {
                let params = PhysicalParams {
                    rho1h1: p.rho1h1,
                    E1h1: p.E1h1,
                    rho3h3: p.rho3h3,
                    E3h3: p.E3h3,
                    rhoh: p.rhoh,
                    EI: p.EI,
                    k: p.k,
                    alpha: p.alpha,
                    L: p.L,
                    layers: None,
                };
                params.validate().map(|_| params)
            }
        };
        built.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn delays(&self) -> DelaySpec {
        DelaySpec {
            channels: self.delay.channels.map(|c| c.build()),
        }
    }

    pub fn damping_spec(&self) -> DampingSpec {
        DampingSpec {
            channels: self.damping.channels.map(|c| c.build()),
        }
    }

    pub fn gain_config(&self) -> GainConfig {
        GainConfig {
            alpha: self.gains.alpha,
            beta: self.gains.beta,
        }
    }

    pub fn history_preset(&self) -> HistoryPreset {
        match self.history {
            HistoryName::Zero => HistoryPreset::Zero,
            HistoryName::MatchInitialTrace => HistoryPreset::MatchInitialTrace,
        }
    }

    pub fn initial_preset(&self) -> InitialPreset {
        match self.initial {
            InitialConfig::Zero {} => InitialPreset::Zero,
            InitialConfig::SingleMode { field, mode, amplitude } => InitialPreset::SingleMode {
                field: match field {
                    FieldName::U => raonakra_core::Channel::U,
                    FieldName::V => raonakra_core::Channel::V,
                    FieldName::W => raonakra_core::Channel::W,
                },
                mode,
                amplitude,
            },
            InitialConfig::RandomSmooth { seed, cutoff } => InitialPreset::RandomSmooth { seed, cutoff },
        }
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        let mut cfg = SchemeConfig::new(self.scheme.dt, self.scheme.t_final);
        cfg.stride = self.scheme.stride;
        cfg.interp = match self.scheme.interp {
            InterpName::StepMean => Interp::StepMean,
            InterpName::Linear => Interp::Linear,
            InterpName::CubicHermite => Interp::CubicHermite,
        };
        cfg
    }

    pub fn hum_config(&self, sys: &SemiDiscreteSystem) -> HumConfig {
        let h = &self.hum;
        let mut cfg = HumConfig::standard(sys, h.dt);
        if let Some(t) = h.t_final {
            cfg.t_final = t;
        }
        cfg.tol = h.tol;
        cfg.max_iter = h.max_iter;
        cfg.verify_tol = h.verify_tol;
        cfg.tikhonov = h.tikhonov;
        cfg.reorthogonalize = h.reorthogonalize;
        cfg
    }

    /// Applies `--seed` to every seeded part of the scenario.
    pub fn override_seed(&mut self, seed: u64) {
        if let InitialConfig::RandomSmooth { seed: s, .. } = &mut self.initial {
            *s = seed;
        }
        self.observability.seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_takes_defaults() {
        let c = ScenarioConfig::parse("").unwrap();
        assert_eq!(c.grid.n, 64);
        assert_eq!(c.variant, VariantName::Delayed);
    }

    #[test]
    fn typo_is_an_error() {
        let e = ScenarioConfig::parse("[grid]\nnn = 3\n").unwrap_err();
        assert!(matches!(e, CliError::Config(_)));
        assert!(ScenarioConfig::parse("[initial]\npreset = \"zero\"\nseed = 1\n").is_err());
    }

    #[test]
    fn delay_override_reaches_the_spec() {
        let text = r#"
[delay]
channels = [
  { kind = "constant", tau = 0.5, d = 1.0 },
  { kind = "constant", tau = 0.5 },
  { kind = "sinusoidal", mean = 0.5, amplitude = 0.1, frequency = 1.0 },
]
"#;
        let c = ScenarioConfig::parse(text).unwrap();
        let d = c.delays();
        assert_eq!(d.channels[0].d, 1.0);
        assert_eq!(d.channels[1].d, 0.0);
        assert!((d.channels[2].d - 0.1).abs() < 1e-15);
    }

    #[test]
    fn seed_override_touches_presets() {
        let mut c = ScenarioConfig::parse("").unwrap();
        c.override_seed(99);
        assert_eq!(c.initial, InitialConfig::RandomSmooth { seed: 99, cutoff: 3 });
        assert_eq!(c.observability.seed, 99);
    }
}
