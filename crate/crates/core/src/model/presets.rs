use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::{ExpansionCase, Initial, ModelSpec, Smooth};

/// Numeric parameter overrides for a preset, keyed by name.
pub type PresetParams = BTreeMap<String, f64>;

/// A named model family that can be built from parameter overrides.
pub trait ModelPreset: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    /// Parameter names with their defaults.
    fn defaults(&self) -> Vec<(&'static str, f64)>;
    fn build_with(&self, p: &dyn Fn(&str) -> f64) -> ModelSpec;

    fn build(&self, params: &PresetParams) -> Result<ModelSpec> {
        let defaults = self.defaults();
        for key in params.keys() {
            if !defaults.iter().any(|(k, _)| k == key) {
                let known: Vec<_> = defaults.iter().map(|(k, _)| *k).collect();
                return Err(Error::UnknownName {
                    kind: "parameter",
                    name: format!("{}.{key}", self.name()),
                    known: known.join(", "),
                });
            }
        }
        for (key, value) in params {
            if !value.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "parameter {key} must be finite, got {value}"
                )));
            }
        }
        let lookup = |key: &str| {
            params.get(key).copied().unwrap_or_else(|| {
                defaults
                    .iter()
                    .find(|(k, _)| *k == key)
                    .map(|(_, v)| *v)
                    .expect("preset asked for an undeclared parameter")
            })
        };
        Ok(self.build_with(&lookup))
    }
}

struct WienerConst;
struct WienerSin;
struct Gbm;
struct Ou;

impl ModelPreset for WienerConst {
    fn name(&self) -> &'static str {
        "wiener-const"
    }
    fn summary(&self) -> &'static str {
        "b = 0, σ = 1, c = level (a ≡ level)"
    }
    fn defaults(&self) -> Vec<(&'static str, f64)> {
        vec![("x0", 0.0), ("level", 1.0)]
    }
    fn build_with(&self, p: &dyn Fn(&str) -> f64) -> ModelSpec {
        ModelSpec::new(
            self.name(),
            Smooth::constant(0.0),
            Smooth::constant(1.0),
            Smooth::constant(p("level")),
            Initial::Point(p("x0")),
        )
        .with_case(ExpansionCase::Wiener)
        .with_hormander_asserted(true)
    }
}

impl ModelPreset for WienerSin {
    fn name(&self) -> &'static str {
        "wiener-sin"
    }
    fn summary(&self) -> &'static str {
        "b = 0, σ = 1, c = a = shift + amp·sin x"
    }
    fn defaults(&self) -> Vec<(&'static str, f64)> {
        vec![("x0", 0.0), ("shift", 2.0), ("amp", 1.0)]
    }
    fn build_with(&self, p: &dyn Fn(&str) -> f64) -> ModelSpec {
        let (shift, amp) = (p("shift"), p("amp"));
        ModelSpec::new(
            self.name(),
            Smooth::constant(0.0),
            Smooth::constant(1.0),
            Smooth::new(
                move |x| shift + amp * x.sin(),
                move |x| amp * x.cos(),
                move |x| -amp * x.sin(),
            )
            .with_third(move |x| -amp * x.cos()),
            Initial::Point(p("x0")),
        )
        .with_case(ExpansionCase::Wiener)
        .with_hormander_asserted(true)
    }
}

impl ModelPreset for Gbm {
    fn name(&self) -> &'static str {
        "gbm"
    }
    fn summary(&self) -> &'static str {
        "b = 0, σ = θx, c = 1 (scan range is log-symmetric around x0)"
    }
    fn defaults(&self) -> Vec<(&'static str, f64)> {
        vec![("x0", 1.0), ("theta", 0.5)]
    }
    fn build_with(&self, p: &dyn Fn(&str) -> f64) -> ModelSpec {
        let (x0, theta) = (p("x0"), p("theta"));
        // The state space is the half line, so the additive default window
        // would straddle the degenerate point x = 0.
        let spread = (5.0 * theta.abs()).max(0.5);
        let (lo, hi) = if x0 > 0.0 {
            (x0 * (-spread).exp(), x0 * spread.exp())
        } else {
            (x0 - 5.0, x0 + 5.0)
        };
        ModelSpec::new(
            self.name(),
            Smooth::constant(0.0),
            Smooth::affine(theta, 0.0),
            Smooth::constant(1.0),
            Initial::Point(x0),
        )
        .with_scan_range(lo, hi)
    }
}

impl ModelPreset for Ou {
    fn name(&self) -> &'static str {
        "ou"
    }
    fn summary(&self) -> &'static str {
        "b = −κx, σ = 1, c = 1"
    }
    fn defaults(&self) -> Vec<(&'static str, f64)> {
        vec![("x0", 0.0), ("kappa", 1.0)]
    }
    fn build_with(&self, p: &dyn Fn(&str) -> f64) -> ModelSpec {
        ModelSpec::new(
            self.name(),
            Smooth::affine(-p("kappa"), 0.0),
            Smooth::constant(1.0),
            Smooth::constant(1.0),
            Initial::Point(p("x0")),
        )
        .with_hormander_asserted(true)
    }
}

/// Name-indexed collection of model presets.
#[derive(Clone)]
pub struct ModelRegistry {
    presets: BTreeMap<&'static str, Arc<dyn ModelPreset>>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut reg = Self {
            presets: BTreeMap::new(),
        };
        reg.register(Arc::new(WienerConst));
        reg.register(Arc::new(WienerSin));
        reg.register(Arc::new(Gbm));
        reg.register(Arc::new(Ou));
        reg
    }
}

impl ModelRegistry {
    pub fn register(&mut self, preset: Arc<dyn ModelPreset>) {
        self.presets.insert(preset.name(), preset);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.presets.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn ModelPreset>> {
        self.presets.get(name).ok_or_else(|| Error::UnknownName {
            kind: "model preset",
            name: name.to_string(),
            known: self.names().join(", "),
        })
    }

    pub fn build(&self, name: &str, params: &PresetParams) -> Result<ModelSpec> {
        self.get(name)?.build(params)
    }
}
