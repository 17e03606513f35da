//! Gaussian expectations by Gauss–Hermite quadrature and the trapezoid rule
//! on uniform grids.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::hermite::GaussHermite;

/// Default node count for Gaussian expectations.
pub const DEFAULT_NODES: usize = 64;

/// Nodes and weights for `E[g(Z)]`, `Z ~ N(0, 1)`.
#[derive(Clone, Debug)]
pub struct GaussianRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussianRule {
    pub fn new(count: usize) -> Self {
        let count = NonZeroUsize::new(count.max(1)).expect("nonzero");
        let rule = GaussHermite::new(count);
        let scale = std::f64::consts::PI.sqrt();
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (std::f64::consts::SQRT_2 * x, w / scale))
            .unzip();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Standard-normal nodes and weights.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `∫ g(z) φ(z; mean, var) dz`
    pub fn expect(&self, mean: f64, var: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
        let sd = var.sqrt();
        self.pairs().map(|(z, w)| w * g(mean + sd * z)).sum()
    }
}

/// The shared 64-node rule.
pub fn default_rule() -> &'static GaussianRule {
    static RULE: OnceLock<GaussianRule> = OnceLock::new();
    RULE.get_or_init(|| GaussianRule::new(DEFAULT_NODES))
}

/// Trapezoid rule for samples on a uniform grid of spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        len => h * (0.5 * (values[0] + values[len - 1]) + values[1..len - 1].iter().sum::<f64>()),
    }
}

/// Suffix trapezoid integrals: `out[k] = ∫_{t_k}^{t_last} g`.
pub fn trapezoid_suffix(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for k in (0..values.len().saturating_sub(1)).rev() {
        out[k] = out[k + 1] + 0.5 * h * (values[k] + values[k + 1]);
    }
    out
}
