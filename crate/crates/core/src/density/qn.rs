use serde::{Deserialize, Serialize};

use crate::quadrature::default_rule;

use super::gaussian::{gaussian_pdf, std_normal_cdf};

/// `m₁ = E[𝔠₀^{-1/2}𝔠₁]`, `m₂ = E[𝔠₀^{-5/2}𝔠₂]`, `m₃ = E[𝔠₀^{-3/2}𝔠₃]`
/// with Monte Carlo standard errors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMoments {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub se1: f64,
    pub se2: f64,
    pub se3: f64,
    #[serde(rename = "N")]
    pub n_samples: usize,
}

impl CoefficientMoments {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The combination multiplying `z` in the density correction.
    fn linear(&self) -> f64 {
        12.0 * self.m2 - 2.0 * self.m3
    }
}

/// `qₙ(z) = φ(z){1 + n^{-1/2}[m₁(z³ − 3z) + 12m₂z − 2m₃z]}`
pub fn studentized_qn(z: f64, n: usize, m: &CoefficientMoments) -> f64 {
    let phi = gaussian_pdf(z, 0.0, 1.0);
    let corr = m.m1 * (z * z * z - 3.0 * z) + m.linear() * z;
    phi * (1.0 + corr / (n as f64).sqrt())
}

/// `∫ g qₙ` by Gauss–Hermite quadrature. Returns the first-order value
/// `E[g(N)]` and the second-order value.
pub fn qn_expectation(g: impl Fn(f64) -> f64, n: usize, m: &CoefficientMoments) -> (f64, f64) {
    let rule = default_rule();
    let first = rule.expect(0.0, 1.0, &g);
    let corr = rule.expect(0.0, 1.0, |z| {
        g(z) * (m.m1 * (z * z * z - 3.0 * z) + m.linear() * z)
    });
    (first, first + corr / (n as f64).sqrt())
}

/// `∫_{−∞}^t qₙ = Φ(t) − n^{-1/2}[m₁(t² − 1) + 12m₂ − 2m₃]φ(t)`
pub fn qn_cdf(t: f64, n: usize, m: &CoefficientMoments) -> f64 {
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    let phi = gaussian_pdf(t, 0.0, 1.0);
    std_normal_cdf(t) - (m.m1 * (t * t - 1.0) + m.linear()) * phi / (n as f64).sqrt()
}
