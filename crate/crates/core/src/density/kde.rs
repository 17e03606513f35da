use serde::Serialize;

use crate::accum::{exact_sum, mean_se};
use crate::error::{invalid, Result};

use super::gaussian::{gaussian_pdf, hermite_he};

/// Label attached to density-form output built from a store whose `𝔠₀`
/// has no spread.
pub const DEGENERATE_LABEL: &str = "degenerate-reference";

/// Relative bandwidth used when the sample of `𝔠₀` is constant.
const DEGENERATE_RELATIVE_BANDWIDTH: f64 = 0.02;

/// Gaussian-kernel bandwidths for derivative orders 0, 1 and 2.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KdeBandwidths {
    pub h: [f64; 3],
    pub degenerate: bool,
}

impl KdeBandwidths {
    /// `h₀ = 1.06 σ̂ N^{-1/5}`, `h_m = σ̂ N^{-1/(5+2m)}`.
    pub fn silverman(c0: &[f64]) -> Self {
        let stats = mean_se(c0);
        let n = c0.len().max(1) as f64;
        let sd = stats.se * n.sqrt();
        if !(sd > 0.0) || !sd.is_finite() {
            let h = DEGENERATE_RELATIVE_BANDWIDTH * stats.mean.abs().max(1.0);
            return Self {
                h: [h; 3],
                degenerate: true,
            };
        }
        let h = [
            1.06 * sd * n.powf(-0.2),
            sd * n.powf(-1.0 / 7.0),
            sd * n.powf(-1.0 / 9.0),
        ];
        Self {
            h,
            degenerate: false,
        }
    }

    pub fn for_order(&self, order: u32) -> f64 {
        self.h[(order as usize).min(2)]
    }
}

/// `∂_x^m K_h(x)` for the Gaussian kernel.
pub fn kernel_derivative(x: f64, h: f64, order: u32) -> f64 {
    let u = x / h;
    let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
    sign * h.powi(-1 - order as i32) * hermite_he(order, u) * gaussian_pdf(u, 0.0, 1.0)
}

/// `(1/N) Σ 𝔠ⱼ⁽ⁱ⁾ ∂_x^m K_h(x − 𝔠₀⁽ⁱ⁾)`, an estimate of `∂_x^m E[𝔠ⱼ δ_x(𝔠₀)]`.
pub fn delta_kde(c0: &[f64], cj: &[f64], x: f64, order: u32, bandwidth: f64) -> Result<f64> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(invalid(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    if order > 2 {
        return Err(invalid(format!(
            "kernel derivative order {order} exceeds 2"
        )));
    }
    if c0.len() != cj.len() || c0.is_empty() {
        return Err(invalid(
            "coefficient columns must be non-empty and of equal length",
        ));
    }
    let total = exact_sum(
        c0.iter()
            .zip(cj)
            .map(|(&c, &w)| w * kernel_derivative(x - c, bandwidth, order)),
    );
    Ok(total / c0.len() as f64)
}
