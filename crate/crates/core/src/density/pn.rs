use serde::Serialize;

use crate::error::Result;

use super::gaussian::gaussian_derivative;
use super::kde::{delta_kde, KdeBandwidths, DEGENERATE_LABEL};
use super::DensityModel;

/// One evaluation of the joint density `pₙ(z, x)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PnValue {
    pub first_order: f64,
    pub second_order: f64,
    /// False outside the sample range of `𝔠₀` or for a degenerate store.
    pub reliable: bool,
    pub label: Option<&'static str>,
}

/// `pₙ = φ(z;0,x)E[δ_x(𝔠₀)] + n^{-1/2}(p₁ + p₂ + p₃)` with
/// `p₁ = E[𝔠₁δ_x(𝔠₀)] ∂_z²{zφ}`, `p₂ = −16 ∂_x²E[𝔠₂δ_x(𝔠₀)] ∂_zφ`,
/// `p₃ = 4 ∂_xE[𝔠₃δ_x(𝔠₀)] ∂_zφ`, every `E[· δ_x]` a kernel estimate.
///
/// `bandwidths` overrides the store's own rule.
pub fn joint_pn_density(
    z: f64,
    x: f64,
    model: &DensityModel,
    bandwidths: Option<&KdeBandwidths>,
) -> Result<PnValue> {
    let bw = bandwidths.unwrap_or(&model.bandwidths);
    let c0 = model.column(0)?;
    let ones = vec![1.0; c0.len()];
    let phi = gaussian_derivative(z, 0.0, x, 0)?;
    let d1 = gaussian_derivative(z, 0.0, x, 1)?;
    let d2 = gaussian_derivative(z, 0.0, x, 2)?;
    let e0 = delta_kde(&c0, &ones, x, 0, bw.for_order(0))?;
    let e1 = delta_kde(&c0, &model.column(1)?, x, 0, bw.for_order(0))?;
    let e2 = delta_kde(&c0, &model.column(2)?, x, 2, bw.for_order(2))?;
    let e3 = delta_kde(&c0, &model.column(3)?, x, 1, bw.for_order(1))?;
    let first = phi * e0;
    let p1 = e1 * (2.0 * d1 + z * d2);
    let p2 = -16.0 * e2 * d1;
    let p3 = 4.0 * e3 * d1;
    let lo = c0.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = c0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = bw.degenerate;
    Ok(PnValue {
        first_order: first,
        second_order: first + (p1 + p2 + p3) / (model.n as f64).sqrt(),
        reliable: !degenerate && x >= lo && x <= hi,
        label: degenerate.then_some(DEGENERATE_LABEL),
    })
}
