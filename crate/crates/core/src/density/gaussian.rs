use crate::error::{invalid, Result};

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Probabilists' Hermite polynomial `He_k(x)`.
pub fn hermite_he(k: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    match k {
        0 => prev,
        _ => {
            for j in 1..k {
                let next = x * cur - j as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `φ(z; mean, var)`
#[inline]
pub fn gaussian_pdf(z: f64, mean: f64, var: f64) -> f64 {
    let d = z - mean;
    INV_SQRT_2PI / var.sqrt() * (-0.5 * d * d / var).exp()
}

/// `Φ(t)`
#[inline]
pub fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

/// `∂_z^order φ(z; mean, var) = (−1)^k var^{-k/2} He_k(u) φ`, `u = (z − mean)/√var`.
pub fn gaussian_derivative(z: f64, mean: f64, var: f64, order: u32) -> Result<f64> {
    if !(var > 0.0) {
        return Err(invalid(format!("variance must be positive, got {var}")));
    }
    let sd = var.sqrt();
    let u = (z - mean) / sd;
    let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * sd.powi(-(order as i32)) * hermite_he(order, u) * gaussian_pdf(z, mean, var))
}
