use statrs::function::gamma::gamma_lr;

use crate::error::{invalid, Result};

/// Exact CDF of `T = (χ²ₙ − n)/√(2n)`, the studentized statistic when `a`
/// is constant: `P(n/2, (n + t√(2n))/2)`.
pub fn chisq_oracle_cdf(t: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("chi-square oracle needs n ≥ 1"));
    }
    if t.is_nan() {
        return Err(invalid("chi-square oracle evaluated at NaN"));
    }
    if t == f64::INFINITY {
        return Ok(1.0);
    }
    let nf = n as f64;
    let arg = 0.5 * (nf + t * (2.0 * nf).sqrt());
    if arg <= 0.0 {
        return Ok(0.0);
    }
    Ok(gamma_lr(0.5 * nf, arg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(chisq_oracle_cdf(f64::INFINITY, 10).unwrap(), 1.0);
        assert!((chisq_oracle_cdf(60.0, 10).unwrap() - 1.0).abs() < 1e-15);
        assert!((chisq_oracle_cdf(0.0, 100).unwrap() - 0.518_806).abs() < 5e-4);
        assert_eq!(chisq_oracle_cdf(-1.0, 2).unwrap(), 0.0);
        assert_eq!(chisq_oracle_cdf(-3.0, 2).unwrap(), 0.0);
        assert!(chisq_oracle_cdf(0.0, 0).is_err());
    }

    #[test]
    fn two_degrees_of_freedom_closed_form() {
        // χ²₂ is exponential with mean 2: P[χ² ≤ s] = 1 − e^{−s/2}
        for t in [-0.5f64, 0.0, 0.7, 2.5] {
            let s = 2.0 + 2.0 * t;
            let exact = 1.0 - (-0.5 * s).exp();
            assert!((chisq_oracle_cdf(t, 2).unwrap() - exact).abs() < 1e-13);
        }
    }
}
