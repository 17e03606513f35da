use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::malliavin::wiener_tail_profiles;
use crate::model::ModelSpec;
use crate::paths::{DiffusionPath, TimeGrid};
use crate::quadrature::trapezoid;

use super::RandomSymbol;

/// `𝔠₀ = 2∫a²`, `𝔠₁ = (2/3)∫a³ / ∫a²`, `𝔠₂ = ∫a T₁²`, `𝔠₃ = ∫a T₂`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WienerCoeffs {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// Fine-grid trapezoid values of the four coefficient integrals along `X = X₀ + w`.
pub fn wiener_coefficients(
    spec: &ModelSpec,
    dpath: &DiffusionPath,
    grid: &TimeGrid,
) -> Result<WienerCoeffs> {
    let h = grid.fine_step();
    let a: Vec<f64> = dpath.x.iter().map(|&x| spec.a(x)).collect();
    let a2: Vec<f64> = a.iter().map(|v| v * v).collect();
    let a3: Vec<f64> = a.iter().map(|v| v * v * v).collect();
    let int_a2 = trapezoid(&a2, h);
    let c0 = 2.0 * int_a2;
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::Degenerate(format!("𝔠₀ = {c0} is not positive")));
    }
    let (t1, t2) = wiener_tail_profiles(spec, dpath, grid);
    let g2: Vec<f64> = a.iter().zip(&t1).map(|(a, t)| a * t * t).collect();
    let g3: Vec<f64> = a.iter().zip(&t2).map(|(a, t)| a * t).collect();
    Ok(WienerCoeffs {
        c0,
        c1: 2.0 / 3.0 * trapezoid(&a3, h) / int_a2,
        c2: trapezoid(&g2, h),
        c3: trapezoid(&g3, h),
    })
}

/// `𝔠₁ z (iu)²`
pub fn adaptive_symbol_wiener(c: &WienerCoeffs) -> RandomSymbol {
    RandomSymbol::monomial(2, &[], 1, c.c1)
}

/// `𝔠₂ iu (2(iu)² + 4iv)² + 𝔠₃ iu (2(iu)² + 4iv)`
pub fn anticipative_symbol_wiener(c: &WienerCoeffs) -> RandomSymbol {
    let f = RandomSymbol::torsion_factor();
    let iu = RandomSymbol::iu();
    (&iu * &f.pow(2)).scale(c.c2) + (&iu * &f).scale(c.c3)
}

pub fn full_symbol_wiener(c: &WienerCoeffs) -> RandomSymbol {
    adaptive_symbol_wiener(c) + anticipative_symbol_wiener(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_coefficients_symbol() {
        let c = WienerCoeffs {
            c0: 2.0,
            c1: 2.0 / 3.0,
            c2: 0.0,
            c3: 0.0,
        };
        let s = full_symbol_wiener(&c);
        assert_eq!(s.len(), 1);
        let v = s.evaluate(1.0, 1.0, &[0.0]);
        assert!((v.re + 2.0 / 3.0).abs() < 1e-15 && v.im == 0.0);
    }

    #[test]
    fn c2_term_degree_five() {
        let c = WienerCoeffs {
            c0: 1.0,
            c1: 0.0,
            c2: 0.37,
            c3: 0.0,
        };
        let s = full_symbol_wiener(&c);
        assert_eq!(s.coeff(5, &[], 0), 4.0 * 0.37);
        assert_eq!(s.coeff(3, &[1], 0), 16.0 * 0.37);
        assert_eq!(s.coeff(1, &[2], 0), 16.0 * 0.37);
        let v = s.evaluate(0.0, 1.0, &[0.0]);
        assert!((v.im - 4.0 * 0.37).abs() < 1e-15 && v.re.abs() < 1e-15);
    }

    #[test]
    fn zero_coefficients_give_empty_symbol() {
        assert!(full_symbol_wiener(&WienerCoeffs::default()).is_empty());
    }
}
