//! Expansion densities and the weak-form evaluator.
//!
//! Two routes are offered. The density form assembles `pₙ(z, x)` from
//! kernel estimates of `E[𝔠ⱼ δ_x(𝔠₀)]` and is meant for plotting. The weak
//! form moves every derivative onto the test function and needs no density
//! estimate, so it is the one used for quantitative checks.

mod gaussian;
mod kde;
mod pn;
mod qn;
pub mod studentize;
mod weak;

use std::borrow::Cow;

use serde::Serialize;

use crate::accum::mean_se;
use crate::error::{invalid, Error, Result};
use crate::symbols::{full_symbol_wiener, DiffusionCoeffs, RandomSymbol, WienerCoeffs};

pub use gaussian::{gaussian_derivative, gaussian_pdf, hermite_he, std_normal_cdf, INV_SQRT_2PI};
pub use kde::{delta_kde, kernel_derivative, KdeBandwidths, DEGENERATE_LABEL};
pub use pn::{joint_pn_density, PnValue};
pub use qn::{qn_cdf, qn_expectation, studentized_qn, CoefficientMoments};
pub use weak::{
    marginal_density, weak_form_expectation, OnStatistic, Power, ScalarFunction, ScalarRegistry,
    Sine, Studentized, TestFunction, WeakFormValue,
};

/// Expansion coefficients of one path.
#[derive(Clone, Debug, PartialEq)]
pub enum PathCoeffs {
    Wiener(WienerCoeffs),
    Symbol(RandomSymbol),
}

/// Per-path entry of the sample store.
#[derive(Clone, Debug, PartialEq)]
pub struct PathRecord {
    pub replication: u64,
    /// Variance of the mixed-normal limit, `C∞`.
    pub c_inf: f64,
    /// Value of the reference functional, `F∞`.
    pub f_inf: f64,
    pub coeffs: PathCoeffs,
}

impl PathRecord {
    pub fn wiener(replication: u64, c: WienerCoeffs) -> Self {
        Self {
            replication,
            c_inf: c.c0,
            f_inf: c.c0,
            coeffs: PathCoeffs::Wiener(c),
        }
    }

    pub fn diffusion(replication: u64, c: &DiffusionCoeffs) -> Self {
        Self {
            replication,
            c_inf: c.c_inf,
            f_inf: c.f_inf,
            coeffs: PathCoeffs::Symbol(c.symbol()),
        }
    }

    /// The full random symbol of this path.
    pub fn symbol(&self) -> Cow<'_, RandomSymbol> {
        match &self.coeffs {
            PathCoeffs::Wiener(c) => Cow::Owned(full_symbol_wiener(c)),
            PathCoeffs::Symbol(s) => Cow::Borrowed(s),
        }
    }

    pub fn wiener_coeffs(&self) -> Option<&WienerCoeffs> {
        match &self.coeffs {
            PathCoeffs::Wiener(c) => Some(c),
            PathCoeffs::Symbol(_) => None,
        }
    }
}

fn wiener_columns(records: &[PathRecord]) -> Result<Vec<WienerCoeffs>> {
    records
        .iter()
        .map(|r| {
            let c = r.wiener_coeffs().copied().ok_or_else(|| {
                Error::Unsupported("closed-form moments need Wiener-case coefficients".into())
            })?;
            if !(c.c0 > 0.0) {
                return Err(Error::Degenerate(format!(
                    "𝔠₀ = {} at replication {}",
                    c.c0, r.replication
                )));
            }
            Ok(c)
        })
        .collect()
}

/// Monte Carlo means of `𝔠₀^{-1/2}𝔠₁`, `𝔠₀^{-5/2}𝔠₂`, `𝔠₀^{-3/2}𝔠₃`.
pub fn coefficient_moments(records: &[PathRecord]) -> Result<CoefficientMoments> {
    if records.is_empty() {
        return Err(invalid("coefficient moments need a non-empty store"));
    }
    let cs = wiener_columns(records)?;
    let col = |f: &dyn Fn(&WienerCoeffs) -> f64| mean_se(&cs.iter().map(f).collect::<Vec<_>>());
    let m1 = col(&|c| c.c1 / c.c0.sqrt());
    let m2 = col(&|c| c.c2 * c.c0.powf(-2.5));
    let m3 = col(&|c| c.c3 * c.c0.powf(-1.5));
    Ok(CoefficientMoments {
        m1: m1.mean,
        m2: m2.mean,
        m3: m3.mean,
        se1: m1.se,
        se2: m2.se,
        se3: m3.se,
        n_samples: records.len(),
    })
}

/// Sample store plus everything derived from it.
#[derive(Clone, Debug)]
pub struct DensityModel {
    pub records: Vec<PathRecord>,
    pub n: usize,
    /// Present when every record carries Wiener-case coefficients.
    pub moments: Option<CoefficientMoments>,
    pub bandwidths: KdeBandwidths,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensitySummary {
    pub n: usize,
    #[serde(rename = "N")]
    pub n_samples: usize,
    pub moments: Option<CoefficientMoments>,
    pub bandwidths: KdeBandwidths,
}

impl DensityModel {
    /// Records are sorted by replication so the store does not depend on
    /// the order in which workers delivered them.
    pub fn new(mut records: Vec<PathRecord>, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("n must be at least 2, got {n}")));
        }
        if records.is_empty() {
            return Err(invalid("density model needs a non-empty store"));
        }
        records.sort_by_key(|r| r.replication);
        if let Some(r) = records
            .iter()
            .find(|r| !(r.c_inf > 0.0) || !r.f_inf.is_finite())
        {
            return Err(Error::Degenerate(format!(
                "C∞ = {} at replication {}",
                r.c_inf, r.replication
            )));
        }
        let moments = if records.iter().all(|r| r.wiener_coeffs().is_some()) {
            Some(coefficient_moments(&records)?)
        } else {
            None
        };
        let c0: Vec<f64> = records.iter().map(|r| r.c_inf).collect();
        Ok(Self {
            bandwidths: KdeBandwidths::silverman(&c0),
            records,
            n,
            moments,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.records.len()
    }

    pub fn c0_column(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.c_inf).collect()
    }

    /// Column `j` of the Wiener coefficients (`j = 0` gives `𝔠₀`).
    pub fn column(&self, j: usize) -> Result<Vec<f64>> {
        let cs = wiener_columns(&self.records)?;
        let pick = |c: &WienerCoeffs| match j {
            0 => Ok(c.c0),
            1 => Ok(c.c1),
            2 => Ok(c.c2),
            3 => Ok(c.c3),
            _ => Err(invalid(format!("coefficient index {j} is not in 0..=3"))),
        };
        cs.iter().map(pick).collect()
    }

    pub fn summary(&self) -> DensitySummary {
        DensitySummary {
            n: self.n,
            n_samples: self.records.len(),
            moments: self.moments,
            bandwidths: self.bandwidths.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_record(rep: u64, level: f64) -> PathRecord {
        let a = level;
        PathRecord::wiener(
            rep,
            WienerCoeffs {
                c0: 2.0 * a * a,
                c1: 2.0 / 3.0 * a,
                c2: 0.0,
                c3: 0.0,
            },
        )
    }

    #[test]
    fn constant_a_moments() {
        for level in [1.0, 2.0] {
            let recs: Vec<_> = (0..5).map(|i| unit_record(i, level)).collect();
            let m = coefficient_moments(&recs).unwrap();
            assert!((m.m1 - std::f64::consts::SQRT_2 / 3.0).abs() < 1e-15);
            assert_eq!((m.m2, m.m3, m.se1), (0.0, 0.0, 0.0));
            assert_eq!(m.n_samples, 5);
        }
    }

    #[test]
    fn empty_and_degenerate_stores_fail() {
        assert!(coefficient_moments(&[]).is_err());
        let mut bad = unit_record(7, 1.0);
        bad.coeffs = PathCoeffs::Wiener(WienerCoeffs {
            c0: 0.0,
            ..Default::default()
        });
        let err = coefficient_moments(&[unit_record(0, 1.0), bad]).unwrap_err();
        assert!(err.to_string().contains('7'), "{err}");
    }

    #[test]
    fn store_is_order_insensitive() {
        let a: Vec<_> = (0..6)
            .map(|i| unit_record(i, 1.0 + i as f64 * 0.1))
            .collect();
        let mut b = a.clone();
        b.reverse();
        let (ma, mb) = (
            DensityModel::new(a, 16).unwrap(),
            DensityModel::new(b, 16).unwrap(),
        );
        assert_eq!(ma.moments, mb.moments);
        assert_eq!(ma.records, mb.records);
    }
}
