//! Random symbols: finite sums `Σ c · z^d (iu)^m Π_l (iv_l)^{k_l}` with
//! real (per-path) coefficients, stored as sparse degree tables.

mod diffusion;
mod wiener;

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use diffusion::{
    adaptive_symbol_diffusion, anticipative_symbol_diffusion, diffusion_coefficients, diffusion_kh,
    sigma_ss_diffusion, DiffusionCoeffs, SigmaSsIntegrals,
};
pub use wiener::{
    adaptive_symbol_wiener, anticipative_symbol_wiener, full_symbol_wiener, wiener_coefficients,
    WienerCoeffs,
};

/// Degrees of one symbol term. Trailing zero `iv` degrees are trimmed so
/// that equal monomials compare equal whatever the declared dimension.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Monomial {
    pub m: u32,
    pub k: Vec<u32>,
    pub z_degree: u32,
}

impl Monomial {
    pub fn new(m: u32, k: &[u32], z_degree: u32) -> Self {
        let mut k = k.to_vec();
        while k.last() == Some(&0) {
            k.pop();
        }
        Self { m, k, z_degree }
    }

    /// Total `iv` degree `|k|`.
    pub fn k_total(&self) -> u32 {
        self.k.iter().sum()
    }

    fn times(&self, other: &Monomial) -> Monomial {
        let len = self.k.len().max(other.k.len());
        let k: Vec<u32> = (0..len)
            .map(|l| self.k.get(l).unwrap_or(&0) + other.k.get(l).unwrap_or(&0))
            .collect();
        Monomial::new(self.m + other.m, &k, self.z_degree + other.z_degree)
    }
}

/// One row of the serialized symbol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolTerm {
    pub m: u32,
    pub k: Vec<u32>,
    pub z_degree: u32,
    pub coefficient: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RandomSymbol {
    terms: BTreeMap<Monomial, f64>,
}

impl RandomSymbol {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(0, &[], 0, c)
    }

    /// `c · z^d (iu)^m (iv)^k`
    pub fn monomial(m: u32, k: &[u32], z_degree: u32, c: f64) -> Self {
        let mut s = Self::zero();
        s.add_term(Monomial::new(m, k, z_degree), c);
        s
    }

    /// `iu`
    pub fn iu() -> Self {
        Self::monomial(1, &[], 0, 1.0)
    }

    /// `iv_l`
    pub fn iv(l: usize) -> Self {
        let mut k = vec![0; l + 1];
        k[l] = 1;
        Self::monomial(0, &k, 0, 1.0)
    }

    /// The canonical factor `2(iu)² + 4(iv)`, i.e. `−2u² + 4iv`.
    pub fn torsion_factor() -> Self {
        Self::monomial(2, &[], 0, 2.0) + Self::monomial(0, &[1], 0, 4.0)
    }

    pub fn add_term(&mut self, mono: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        let slot = self.terms.entry(mono).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.terms.retain(|_, v| *v != 0.0);
        }
    }

    pub fn coefficient(&self, mono: &Monomial) -> f64 {
        self.terms.get(mono).copied().unwrap_or(0.0)
    }

    pub fn coeff(&self, m: u32, k: &[u32], z_degree: u32) -> f64 {
        self.coefficient(&Monomial::new(m, k, z_degree))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = Self::zero();
        for (mono, v) in self.iter() {
            out.add_term(mono.clone(), c * v);
        }
        out
    }

    pub fn pow(&self, p: u32) -> Self {
        (0..p).fold(Self::constant(1.0), |acc, _| &acc * self)
    }

    /// Value at real `(z, u, v)`; the table itself never stores complex
    /// numbers.
    pub fn evaluate(&self, z: f64, u: f64, v: &[f64]) -> Complex64 {
        self.iter()
            .map(|(mono, c)| {
                let mut real = c * z.powi(mono.z_degree as i32) * u.powi(mono.m as i32);
                for (l, &deg) in mono.k.iter().enumerate() {
                    real *= v.get(l).copied().unwrap_or(0.0).powi(deg as i32);
                }
                Complex64::new(real, 0.0) * Complex64::i().powu(mono.m + mono.k_total())
            })
            .sum()
    }

    /// Terms in the serialized form, `k` padded to `dim` entries.
    pub fn to_terms(&self, dim: usize) -> Vec<SymbolTerm> {
        self.iter()
            .map(|(mono, c)| {
                let mut k = mono.k.clone();
                k.resize(dim.max(k.len()), 0);
                SymbolTerm {
                    m: mono.m,
                    k,
                    z_degree: mono.z_degree,
                    coefficient: c,
                }
            })
            .collect()
    }

    pub fn from_terms(terms: &[SymbolTerm]) -> Self {
        let mut out = Self::zero();
        for t in terms {
            out.add_term(Monomial::new(t.m, &t.k, t.z_degree), t.coefficient);
        }
        out
    }

    /// Largest `(m, |k|, z_degree)` across terms.
    pub fn max_degrees(&self) -> (u32, u32, u32) {
        self.terms.keys().fold((0, 0, 0), |acc, mono| {
            (
                acc.0.max(mono.m),
                acc.1.max(mono.k_total()),
                acc.2.max(mono.z_degree),
            )
        })
    }
}

impl Add for RandomSymbol {
    type Output = RandomSymbol;
    fn add(self, rhs: RandomSymbol) -> RandomSymbol {
        &self + &rhs
    }
}

impl Add for &RandomSymbol {
    type Output = RandomSymbol;
    fn add(self, rhs: &RandomSymbol) -> RandomSymbol {
        let mut out = self.clone();
        for (mono, v) in rhs.iter() {
            out.add_term(mono.clone(), v);
        }
        out
    }
}

impl Sub for &RandomSymbol {
    type Output = RandomSymbol;
    fn sub(self, rhs: &RandomSymbol) -> RandomSymbol {
        self + &rhs.scale(-1.0)
    }
}

impl Sub for RandomSymbol {
    type Output = RandomSymbol;
    fn sub(self, rhs: RandomSymbol) -> RandomSymbol {
        &self - &rhs
    }
}

impl Neg for RandomSymbol {
    type Output = RandomSymbol;
    fn neg(self) -> RandomSymbol {
        self.scale(-1.0)
    }
}

impl Mul for &RandomSymbol {
    type Output = RandomSymbol;
    fn mul(self, rhs: &RandomSymbol) -> RandomSymbol {
        let mut out = RandomSymbol::zero();
        for (a, x) in self.iter() {
            for (b, y) in rhs.iter() {
                out.add_term(a.times(b), x * y);
            }
        }
        out
    }
}

impl Mul for RandomSymbol {
    type Output = RandomSymbol;
    fn mul(self, rhs: RandomSymbol) -> RandomSymbol {
        &self * &rhs
    }
}

impl Mul<f64> for RandomSymbol {
    type Output = RandomSymbol;
    fn mul(self, rhs: f64) -> RandomSymbol {
        self.scale(rhs)
    }
}
