//! Exact chain-rule algebra for `g(z x^{-1/2})`.
//!
//! Derivatives in `(z, x)` are tracked as sums `Σ c · y^p w^q g^{(ν)}(y)`
//! with `y = z x^{-1/2}`, `w = x^{-1/2}` and rational `c`.

use std::collections::BTreeMap;

use num_rational::Ratio;

pub type Rational = Ratio<i64>;

/// `Σ c · y^p w^q g^{(ν)}(y)`, keyed by `(ν, p, q)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChainPoly {
    terms: BTreeMap<(u32, u32, i32), Rational>,
}

impl ChainPoly {
    /// `g(y)` itself.
    pub fn identity() -> Self {
        let mut out = Self::default();
        out.push((0, 0, 0), Rational::from_integer(1));
        out
    }

    fn push(&mut self, key: (u32, u32, i32), c: Rational) {
        if c == Rational::from_integer(0) {
            return;
        }
        let slot = self.terms.entry(key).or_insert(Rational::from_integer(0));
        *slot += c;
        if *slot == Rational::from_integer(0) {
            self.terms.remove(&key);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32, i32), Rational)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: Rational) -> Self {
        let mut out = Self::default();
        for (k, v) in self.iter() {
            out.push(k, v * c);
        }
        out
    }

    /// `∂_z`: `∂_z y = w`, `∂_z w = 0`.
    pub fn dz(&self) -> Self {
        let mut out = Self::default();
        for ((nu, p, q), c) in self.iter() {
            if p > 0 {
                out.push((nu, p - 1, q + 1), c * Rational::from_integer(p as i64));
            }
            out.push((nu + 1, p, q + 1), c);
        }
        out
    }

    /// `−∂_x`: `∂_x y = −½ y w²`, `∂_x w = −½ w³`.
    pub fn neg_dx(&self) -> Self {
        let half = Rational::new(1, 2);
        let mut out = Self::default();
        for ((nu, p, q), c) in self.iter() {
            out.push(
                (nu, p, q + 2),
                c * half * Rational::from_integer(p as i64 + q as i64),
            );
            out.push((nu + 1, p + 1, q + 2), c * half);
        }
        out
    }

    /// `∂_z^m ∂_x^k g(z x^{-1/2})`.
    pub fn derivative(m: u32, k: u32) -> Self {
        let mut out = Self::identity();
        for _ in 0..k {
            out = out.neg_dx();
        }
        if k % 2 == 1 {
            out = out.scale(Rational::from_integer(-1));
        }
        for _ in 0..m {
            out = out.dz();
        }
        out
    }

    /// Numeric value given `g^{(ν)}` at `y`.
    pub fn eval(&self, y: f64, w: f64, g: &dyn Fn(u32, f64) -> f64) -> f64 {
        self.iter()
            .map(|((nu, p, q), c)| {
                let cf = *c.numer() as f64 / *c.denom() as f64;
                cf * y.powi(p as i32) * w.powi(q) * g(nu, y)
            })
            .sum()
    }

    /// Largest `ν` appearing.
    pub fn max_order(&self) -> u32 {
        self.terms.keys().map(|k| k.0).max().unwrap_or(0)
    }
}
