//! Exact reduction of expansion terms to the studentized density.
//!
//! A correction term integrated against `g(z/√x)` collapses to
//! `∫ g(y) Σ_e E[𝔇 𝔠₀^{-e/2}] P_e(y) φ(y) dy` with rational polynomials
//! `P_e`. Two independent routes compute the `P_e`: the chain-rule
//! expansion of `∂_z^m ∂_x^k g(z/√x)` and the `Q_{α,β,ν}` table.

use std::collections::BTreeMap;

use num_rational::Ratio;

use crate::density::studentize::{ChainPoly, Rational};
use crate::error::{Error, Result};

/// Polynomial in `y`, coefficients by ascending degree.
pub type RationalPoly = Vec<Rational>;

fn zero() -> Rational {
    Rational::from_integer(0)
}

fn int(v: i64) -> Rational {
    Rational::from_integer(v)
}

fn trim(mut p: RationalPoly) -> RationalPoly {
    while p.last() == Some(&zero()) {
        p.pop();
    }
    p
}

fn add_into(acc: &mut RationalPoly, p: &[Rational]) {
    if acc.len() < p.len() {
        acc.resize(p.len(), zero());
    }
    for (a, b) in acc.iter_mut().zip(p) {
        *a += *b;
    }
}

/// `P ↦ Q` with `−∂_y(P φ) = Q φ`, i.e. `Q = yP − P'`.
fn neg_dy_phi(p: &[Rational]) -> RationalPoly {
    let mut out = vec![zero(); p.len() + 1];
    for (i, c) in p.iter().enumerate() {
        out[i + 1] += *c;
        if i > 0 {
            out[i - 1] -= *c * int(i as i64);
        }
    }
    trim(out)
}

fn monomial(deg: u32, c: Rational) -> RationalPoly {
    let mut p = vec![zero(); deg as usize + 1];
    p[deg as usize] = c;
    p
}

/// `∂_y^α φ = (−1)^α He_α(y) φ`, as the polynomial factor.
fn phi_derivative(alpha: u32) -> RationalPoly {
    let mut p = vec![int(1)];
    for _ in 0..alpha {
        p = neg_dy_phi(&p);
    }
    if alpha % 2 == 1 {
        p.iter_mut().for_each(|c| *c = -*c);
    }
    p
}

/// Polynomial in `(y, w)`: `Σ c y^p w^q`, keyed by `(p, q)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct YwPoly {
    pub terms: BTreeMap<(u32, u32), Rational>,
}

/// `Q_{α,β,ν}(y, w) = w^α P_{β,ν}(y, w)`, where
/// `(−∂_x)^β g(z/√x) = Σ_ν P_{β,ν}(y, w) g^{(ν)}(y)`.
pub fn studentize_reduction(alpha: u32, beta: u32, nu: u32) -> Result<YwPoly> {
    if beta > 2 || nu > beta {
        return Err(Error::Unsupported(format!(
            "Q table covers β ≤ 2 and ν ≤ β, got β = {beta}, ν = {nu}"
        )));
    }
    let mut chain = ChainPoly::identity();
    for _ in 0..beta {
        chain = chain.neg_dx();
    }
    let mut out = YwPoly::default();
    for ((v, p, q), c) in chain.iter() {
        if v == nu {
            *out.terms.entry((p, q as u32 + alpha)).or_insert(zero()) += c;
        }
    }
    out.terms.retain(|_, c| *c != zero());
    Ok(out)
}

/// Reduced correction: `Σ_e E[𝔇 𝔠₀^{-e/2}] · poly_e(y) φ(y)`, keyed by `e`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Reduced {
    pub terms: BTreeMap<i32, RationalPoly>,
}

impl Reduced {
    fn add(&mut self, e: i32, p: RationalPoly) {
        let slot = self.terms.entry(e).or_default();
        add_into(slot, &p);
        *slot = trim(std::mem::take(slot));
        if slot.is_empty() {
            self.terms.remove(&e);
        }
    }
}

/// One term `c z^d (iu)^m (iv)^k` of a symbol with a common coefficient `𝔇`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RationalTerm {
    pub m: u32,
    pub k: u32,
    pub z_degree: u32,
    pub coefficient: Rational,
}

/// Chain-rule route: `∫ g(z/√x) (−∂_z)^m (−∂_x)^k {z^d E[𝔇 δ_x] φ(z;0,x)}`
/// equals `Σ c E[𝔇 𝔠₀^{-(q−d)/2}] ∫ g (−∂_y)^ν {y^{p+d} φ}` over the terms
/// `c y^p w^q g^{(ν)}` of `∂_z^m ∂_x^k g(z/√x)`.
pub fn reduce_symbol_terms(terms: &[RationalTerm]) -> Reduced {
    let mut out = Reduced::default();
    for t in terms {
        for ((nu, p, q), c) in ChainPoly::derivative(t.m, t.k).iter() {
            let mut poly = monomial(p + t.z_degree, c * t.coefficient);
            for _ in 0..nu {
                poly = neg_dy_phi(&poly);
            }
            out.add(q - t.z_degree as i32, poly);
        }
    }
    out
}

/// Table route, for terms without a `z` factor:
/// `∫ g(z/√x) ∂_z^α ∂_x^β {E[𝔇 δ_x] φ} = ∫ g Σ_ν (−∂_y)^ν {∂_y^α φ · E[Q_{α,β,ν}(y, 𝔠₀^{-1/2}) 𝔇]}`.
pub fn reduce_with_table(terms: &[RationalTerm]) -> Result<Reduced> {
    let mut out = Reduced::default();
    for t in terms {
        if t.z_degree != 0 {
            return Err(Error::Unsupported(
                "the Q table route covers terms without a z factor".into(),
            ));
        }
        // (−∂_z)^m (−∂_x)^k = (−1)^{m+k} ∂_z^m ∂_x^k
        let sign = if (t.m + t.k) % 2 == 0 {
            int(1)
        } else {
            int(-1)
        };
        let dphi = phi_derivative(t.m);
        for nu in 0..=t.k {
            let q = studentize_reduction(t.m, t.k, nu)?;
            for (&(p, e), &c) in &q.terms {
                let mut poly: RationalPoly = vec![zero(); p as usize];
                poly.extend(dphi.iter().map(|d| *d * c * t.coefficient * sign));
                for _ in 0..nu {
                    poly = neg_dy_phi(&poly);
                }
                out.add(e as i32, trim(poly));
            }
        }
    }
    Ok(out)
}

/// The Wiener-case symbols `𝔠₁ z (iu)²`, `𝔠₂ iu(2(iu)² + 4iv)²` and
/// `𝔠₃ iu(2(iu)² + 4iv)` with unit coefficients, built by binomial expansion.
pub fn wiener_terms() -> [Vec<RationalTerm>; 3] {
    let torsion = |p: u32| -> Vec<RationalTerm> {
        (0..=p)
            .map(|i| {
                let binom = (0..i).fold(1i64, |acc, j| acc * (p - j) as i64 / (j + 1) as i64);
                RationalTerm {
                    m: 2 * i + 1,
                    k: p - i,
                    z_degree: 0,
                    coefficient: Ratio::from_integer(binom * 2i64.pow(i) * 4i64.pow(p - i)),
                }
            })
            .collect()
    };
    [
        vec![RationalTerm {
            m: 2,
            k: 0,
            z_degree: 1,
            coefficient: int(1),
        }],
        torsion(2),
        torsion(1),
    ]
}
