//! Weak-form evaluation: `∫ f pₙ` with the adjoint derivatives moved onto `f`.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::accum::{exact_sum, mean_se};
use crate::error::{invalid, Error, Result};
use crate::quadrature::default_rule;

use super::gaussian::gaussian_derivative;
use super::studentize::ChainPoly;
use super::PathRecord;

/// A smooth function of one variable with analytic derivatives.
pub trait ScalarFunction: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    /// `g^{(order)}(y)`, or `None` if that handle is not available.
    fn derivative(&self, order: u32, y: f64) -> Option<f64>;
    fn value(&self, y: f64) -> f64 {
        self.derivative(0, y).expect("every function has a value")
    }
}

/// `y^p`
#[derive(Clone, Copy, Debug)]
pub struct Power(pub u32);

impl ScalarFunction for Power {
    fn name(&self) -> String {
        match self.0 {
            0 => "one".into(),
            1 => "z".into(),
            p => format!("z{p}"),
        }
    }

    fn derivative(&self, order: u32, y: f64) -> Option<f64> {
        let p = self.0;
        if order > p {
            return Some(0.0);
        }
        let falling: f64 = (0..order).map(|i| (p - i) as f64).product();
        Some(falling * y.powi((p - order) as i32))
    }
}

/// `sin y`
#[derive(Clone, Copy, Debug)]
pub struct Sine;

impl ScalarFunction for Sine {
    fn name(&self) -> String {
        "sin".into()
    }

    fn derivative(&self, order: u32, y: f64) -> Option<f64> {
        Some(match order % 4 {
            0 => y.sin(),
            1 => y.cos(),
            2 => -y.sin(),
            _ => -y.cos(),
        })
    }
}

/// Named scalar test functions.
#[derive(Clone)]
pub struct ScalarRegistry {
    entries: BTreeMap<String, Arc<dyn ScalarFunction>>,
}

impl Default for ScalarRegistry {
    fn default() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        for p in 0..=3 {
            r.register(Arc::new(Power(p)));
        }
        r.register(Arc::new(Sine));
        r
    }
}

impl ScalarRegistry {
    pub fn register(&mut self, f: Arc<dyn ScalarFunction>) {
        self.entries.insert(f.name(), f);
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ScalarFunction>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownName {
                kind: "test function",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }
}

/// A test function `f(z, x)` of the pair `(Zₙ, Fₙ)`.
pub trait TestFunction: Send + Sync {
    fn name(&self) -> String;
    /// `∂_z^m ∂_x^k f(z, x)`, or `None` if that handle is not available.
    fn derivative(&self, m: u32, k: u32, z: f64, x: f64) -> Option<f64>;
}

/// `f(z, x) = g(z)`
#[derive(Clone, Debug)]
pub struct OnStatistic(pub Arc<dyn ScalarFunction>);

impl TestFunction for OnStatistic {
    fn name(&self) -> String {
        self.0.name()
    }

    fn derivative(&self, m: u32, k: u32, z: f64, _x: f64) -> Option<f64> {
        if k > 0 {
            return Some(0.0);
        }
        self.0.derivative(m, z)
    }
}

const TABLE_M: u32 = 6;
const TABLE_K: u32 = 2;

/// `f(z, x) = g(z x^{-1/2})`, the studentized statistic.
#[derive(Clone, Debug)]
pub struct Studentized {
    g: Arc<dyn ScalarFunction>,
    table: Vec<Vec<ChainPoly>>,
}

impl Studentized {
    pub fn new(g: Arc<dyn ScalarFunction>) -> Self {
        let table = (0..=TABLE_M)
            .map(|m| (0..=TABLE_K).map(|k| ChainPoly::derivative(m, k)).collect())
            .collect();
        Self { g, table }
    }
}

impl TestFunction for Studentized {
    fn name(&self) -> String {
        format!("studentized-{}", self.g.name())
    }

    fn derivative(&self, m: u32, k: u32, z: f64, x: f64) -> Option<f64> {
        if !(x > 0.0) {
            return None;
        }
        let owned;
        let poly = if m <= TABLE_M && k <= TABLE_K {
            &self.table[m as usize][k as usize]
        } else {
            owned = ChainPoly::derivative(m, k);
            &owned
        };
        let w = x.sqrt().recip();
        let y = z * w;
        let missing = Cell::new(false);
        let v = poly.eval(y, w, &|nu, y| {
            self.g.derivative(nu, y).unwrap_or_else(|| {
                missing.set(true);
                f64::NAN
            })
        });
        (!missing.get()).then_some(v)
    }
}

/// Result of the weak-form evaluator. `total = first_order + correction / √n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeakFormValue {
    pub first_order: f64,
    /// Coefficient of `n^{-1/2}`.
    pub correction: f64,
    pub total: f64,
    /// Monte Carlo standard error of `total` over the store.
    pub se: f64,
}

fn single_k(k: &[u32]) -> Result<u32> {
    match k {
        [] => Ok(0),
        [k0] => Ok(*k0),
        _ => Err(Error::Unsupported(format!(
            "symbols over {} reference functionals",
            k.len()
        ))),
    }
}

/// `E[∫ f(z, F∞) φ(z; 0, C∞) dz] + n^{-1/2} Σ E[c ∫ ∂_z^m ∂_x^k f(z, F∞) z^d φ(z; 0, C∞) dz]`
/// over the symbol terms `c z^d (iu)^m (iv)^k`. Gauss–Hermite in `z`,
/// plain means over the store.
pub fn weak_form_expectation(
    f: &dyn TestFunction,
    n: usize,
    records: &[PathRecord],
) -> Result<WeakFormValue> {
    if records.is_empty() {
        return Err(invalid("weak form needs a non-empty store"));
    }
    if n < 2 {
        return Err(invalid(format!("n must be at least 2, got {n}")));
    }
    let rule = default_rule();
    let root_n = (n as f64).sqrt();
    let mut firsts = Vec::with_capacity(records.len());
    let mut corrs = Vec::with_capacity(records.len());
    for r in records {
        let x = r.f_inf;
        let handle = |m: u32, k: u32| -> Result<()> {
            f.derivative(m, k, 0.0, x).map(|_| ()).ok_or_else(|| {
                invalid(format!(
                    "test function {} has no ∂_z^{m}∂_x^{k} handle",
                    f.name()
                ))
            })
        };
        handle(0, 0)?;
        firsts.push(rule.expect(0.0, r.c_inf, |z| f.derivative(0, 0, z, x).unwrap()));
        let symbol = r.symbol();
        let mut parts = Vec::with_capacity(symbol.len());
        for (mono, c) in symbol.iter() {
            let k = single_k(&mono.k)?;
            handle(mono.m, k)?;
            let d = mono.z_degree as i32;
            let integral = rule.expect(0.0, r.c_inf, |z| {
                f.derivative(mono.m, k, z, x).unwrap_or(f64::NAN) * z.powi(d)
            });
            parts.push(c * integral);
        }
        corrs.push(exact_sum(parts));
    }
    let totals: Vec<f64> = firsts
        .iter()
        .zip(&corrs)
        .map(|(a, b)| a + b / root_n)
        .collect();
    let first_order = mean_se(&firsts).mean;
    let correction = mean_se(&corrs).mean;
    let total = mean_se(&totals);
    Ok(WeakFormValue {
        first_order,
        correction,
        total: total.mean,
        se: total.se,
    })
}

fn binomial(m: u32, j: u32) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

/// `(−∂_z)^m {z^d φ(z; 0, var)}` by Leibniz.
fn adjoint_term(z: f64, var: f64, m: u32, d: u32) -> Result<f64> {
    let mut acc = 0.0;
    for j in 0..=m.min(d) {
        let falling: f64 = (0..j).map(|i| (d - i) as f64).product();
        let poly = falling * z.powi((d - j) as i32);
        acc += binomial(m, j) * poly * gaussian_derivative(z, 0.0, var, m - j)?;
    }
    Ok(if m % 2 == 0 { acc } else { -acc })
}

/// Marginal density of `Zₙ` implied by the expansion, without kernel
/// smoothing: terms with `k ≥ 1` integrate out in `x`. Returns the first-
/// and second-order values.
pub fn marginal_density(z: f64, n: usize, records: &[PathRecord]) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(invalid("marginal density needs a non-empty store"));
    }
    let mut firsts = Vec::with_capacity(records.len());
    let mut corrs = Vec::with_capacity(records.len());
    for r in records {
        firsts.push(gaussian_derivative(z, 0.0, r.c_inf, 0)?);
        let mut parts = Vec::new();
        for (mono, c) in r.symbol().iter() {
            if single_k(&mono.k)? == 0 {
                parts.push(c * adjoint_term(z, r.c_inf, mono.m, mono.z_degree)?);
            }
        }
        corrs.push(exact_sum(parts));
    }
    let first = exact_sum(firsts) / records.len() as f64;
    let corr = exact_sum(corrs) / records.len() as f64;
    Ok((first, first + corr / (n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::WienerCoeffs;

    fn unit_store() -> Vec<PathRecord> {
        vec![PathRecord::wiener(
            0,
            WienerCoeffs {
                c0: 2.0,
                c1: 2.0 / 3.0,
                c2: 0.0,
                c3: 0.0,
            },
        )]
    }

    fn on(g: impl ScalarFunction + 'static) -> OnStatistic {
        OnStatistic(Arc::new(g))
    }

    #[test]
    fn unit_model_moments() {
        let s = unit_store();
        let one = weak_form_expectation(&on(Power(0)), 64, &s).unwrap();
        assert!((one.total - 1.0).abs() < 1e-14);
        assert_eq!(one.correction, 0.0);
        let z2 = weak_form_expectation(&on(Power(2)), 64, &s).unwrap();
        assert!((z2.total - 2.0).abs() < 1e-12);
        let z3 = weak_form_expectation(&on(Power(3)), 64, &s).unwrap();
        assert!((z3.total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_handle_is_reported() {
        #[derive(Debug)]
        struct ValueOnly;
        impl ScalarFunction for ValueOnly {
            fn name(&self) -> String {
                "value-only".into()
            }
            fn derivative(&self, order: u32, y: f64) -> Option<f64> {
                (order == 0).then_some(y)
            }
        }
        let err = weak_form_expectation(&on(ValueOnly), 64, &unit_store()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn adjoint_matches_quadrature_by_parts() {
        // ∫ g (−∂)^m {z^d φ} = ∫ g^{(m)} z^d φ
        let (var, m, d) = (1.7, 3, 2);
        let lhs = crate::quadrature::trapezoid(
            &(0..=4000)
                .map(|i| {
                    let z = -12.0 + 24.0 * i as f64 / 4000.0;
                    z.sin() * adjoint_term(z, var, m, d).unwrap()
                })
                .collect::<Vec<_>>(),
            24.0 / 4000.0,
        );
        let rhs = default_rule().expect(0.0, var, |z| -z.cos() * z * z);
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn registry_lookup() {
        let r = ScalarRegistry::default();
        assert_eq!(r.names(), vec!["one", "sin", "z", "z2", "z3"]);
        assert!(r.get("cos").is_err());
        assert_eq!(r.get("z2").unwrap().derivative(1, 3.0), Some(6.0));
    }
}
