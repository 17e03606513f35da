use crate::error::{Error, Result};
use crate::malliavin::{derivative_flow, DerivativeFlow, SGrid};
use crate::model::ModelSpec;
use crate::paths::{BrownianPath, DiffusionPath, Scheme, TimeGrid};
use crate::quadrature::trapezoid;

use super::RandomSymbol;

/// `k_t` and `h_t` at every fine node.
///
/// `k = 2cbσ + cσσ^{[1]} − ½c^{[1]}σ²`,
/// `h = cb² + cb^{[1]}σ − ½c^{[0]}σ² − c^{[1]}σσ^{[1]}`.
pub fn diffusion_kh(spec: &ModelSpec, dpath: &DiffusionPath) -> (Vec<f64>, Vec<f64>) {
    let (c, b, s) = (&spec.kernel_weight, &spec.drift, &spec.diffusion);
    dpath
        .x
        .iter()
        .map(|&x| {
            let (cv, bv, sv) = (c.value(x), b.value(x), s.value(x));
            let s_1 = spec.ito1(s, x);
            let c_1 = spec.ito1(c, x);
            let c_0 = spec.ito0(c, x);
            let b_1 = spec.ito1(b, x);
            let k = 2.0 * cv * bv * sv + cv * sv * s_1 - 0.5 * c_1 * sv * sv;
            let h = cv * bv * bv + cv * b_1 * sv - 0.5 * c_0 * sv * sv - c_1 * sv * s_1;
            (k, h)
        })
        .unzip()
}

fn ratio_term(spec: &ModelSpec, dpath: &DiffusionPath, grid: &TimeGrid) -> (f64, f64) {
    let h = grid.fine_step();
    let a: Vec<f64> = dpath.x.iter().map(|&x| spec.a(x)).collect();
    let a2: Vec<f64> = a.iter().map(|v| v * v).collect();
    let a3: Vec<f64> = a.iter().map(|v| v * v * v).collect();
    let int_a2 = trapezoid(&a2, h);
    (2.0 / 3.0 * trapezoid(&a3, h) / int_a2, int_a2)
}

/// `(2z/3)∫a³/∫a² (iu)² + iu (Σ k Δw + Σ h Δt)`, both sums left-point on the
/// fine grid.
pub fn adaptive_symbol_diffusion(
    spec: &ModelSpec,
    dpath: &DiffusionPath,
    path: &BrownianPath,
    grid: &TimeGrid,
    k: &[f64],
    h: &[f64],
) -> RandomSymbol {
    let (ratio, _) = ratio_term(spec, dpath, grid);
    RandomSymbol::monomial(2, &[], 1, ratio)
        + RandomSymbol::monomial(1, &[], 0, drift_term(path, grid, k, h))
}

fn drift_term(path: &BrownianPath, grid: &TimeGrid, k: &[f64], h: &[f64]) -> f64 {
    let dt = grid.fine_step();
    (0..grid.fine_len())
        .map(|t| k[t] * path.increments[t] + h[t] * dt)
        .sum()
}

/// The four path integrals behind `σ_{s,s}`:
/// `A₁ = ∫_s^1 α' D_sX`, `B₁ = ∫_s^1 β' D_sX`,
/// `A₂ = ∫_s^1 {α''(D_sX)² + α' D_sD_sX}`, `B₂ = ∫_s^1 {β''(D_sX)² + β' D_sD_sX}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SigmaSsIntegrals {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl SigmaSsIntegrals {
    /// `(A₁(iu)² + B₁ iv)² + A₂(iu)² + B₂ iv`
    pub fn symbol(&self) -> RandomSymbol {
        let lin = RandomSymbol::monomial(2, &[], 0, self.a1)
            + RandomSymbol::monomial(0, &[1], 0, self.b1);
        lin.pow(2)
            + RandomSymbol::monomial(2, &[], 0, self.a2)
            + RandomSymbol::monomial(0, &[1], 0, self.b2)
    }
}

struct Jets {
    al1: Vec<f64>,
    al2: Vec<f64>,
    be1: Vec<f64>,
    be2: Vec<f64>,
}

impl Jets {
    fn new(spec: &ModelSpec, dpath: &DiffusionPath) -> Self {
        let mut j = Jets {
            al1: Vec::with_capacity(dpath.x.len()),
            al2: Vec::with_capacity(dpath.x.len()),
            be1: Vec::with_capacity(dpath.x.len()),
            be2: Vec::with_capacity(dpath.x.len()),
        };
        for &x in &dpath.x {
            let (_, a1, a2) = spec.alpha_jet(x);
            j.al1.push(a1);
            j.al2.push(a2);
            j.be1.push(spec.reference.d1(x));
            j.be2.push(spec.reference.d2(x));
        }
        j
    }

    fn integrals(
        &self,
        flow: &DerivativeFlow,
        pos: usize,
        h: f64,
        buf: &mut [Vec<f64>; 4],
    ) -> SigmaSsIntegrals {
        let s = flow.first.s_nodes[pos];
        let d = &flow.first.rows[pos];
        let dd = &flow.diagonal[pos];
        for b in buf.iter_mut() {
            b.clear();
        }
        for (i, (&y, &z)) in d.iter().zip(dd).enumerate() {
            let t = s + i;
            buf[0].push(self.al1[t] * y);
            buf[1].push(self.be1[t] * y);
            buf[2].push(self.al2[t] * y * y + self.al1[t] * z);
            buf[3].push(self.be2[t] * y * y + self.be1[t] * z);
        }
        SigmaSsIntegrals {
            a1: trapezoid(&buf[0], h),
            b1: trapezoid(&buf[1], h),
            a2: trapezoid(&buf[2], h),
            b2: trapezoid(&buf[3], h),
        }
    }
}

/// `σ_{s,s}` at the `pos`-th materialized s-node of `flow`.
pub fn sigma_ss_diffusion(
    spec: &ModelSpec,
    flow: &DerivativeFlow,
    dpath: &DiffusionPath,
    grid: &TimeGrid,
    pos: usize,
) -> RandomSymbol {
    let mut buf = Default::default();
    Jets::new(spec, dpath)
        .integrals(flow, pos, grid.fine_step(), &mut buf)
        .symbol()
}

/// `∫₀¹ iu a(X_s) σ_{s,s} ds` by the trapezoid rule over the flow's s-grid.
pub fn anticipative_symbol_diffusion(
    spec: &ModelSpec,
    flow: &DerivativeFlow,
    dpath: &DiffusionPath,
    grid: &TimeGrid,
) -> RandomSymbol {
    let jets = Jets::new(spec, dpath);
    let h = grid.fine_step();
    let ds = flow.sgrid.spacing(grid);
    let last = flow.first.s_nodes.len() - 1;
    let mut buf = Default::default();
    // coefficients of (5,0), (3,1), (1,2), (3,0), (1,1)
    let mut acc = [0.0; 5];
    for (pos, &s) in flow.first.s_nodes.iter().enumerate() {
        let w = if pos == 0 || pos == last {
            0.5 * ds
        } else {
            ds
        };
        let q = jets.integrals(flow, pos, h, &mut buf);
        let wa = w * spec.a(dpath.x[s]);
        acc[0] += wa * q.a1 * q.a1;
        acc[1] += wa * 2.0 * q.a1 * q.b1;
        acc[2] += wa * q.b1 * q.b1;
        acc[3] += wa * q.a2;
        acc[4] += wa * q.b2;
    }
    RandomSymbol::monomial(5, &[], 0, acc[0])
        + RandomSymbol::monomial(3, &[1], 0, acc[1])
        + RandomSymbol::monomial(1, &[2], 0, acc[2])
        + RandomSymbol::monomial(3, &[], 0, acc[3])
        + RandomSymbol::monomial(1, &[1], 0, acc[4])
}

/// Per-path coefficients of the diffusion-case expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionCoeffs {
    /// `C∞ = 2∫a²`
    pub c_inf: f64,
    /// `F∞ = ∫β`
    pub f_inf: f64,
    pub adaptive: RandomSymbol,
    pub anticipative: RandomSymbol,
}

impl DiffusionCoeffs {
    pub fn symbol(&self) -> RandomSymbol {
        &self.adaptive + &self.anticipative
    }
}

pub fn diffusion_coefficients(
    spec: &ModelSpec,
    dpath: &DiffusionPath,
    path: &BrownianPath,
    grid: &TimeGrid,
    sgrid: SGrid,
    scheme: &dyn Scheme,
) -> Result<DiffusionCoeffs> {
    let (_, int_a2) = ratio_term(spec, dpath, grid);
    let c_inf = 2.0 * int_a2;
    if !(c_inf > 0.0) || !c_inf.is_finite() {
        return Err(Error::Degenerate(format!("C∞ = {c_inf} is not positive")));
    }
    let beta: Vec<f64> = dpath.x.iter().map(|&x| spec.reference.value(x)).collect();
    let f_inf = trapezoid(&beta, grid.fine_step());
    let (k, h) = diffusion_kh(spec, dpath);
    let flow = derivative_flow(spec, dpath, path, grid, sgrid, scheme)?;
    Ok(DiffusionCoeffs {
        c_inf,
        f_inf,
        adaptive: adaptive_symbol_diffusion(spec, dpath, path, grid, &k, &h),
        anticipative: anticipative_symbol_diffusion(spec, &flow, dpath, grid),
    })
}
