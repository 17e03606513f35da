//! First and second Malliavin derivative flows of the diffusion along a
//! simulated path, and the tail integrals of the Wiener case.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::ModelSpec;
use crate::paths::{BrownianPath, DiffusionPath, Jet, Scheme, TimeGrid};
use crate::quadrature::trapezoid_suffix;

/// Full lower-triangular storage is allowed up to this many fine steps.
pub const FULL_MATRIX_LIMIT: usize = 4096;

/// Which times `s` the flows are materialized at.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SGrid {
    /// `s ∈ {t_0, …, t_n}`.
    #[default]
    Coarse,
    /// Every fine node; only for `nR ≤ FULL_MATRIX_LIMIT`.
    Fine,
}

impl SGrid {
    pub fn nodes(&self, grid: &TimeGrid) -> Result<Vec<usize>> {
        match self {
            SGrid::Coarse => Ok((0..=grid.n()).map(|j| grid.coarse_node(j)).collect()),
            SGrid::Fine => {
                if grid.fine_len() > FULL_MATRIX_LIMIT {
                    return Err(invalid(format!(
                        "fine s-grid needs nR ≤ {FULL_MATRIX_LIMIT}, got {}",
                        grid.fine_len()
                    )));
                }
                Ok((0..=grid.fine_len()).collect())
            }
        }
    }

    /// Spacing between consecutive s-nodes.
    pub fn spacing(&self, grid: &TimeGrid) -> f64 {
        match self {
            SGrid::Coarse => grid.coarse_step(),
            SGrid::Fine => grid.fine_step(),
        }
    }
}

/// Coefficient jets at every fine node of a path.
pub fn path_jets(spec: &ModelSpec, dpath: &DiffusionPath) -> Vec<Jet> {
    dpath.x.iter().map(|&x| Jet::at(spec, x)).collect()
}

/// `D_sX_t` for each materialized `s`; row `i` holds `t = s_i, …, 1`.
#[derive(Clone, Debug)]
pub struct FirstFlow {
    pub s_nodes: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

impl FirstFlow {
    fn row_of(&self, s: usize) -> Option<&Vec<f64>> {
        self.s_nodes.binary_search(&s).ok().map(|i| &self.rows[i])
    }

    /// `D_sX_t` at fine nodes `s` and `t`; zero for `s > t`, `None` when
    /// `s` was not materialized.
    pub fn at(&self, s: usize, t: usize) -> Option<f64> {
        if s > t {
            return Some(0.0);
        }
        self.row_of(s).and_then(|row| row.get(t - s).copied())
    }
}

fn non_finite(path: &BrownianPath, step: usize) -> Error {
    Error::NonFiniteState {
        replication: path.stream.replication,
        step,
    }
}

/// Solve `D_sX_t = σ(X_s) + ∫_s^t b'(X) D_sX du + ∫_s^t σ'(X) D_sX dw` on the
/// fine grid for every `s` in `sgrid`.
pub fn first_flow(
    jets: &[Jet],
    path: &BrownianPath,
    grid: &TimeGrid,
    sgrid: SGrid,
    scheme: &dyn Scheme,
) -> Result<FirstFlow> {
    let s_nodes = sgrid.nodes(grid)?;
    let (big_n, h) = (grid.fine_len(), grid.fine_step());
    let mut rows = Vec::with_capacity(s_nodes.len());
    for &s in &s_nodes {
        let mut row = Vec::with_capacity(big_n - s + 1);
        let mut y = jets[s].s;
        row.push(y);
        for t in s..big_n {
            y = scheme.step_first(&jets[t], y, h, path.increments[t]);
            if !y.is_finite() {
                return Err(non_finite(path, t + 1));
            }
            row.push(y);
        }
        rows.push(row);
    }
    Ok(FirstFlow { s_nodes, rows })
}

/// Solve the second variation equation for each `(r, s)` pair of fine nodes.
///
/// The returned row for a pair starts at `t = max(r, s)`. The seed is
/// `σ'(X_s) D_rX_s`; on the diagonal this is the left limit `σ'(X_s)σ(X_s)`.
pub fn second_flow(
    jets: &[Jet],
    path: &BrownianPath,
    first: &FirstFlow,
    grid: &TimeGrid,
    pairs: &[(usize, usize)],
    scheme: &dyn Scheme,
) -> Result<Vec<Vec<f64>>> {
    let (big_n, h) = (grid.fine_len(), grid.fine_step());
    pairs
        .iter()
        .map(|&(r, s)| {
            let (lo, hi) = (r.min(s), r.max(s));
            if hi > big_n {
                return Err(invalid(format!("pair ({r}, {s}) is off the grid")));
            }
            let row_lo = first
                .row_of(lo)
                .ok_or_else(|| invalid(format!("first flow was not materialized at s = {lo}")))?;
            let row_hi = first
                .row_of(hi)
                .ok_or_else(|| invalid(format!("first flow was not materialized at s = {hi}")))?;
            let mut out = Vec::with_capacity(big_n - hi + 1);
            let mut z = jets[hi].s1 * row_lo[hi - lo];
            out.push(z);
            for t in hi..big_n {
                let p = row_lo[t - lo];
                let q = row_hi[t - hi];
                z = scheme.step_second(&jets[t], z, p, q, h, path.increments[t]);
                if !z.is_finite() {
                    return Err(non_finite(path, t + 1));
                }
                out.push(z);
            }
            Ok(out)
        })
        .collect()
}

/// First flow plus the diagonal second flow `D_sD_sX_t` on one s-grid.
#[derive(Clone, Debug)]
pub struct DerivativeFlow {
    pub sgrid: SGrid,
    pub first: FirstFlow,
    /// Row `i` holds `D_sD_sX_t` for `s = first.s_nodes[i]`, `t ≥ s`.
    pub diagonal: Vec<Vec<f64>>,
}

pub fn derivative_flow(
    spec: &ModelSpec,
    dpath: &DiffusionPath,
    path: &BrownianPath,
    grid: &TimeGrid,
    sgrid: SGrid,
    scheme: &dyn Scheme,
) -> Result<DerivativeFlow> {
    let jets = path_jets(spec, dpath);
    let first = first_flow(&jets, path, grid, sgrid, scheme)?;
    let pairs: Vec<_> = first.s_nodes.iter().map(|&s| (s, s)).collect();
    let diagonal = second_flow(&jets, path, &first, grid, &pairs, scheme)?;
    Ok(DerivativeFlow {
        sgrid,
        first,
        diagonal,
    })
}

/// `(T₁, T₂)` at every fine node: `T₁(t) = ∫_t^1 aa'`,
/// `T₂(t) = ∫_t^1 (aa'' + a'²)`, trapezoid on the fine grid.
pub fn wiener_tail_profiles(
    spec: &ModelSpec,
    dpath: &DiffusionPath,
    grid: &TimeGrid,
) -> (Vec<f64>, Vec<f64>) {
    let (g1, g2): (Vec<f64>, Vec<f64>) = dpath
        .x
        .iter()
        .map(|&x| {
            let (a, a1, a2) = spec.a_jet(x);
            (a * a1, a * a2 + a1 * a1)
        })
        .unzip();
    let h = grid.fine_step();
    (trapezoid_suffix(&g1, h), trapezoid_suffix(&g2, h))
}

/// `(T₁(t), T₂(t))` at the fine node `t`.
pub fn wiener_tail_integrals(
    spec: &ModelSpec,
    dpath: &DiffusionPath,
    grid: &TimeGrid,
    t: usize,
) -> Result<(f64, f64)> {
    if t > grid.fine_len() {
        return Err(invalid(format!("node {t} is past t = 1")));
    }
    let (t1, t2) = wiener_tail_profiles(spec, dpath, grid);
    Ok((t1[t], t2[t]))
}
