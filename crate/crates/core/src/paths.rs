//! Two-level time grids, Brownian paths with exact block areas, and the
//! fine-grid state integrators.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::ModelSpec;
use crate::rng::{std_normal, StreamId, StreamRng, INITIAL_LANE};

/// Uniform coarse grid `t_j = j/n`, each interval split into `R` fine steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TimeGrid {
    n: usize,
    refinement: usize,
}

pub fn build_grid(n: usize, refinement: usize) -> Result<TimeGrid> {
    if n < 2 {
        return Err(invalid(format!("n must be at least 2, got {n}")));
    }
    if refinement < 1 {
        return Err(invalid(format!(
            "refinement R must be at least 1, got {refinement}"
        )));
    }
    Ok(TimeGrid { n, refinement })
}

impl TimeGrid {
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn refinement(&self) -> usize {
        self.refinement
    }

    /// Number of fine steps `nR`.
    #[inline]
    pub fn fine_len(&self) -> usize {
        self.n * self.refinement
    }

    #[inline]
    pub fn coarse_step(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn fine_step(&self) -> f64 {
        1.0 / self.fine_len() as f64
    }

    /// `rₙ = n^{-1/2}`
    #[inline]
    pub fn rn(&self) -> f64 {
        1.0 / (self.n as f64).sqrt()
    }

    #[inline]
    pub fn coarse_time(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    pub fn coarse_times(&self) -> Vec<f64> {
        (0..=self.n).map(|j| self.coarse_time(j)).collect()
    }

    #[inline]
    pub fn fine_time(&self, k: usize) -> f64 {
        k as f64 / self.fine_len() as f64
    }

    /// Fine index of `t_j`.
    #[inline]
    pub fn coarse_node(&self, j: usize) -> usize {
        j * self.refinement
    }
}

/// Per coarse interval: `Δⱼw` and `Jⱼ = ∫_{Iⱼ} (s − t_{j−1}) dw_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockGaussians {
    pub dw: Vec<f64>,
    pub j: Vec<f64>,
    /// `E[Δw(ΔtΔw − J)] / (Δt²/2)` for the way `J` was realized: 1 for the
    /// exact pair, `1 − 1/R` for the left-point fine-grid sum.
    pub drift_weight: f64,
}

impl BlockGaussians {
    /// The `J` realized by the left-point rule on the fine grid,
    /// `ΔtΔw − h Σ_{k<R} (w_{s_k} − w_{t_{j−1}})`.
    ///
    /// This is the block area seen by an Euler scheme on the same path; the
    /// remainder of the quadratic-form expansion is computed against it so
    /// that the drift contribution of the discretized path cancels exactly.
    pub fn euler_consistent(path: &BrownianPath, grid: &TimeGrid) -> Self {
        let (r, h, dt) = (grid.refinement(), grid.fine_step(), grid.coarse_step());
        let mut dw = Vec::with_capacity(grid.n());
        let mut jv = Vec::with_capacity(grid.n());
        for j in 0..grid.n() {
            let base = grid.coarse_node(j);
            let w0 = path.nodes[base];
            let inc = path.nodes[base + r] - w0;
            let riemann: f64 = (0..r).map(|k| path.nodes[base + k] - w0).sum();
            dw.push(inc);
            jv.push(dt * inc - h * riemann);
        }
        Self {
            dw,
            j: jv,
            drift_weight: 1.0 - 1.0 / r as f64,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BrownianPath {
    /// `w` at the `nR + 1` fine nodes.
    pub nodes: Vec<f64>,
    /// `nodes[k+1] − nodes[k]`.
    pub increments: Vec<f64>,
    /// Exactly sampled block pairs, coupled to the coarse increments.
    pub blocks: BlockGaussians,
    pub stream: StreamId,
}

impl BrownianPath {
    #[inline]
    pub fn coarse_increment(&self, grid: &TimeGrid, j: usize) -> f64 {
        self.nodes[grid.coarse_node(j + 1)] - self.nodes[grid.coarse_node(j)]
    }

    pub fn coarse_increments(&self, grid: &TimeGrid) -> Vec<f64> {
        (0..grid.n())
            .map(|j| self.coarse_increment(grid, j))
            .collect()
    }
}

/// Draw `(Δw, J)` for one coarse interval from its lane.
fn block_pair(rng: &mut StreamRng, dt: f64) -> (f64, f64) {
    let dw = dt.sqrt() * std_normal(rng);
    let j = 0.5 * dt * dw + (dt * dt * dt / 12.0).sqrt() * std_normal(rng);
    (dw, j)
}

/// Sample `(Δⱼw, Jⱼ)` exactly, using the same draws as [`sample_brownian`]
/// on the same stream.
pub fn sample_block_pair(grid: &TimeGrid, stream: StreamId) -> BlockGaussians {
    let dt = grid.coarse_step();
    let (dw, j) = (0..grid.n())
        .map(|j| block_pair(&mut stream.lane(j as u64), dt))
        .unzip();
    BlockGaussians {
        dw,
        j,
        drift_weight: 1.0,
    }
}

/// Brownian path on the fine grid.
///
/// Each coarse interval first draws `(Δw, J)`, then fills the fine nodes
/// conditionally on both, so refining `R` refines the path instead of
/// resampling it.
pub fn sample_brownian(grid: &TimeGrid, stream: StreamId) -> BrownianPath {
    let (n, r) = (grid.n(), grid.refinement());
    let dt = grid.coarse_step();
    let mut nodes = vec![0.0; n * r + 1];
    let mut dws = Vec::with_capacity(n);
    let mut js = Vec::with_capacity(n);
    let mut local = vec![0.0; r + 1];
    let mut scratch = Vec::with_capacity(r);

    for j in 0..n {
        let mut rng = stream.lane(j as u64);
        let (dw, area) = block_pair(&mut rng, dt);
        local.fill(0.0);
        local[r] = dw;
        if r.is_power_of_two() {
            fill_dyadic(&mut rng, &mut local, dt, dw, area, &mut scratch);
        } else {
            fill_flat(&mut rng, &mut local, dt, dw, area, &mut scratch);
        }
        let base = j * r;
        let w0 = nodes[base];
        for k in 1..r {
            nodes[base + k] = w0 + local[k];
        }
        nodes[base + r] = w0 + dw;
        dws.push(dw);
        js.push(area);
    }

    let increments = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    BrownianPath {
        nodes,
        increments,
        blocks: BlockGaussians {
            dw: dws,
            j: js,
            drift_weight: 1.0,
        },
        stream,
    }
}

/// Lévy midpoint refinement conditioned on the block area.
///
/// `resid` tracks `E = ∫ w − Σ_i (h/2)(l_i + r_i)` over the current
/// partition; each level draws the midpoint displacements and the hidden
/// sub-level area jointly, then conditions their sum on `E`.
fn fill_dyadic(
    rng: &mut StreamRng,
    local: &mut [f64],
    dt: f64,
    dw: f64,
    area: f64,
    d: &mut Vec<f64>,
) {
    let r = local.len() - 1;
    let mut resid = (dt * dw - area) - 0.5 * dt * dw;
    let mut step = r;
    while step > 1 {
        let half = step / 2;
        let k = r / step;
        let h = dt * step as f64 / r as f64;
        d.clear();
        for _ in 0..k {
            d.push(0.5 * h.sqrt() * std_normal(rng));
        }
        let hidden = (k as f64 * h * h * h / 48.0).sqrt() * std_normal(rng);
        let b = 0.5 * h * d.iter().sum::<f64>() + hidden;
        let shift = 1.5 / (k as f64 * h) * (resid - b);
        for (i, di) in d.iter_mut().enumerate() {
            *di += shift;
            let (l, rt) = (local[i * step], local[(i + 1) * step]);
            local[i * step + half] = 0.5 * (l + rt) + *di;
        }
        resid -= 0.5 * h * d.iter().sum::<f64>();
        step = half;
    }
}

/// Gaussian conditioning of all `R` fine increments on `(Δw, J)` at once,
/// for refinements that are not powers of two.
fn fill_flat(
    rng: &mut StreamRng,
    local: &mut [f64],
    dt: f64,
    dw: f64,
    area: f64,
    xi: &mut Vec<f64>,
) {
    let r = local.len() - 1;
    let h = dt / r as f64;
    xi.clear();
    let (mut y1, mut y2) = (0.0, 0.0);
    for k in 0..r {
        let x = h.sqrt() * std_normal(rng);
        let m = (k as f64 + 0.5) * h;
        xi.push(x);
        y1 += x;
        y2 += m * x;
    }
    y2 += (r as f64 * h * h * h / 12.0).sqrt() * std_normal(rng);

    let sum_m: f64 = (0..r).map(|k| (k as f64 + 0.5) * h).sum();
    let sum_m2: f64 = (0..r).map(|k| ((k as f64 + 0.5) * h).powi(2)).sum();
    let v11 = r as f64 * h;
    let v12 = h * sum_m;
    let v22 = h * sum_m2 + r as f64 * h * h * h / 12.0;
    let det = v11 * v22 - v12 * v12;
    let (e1, e2) = (dw - y1, area - y2);
    let g1 = (v22 * e1 - v12 * e2) / det;
    let g2 = (-v12 * e1 + v11 * e2) / det;
    let mut acc = 0.0;
    for (k, x) in xi.iter().enumerate() {
        let m = (k as f64 + 0.5) * h;
        acc += x + h * g1 + h * m * g2;
        if k + 1 < r {
            local[k + 1] = acc;
        }
    }
}

/// `(I₁₁, I₁₁₁)` for coarse interval `j`, in closed form from `Δⱼw`.
pub fn iterated_integrals(path: &BrownianPath, grid: &TimeGrid, j: usize) -> (f64, f64) {
    iterated_from_increment(path.coarse_increment(grid, j), grid.coarse_step())
}

#[inline]
pub fn iterated_from_increment(dw: f64, dt: f64) -> (f64, f64) {
    (0.5 * (dw * dw - dt), (dw * dw * dw - 3.0 * dt * dw) / 6.0)
}

#[derive(Clone, Debug)]
pub struct DiffusionPath {
    /// `X` at every fine node.
    pub x: Vec<f64>,
    /// `X_{t_{j−1}}` for each coarse interval.
    pub frozen: Vec<f64>,
    pub refinement: usize,
}

impl DiffusionPath {
    #[inline]
    pub fn coarse_increment(&self, j: usize) -> f64 {
        let r = self.refinement;
        self.x[(j + 1) * r] - self.x[j * r]
    }
}

/// Coefficients at one state value, as needed by the variation equations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub b1: f64,
    pub b2: f64,
    pub s: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl Jet {
    pub fn at(spec: &ModelSpec, x: f64) -> Self {
        Self {
            b1: spec.drift.d1(x),
            b2: spec.drift.d2(x),
            s: spec.diffusion.value(x),
            s1: spec.diffusion.d1(x),
            s2: spec.diffusion.d2(x),
            s3: spec.diffusion.d3(x),
        }
    }
}

/// A one-step time-discretization of the state and of its first two
/// Malliavin variation equations.
pub trait Scheme: Send + Sync {
    fn name(&self) -> &'static str;

    fn step_state(&self, spec: &ModelSpec, x: f64, h: f64, dw: f64) -> f64;

    /// `dY = b'Y dt + σ'Y dw`
    fn step_first(&self, jet: &Jet, y: f64, h: f64, dw: f64) -> f64;

    /// `dZ = (b''PQ + b'Z) dt + (σ''PQ + σ'Z) dw`
    fn step_second(&self, jet: &Jet, z: f64, p: f64, q: f64, h: f64, dw: f64) -> f64;
}

pub struct Euler;
pub struct Milstein;

impl Scheme for Euler {
    fn name(&self) -> &'static str {
        "euler"
    }

    #[inline]
    fn step_state(&self, spec: &ModelSpec, x: f64, h: f64, dw: f64) -> f64 {
        x + spec.drift.value(x) * h + spec.diffusion.value(x) * dw
    }

    #[inline]
    fn step_first(&self, jet: &Jet, y: f64, h: f64, dw: f64) -> f64 {
        y + jet.b1 * y * h + jet.s1 * y * dw
    }

    #[inline]
    fn step_second(&self, jet: &Jet, z: f64, p: f64, q: f64, h: f64, dw: f64) -> f64 {
        let pq = p * q;
        z + (jet.b2 * pq + jet.b1 * z) * h + (jet.s2 * pq + jet.s1 * z) * dw
    }
}

impl Scheme for Milstein {
    fn name(&self) -> &'static str {
        "milstein"
    }

    #[inline]
    fn step_state(&self, spec: &ModelSpec, x: f64, h: f64, dw: f64) -> f64 {
        let s = spec.diffusion.value(x);
        x + spec.drift.value(x) * h + s * dw + 0.5 * s * spec.diffusion.d1(x) * (dw * dw - h)
    }

    #[inline]
    fn step_first(&self, jet: &Jet, y: f64, h: f64, dw: f64) -> f64 {
        let corr = 0.5 * (jet.s * jet.s2 + jet.s1 * jet.s1) * y * (dw * dw - h);
        Euler.step_first(jet, y, h, dw) + corr
    }

    #[inline]
    fn step_second(&self, jet: &Jet, z: f64, p: f64, q: f64, h: f64, dw: f64) -> f64 {
        let pq = p * q;
        let g = jet.s * jet.s3 * pq
            + jet.s * jet.s2 * z
            + 3.0 * jet.s1 * jet.s2 * pq
            + jet.s1 * jet.s1 * z;
        Euler.step_second(jet, z, p, q, h, dw) + 0.5 * g * (dw * dw - h)
    }
}

/// Name-indexed collection of time-stepping schemes.
#[derive(Clone)]
pub struct SchemeRegistry {
    schemes: BTreeMap<&'static str, Arc<dyn Scheme>>,
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        let mut reg = Self {
            schemes: BTreeMap::new(),
        };
        reg.register(Arc::new(Euler));
        reg.register(Arc::new(Milstein));
        reg
    }
}

impl SchemeRegistry {
    pub fn register(&mut self, scheme: Arc<dyn Scheme>) {
        self.schemes.insert(scheme.name(), scheme);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.schemes.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Scheme>> {
        self.schemes
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownName {
                kind: "scheme",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }
}

/// Integrate the state along `path` with `scheme`.
pub fn integrate(
    spec: &ModelSpec,
    path: &BrownianPath,
    grid: &TimeGrid,
    scheme: &dyn Scheme,
) -> Result<DiffusionPath> {
    let x0 = spec.draw_initial(&mut path.stream.lane(INITIAL_LANE));
    let h = grid.fine_step();
    let mut x = Vec::with_capacity(grid.fine_len() + 1);
    x.push(x0);
    let mut cur = x0;
    for (k, &dw) in path.increments.iter().enumerate() {
        cur = scheme.step_state(spec, cur, h, dw);
        if !cur.is_finite() {
            return Err(Error::NonFiniteState {
                replication: path.stream.replication,
                step: k + 1,
            });
        }
        x.push(cur);
    }
    let r = grid.refinement();
    let frozen = (0..grid.n()).map(|j| x[j * r]).collect();
    Ok(DiffusionPath {
        x,
        frozen,
        refinement: r,
    })
}

/// Explicit Euler scheme on the fine grid.
pub fn euler_maruyama(
    spec: &ModelSpec,
    path: &BrownianPath,
    grid: &TimeGrid,
) -> Result<DiffusionPath> {
    integrate(spec, path, grid, &Euler)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Initial, Smooth};

    #[test]
    fn grid_examples() {
        let g = build_grid(4, 2).unwrap();
        assert_eq!(g.coarse_times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.fine_step(), 0.125);
        let g = build_grid(2, 1).unwrap();
        assert_eq!(g.coarse_times(), vec![0.0, 0.5, 1.0]);
        assert_eq!(g.fine_step(), 0.5);
        assert!(build_grid(1, 4).is_err());
        assert!(build_grid(4, 0).is_err());
    }

    #[test]
    fn path_endpoints_match_blocks() {
        for r in [1, 3, 8, 12] {
            let g = build_grid(5, r).unwrap();
            let p = sample_brownian(&g, StreamId::new(1, 2));
            assert_eq!(p.nodes[0], 0.0);
            assert_eq!(p.nodes.len(), 5 * r + 1);
            for j in 0..5 {
                assert!((p.coarse_increment(&g, j) - p.blocks.dw[j]).abs() < 1e-14);
            }
            assert_eq!(sample_block_pair(&g, StreamId::new(1, 2)), p.blocks);
        }
    }

    #[test]
    fn area_is_reproduced_by_fine_nodes_in_the_limit() {
        let g = build_grid(3, 1024).unwrap();
        let p = sample_brownian(&g, StreamId::new(9, 0));
        let (r, h, dt) = (g.refinement(), g.fine_step(), g.coarse_step());
        for j in 0..3 {
            let base = j * r;
            let w0 = p.nodes[base];
            let trap: f64 = (0..r)
                .map(|k| 0.5 * h * (p.nodes[base + k] + p.nodes[base + k + 1] - 2.0 * w0))
                .sum();
            let target = dt * p.blocks.dw[j] - p.blocks.j[j];
            // what remains is the area of the within-step bridges
            let sd = (r as f64 * h.powi(3) / 12.0).sqrt();
            assert!((trap - target).abs() < 6.0 * sd, "{trap} vs {target}");
            assert!(sd < 1e-4);
        }
    }

    #[test]
    fn flat_refinement_hits_area() {
        let g = build_grid(2, 6).unwrap();
        let p = sample_brownian(&g, StreamId::new(3, 1));
        let (r, h, dt) = (g.refinement(), g.fine_step(), g.coarse_step());
        for j in 0..2 {
            let base = j * r;
            let w0 = p.nodes[base];
            // Σ m_k ξ_k = ∫(s−t₀)dw for piecewise-linear w, minus the hidden part;
            // trapezoid of w is the matching observable
            let trap: f64 = (0..r)
                .map(|k| 0.5 * h * (p.nodes[base + k] + p.nodes[base + k + 1] - 2.0 * w0))
                .sum();
            let target = dt * p.blocks.dw[j] - p.blocks.j[j];
            // the flat scheme conditions Σ m_k ξ_k + η, so the trapezoid
            // differs from the target by the hidden within-step area
            assert!((trap - target).abs() < 10.0 * (r as f64 * h.powi(3) / 12.0).sqrt());
        }
    }

    #[test]
    fn refinement_is_nested() {
        let coarse = build_grid(4, 4).unwrap();
        let fine = build_grid(4, 8).unwrap();
        let id = StreamId::new(11, 5);
        let a = sample_brownian(&coarse, id);
        let b = sample_brownian(&fine, id);
        for k in 0..=16 {
            assert_eq!(a.nodes[k], b.nodes[2 * k]);
        }
    }

    #[test]
    fn additive_model_is_exact() {
        let spec = ModelSpec::new(
            "w",
            Smooth::constant(0.0),
            Smooth::constant(1.0),
            Smooth::constant(1.0),
            Initial::Point(0.3),
        );
        let g = build_grid(8, 4).unwrap();
        let p = sample_brownian(&g, StreamId::new(0, 0));
        let d = euler_maruyama(&spec, &p, &g).unwrap();
        for (x, w) in d.x.iter().zip(&p.nodes) {
            assert!((x - 0.3 - w).abs() < 1e-13);
        }
        for j in 0..8 {
            assert_eq!(d.frozen[j], d.x[4 * j]);
        }
    }

    #[test]
    fn frozen_dynamics() {
        let spec = ModelSpec::new(
            "still",
            Smooth::constant(0.0),
            Smooth::affine(0.0, 0.0),
            Smooth::constant(1.0),
            Initial::Point(1.5),
        );
        let g = build_grid(4, 4).unwrap();
        let p = sample_brownian(&g, StreamId::new(0, 1));
        let d = euler_maruyama(&spec, &p, &g).unwrap();
        assert!(d.x.iter().all(|&x| x == 1.5));
    }

    #[test]
    fn blowup_is_reported() {
        let spec = ModelSpec::new(
            "boom",
            Smooth::new(|x| x * x * x * 1e6, |x| 3e6 * x * x, |x| 6e6 * x),
            Smooth::constant(1.0),
            Smooth::constant(1.0),
            Initial::Point(10.0),
        );
        let g = build_grid(4, 2).unwrap();
        let p = sample_brownian(&g, StreamId::new(0, 0));
        assert!(matches!(
            euler_maruyama(&spec, &p, &g),
            Err(Error::NonFiniteState { replication: 0, .. })
        ));
    }

    #[test]
    fn iterated_examples() {
        let (i11, i111) = iterated_from_increment(0.3, 0.25);
        assert!((i11 + 0.08).abs() < 1e-15);
        assert!((i111 + 0.033).abs() < 1e-15);
        assert_eq!(iterated_from_increment(0.0, 0.25), (-0.125, 0.0));
    }

    #[test]
    fn registry_lookup() {
        let reg = SchemeRegistry::default();
        assert_eq!(reg.names(), vec!["euler", "milstein"]);
        assert!(reg.get("rk4").is_err());
    }
}
