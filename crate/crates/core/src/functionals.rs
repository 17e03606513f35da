//! Per-path statistics: the quadratic form, its limit, the normalized error,
//! the principal martingale, the reference variable and the second-order
//! remainder.

use serde::Serialize;

use crate::model::{ExpansionCase, ModelSpec};
use crate::paths::{
    iterated_from_increment, BlockGaussians, BrownianPath, DiffusionPath, TimeGrid,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StatisticSample {
    pub z_n: f64,
    pub m1n: f64,
    pub f_n: f64,
    pub n_n: Option<f64>,
    pub u_n: f64,
    pub u_inf: f64,
    /// The `W` component of the decomposition; zero in both implemented cases.
    pub w_n: f64,
}

/// `Uₙ = Σⱼ c(X_{t_{j−1}}) (ΔⱼX)²`
pub fn quadratic_form_un(spec: &ModelSpec, dpath: &DiffusionPath) -> f64 {
    dpath
        .frozen
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let dx = dpath.coarse_increment(j);
            spec.kernel_weight.value(x) * dx * dx
        })
        .sum()
}

/// Left-Riemann sum of `c σ²` on the fine grid.
pub fn limit_u_infinity(spec: &ModelSpec, dpath: &DiffusionPath, grid: &TimeGrid) -> f64 {
    let h = grid.fine_step();
    h * dpath.x[..grid.fine_len()]
        .iter()
        .map(|&x| spec.a(x))
        .sum::<f64>()
}

/// `Zₙ = √n (Uₙ − U∞)`
#[inline]
pub fn error_statistic_zn(u_n: f64, u_inf: f64, n: usize) -> f64 {
    (n as f64).sqrt() * (u_n - u_inf)
}

/// `M₁ⁿ = n^{-1/2} Σⱼ a(X_{t_{j−1}}) ((√n Δⱼw)² − 1)`
pub fn martingale_m1n(
    spec: &ModelSpec,
    dpath: &DiffusionPath,
    path: &BrownianPath,
    grid: &TimeGrid,
) -> f64 {
    let nf = grid.n() as f64;
    dpath
        .frozen
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let dw = path.coarse_increment(grid, j);
            spec.a(x) * (nf * dw * dw - 1.0)
        })
        .sum::<f64>()
        / nf.sqrt()
}

/// The same martingale written as `√n Σⱼ 2a(X_{t_{j−1}}) I₁₁(j)`.
pub fn martingale_m1n_iterated(
    spec: &ModelSpec,
    dpath: &DiffusionPath,
    path: &BrownianPath,
    grid: &TimeGrid,
) -> f64 {
    let dt = grid.coarse_step();
    (grid.n() as f64).sqrt()
        * dpath
            .frozen
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let (i11, _) = iterated_from_increment(path.coarse_increment(grid, j), dt);
                2.0 * spec.a(x) * i11
            })
            .sum::<f64>()
}

/// `Fₙ`: `(2/n) Σ a²` in the Wiener case, `(1/n) Σ β` for diffusions.
pub fn reference_fn(spec: &ModelSpec, dpath: &DiffusionPath, grid: &TimeGrid) -> f64 {
    match spec.case {
        ExpansionCase::Wiener => discrete_bracket(spec, dpath, grid, 1.0),
        ExpansionCase::Diffusion => {
            dpath
                .frozen
                .iter()
                .map(|&x| spec.reference.value(x))
                .sum::<f64>()
                / grid.n() as f64
        }
    }
}

/// `(2/n) Σ_{j: t_j ≤ t} a(X_{t_{j−1}})²`
pub fn discrete_bracket(spec: &ModelSpec, dpath: &DiffusionPath, grid: &TimeGrid, t: f64) -> f64 {
    let n = grid.n();
    let upto = ((t * n as f64 + 1e-9).floor().max(0.0) as usize).min(n);
    2.0 * dpath.frozen[..upto]
        .iter()
        .map(|&x| {
            let a = spec.a(x);
            a * a
        })
        .sum::<f64>()
        / n as f64
}

/// The second-order remainder `Nₙ` of the stochastic expansion
/// `Zₙ = M₁ⁿ + n^{-1/2} Nₙ + o(n^{-1/2})`.
///
/// Block integrals are realized as: triple integral `→ I₁₁₁(j)`,
/// `∫dw → Δⱼw`, `∫(t − t_{j−1})dw → Jⱼ`, `∫∫dw dt → ΔtΔⱼw − Jⱼ`. The
/// `cσb'` compensator is scaled by `blocks.drift_weight` so that it matches
/// the drift an Euler fine grid actually produces.
pub fn remainder_nn(
    spec: &ModelSpec,
    dpath: &DiffusionPath,
    blocks: &BlockGaussians,
    grid: &TimeGrid,
) -> f64 {
    let nf = grid.n() as f64;
    let dt = grid.coarse_step();
    let (c, b, s) = (&spec.kernel_weight, &spec.drift, &spec.diffusion);
    let mut total = 0.0;
    for (j, &x) in dpath.frozen.iter().enumerate() {
        let (dw, area) = (blocks.dw[j], blocks.j[j]);
        let (_, i111) = iterated_from_increment(dw, dt);
        let (cv, bv, sv) = (c.value(x), b.value(x), s.value(x));
        let s_1 = spec.ito1(s, x);
        let c_1 = spec.ito1(c, x);
        let c_0 = spec.ito0(c, x);
        let b_1 = spec.ito1(b, x);

        let martingale = 6.0 * nf * cv * sv * s_1 * i111
            + 2.0 * cv * bv * sv * dw
            + 2.0 * nf * cv * sv * s_1 * area
            - nf * c_1 * sv * sv * (dt * dw - area);
        let drift = (cv * bv * bv + blocks.drift_weight * cv * sv * b_1
            - 0.5 * c_0 * sv * sv
            - c_1 * sv * s_1)
            / nf;
        total += martingale + drift;
    }
    total
}

/// All statistics of one path.
///
/// `blocks` feeds the remainder; pass `None` to skip it.
pub fn compute_sample(
    spec: &ModelSpec,
    dpath: &DiffusionPath,
    path: &BrownianPath,
    grid: &TimeGrid,
    blocks: Option<&BlockGaussians>,
) -> StatisticSample {
    let u_n = quadratic_form_un(spec, dpath);
    let u_inf = limit_u_infinity(spec, dpath, grid);
    StatisticSample {
        z_n: error_statistic_zn(u_n, u_inf, grid.n()),
        m1n: martingale_m1n(spec, dpath, path, grid),
        f_n: reference_fn(spec, dpath, grid),
        n_n: blocks.map(|b| remainder_nn(spec, dpath, b, grid)),
        u_n,
        u_inf,
        w_n: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Initial, Smooth};
    use crate::paths::{build_grid, euler_maruyama, sample_brownian};
    use crate::rng::StreamId;

    fn flat(c: f64, s: f64) -> ModelSpec {
        ModelSpec::new(
            "flat",
            Smooth::constant(0.0),
            Smooth::constant(s),
            Smooth::constant(c),
            Initial::Point(0.0),
        )
    }

    fn synthetic(x: Vec<f64>, r: usize) -> DiffusionPath {
        let frozen = x
            .iter()
            .step_by(r)
            .take((x.len() - 1) / r)
            .copied()
            .collect();
        DiffusionPath {
            x,
            frozen,
            refinement: r,
        }
    }

    #[test]
    fn un_direct_sum() {
        let d = synthetic(vec![0.0, 0.1, -0.1, 0.2, 0.25], 1);
        assert!((quadratic_form_un(&flat(1.0, 1.0), &d) - 0.1425).abs() < 1e-15);
        assert_eq!(quadratic_form_un(&flat(0.0, 1.0), &d), 0.0);
        assert!((error_statistic_zn(0.1425, 1.0, 4) + 1.715).abs() < 1e-12);
    }

    #[test]
    fn u_infinity_constants() {
        let g = build_grid(4, 3).unwrap();
        let d = synthetic(vec![0.3; 13], 3);
        assert!((limit_u_infinity(&flat(1.0, 1.0), &d, &g) - 1.0).abs() < 1e-14);
        assert!((limit_u_infinity(&flat(2.0, 3.0), &d, &g) - 18.0).abs() < 1e-13);
    }

    #[test]
    fn martingale_plug_in() {
        let g = build_grid(2, 1).unwrap();
        let spec = flat(1.0, 1.0);
        let path = BrownianPath {
            nodes: vec![0.0, 0.5, 0.0],
            increments: vec![0.5, -0.5],
            blocks: BlockGaussians {
                dw: vec![0.5, -0.5],
                j: vec![0.0, 0.0],
                drift_weight: 1.0,
            },
            stream: StreamId::new(0, 0),
        };
        let d = euler_maruyama(&spec, &path, &g).unwrap();
        let m = martingale_m1n(&spec, &d, &path, &g);
        assert!((m + std::f64::consts::SQRT_2 / 2.0).abs() < 1e-15);
        assert!((m - martingale_m1n_iterated(&spec, &d, &path, &g)).abs() < 1e-15);
    }

    #[test]
    fn constant_reference_and_bracket() {
        let g = build_grid(8, 2).unwrap();
        let p = sample_brownian(&g, StreamId::new(5, 5));
        let wiener = flat(1.0, 1.0).with_case(ExpansionCase::Wiener);
        let d = euler_maruyama(&wiener, &p, &g).unwrap();
        assert_eq!(reference_fn(&wiener, &d, &g), 2.0);
        assert_eq!(discrete_bracket(&wiener, &d, &g, 1.0), 2.0);
        assert_eq!(discrete_bracket(&wiener, &d, &g, 0.5), 1.0);
        let diff = flat(1.0, 1.0).with_reference(Smooth::constant(1.0));
        assert_eq!(reference_fn(&diff, &d, &g), 1.0);
    }

    #[test]
    fn zero_kernel_collapses() {
        let g = build_grid(8, 4).unwrap();
        let p = sample_brownian(&g, StreamId::new(5, 6));
        let spec = flat(0.0, 1.0);
        let d = euler_maruyama(&spec, &p, &g).unwrap();
        let s = compute_sample(&spec, &d, &p, &g, Some(&p.blocks));
        assert_eq!((s.u_n, s.u_inf, s.z_n, s.m1n), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(s.n_n, Some(0.0));
    }

    #[test]
    fn unit_model_has_no_remainder() {
        let g = build_grid(16, 4).unwrap();
        let p = sample_brownian(&g, StreamId::new(2, 3));
        let spec = flat(1.0, 1.0);
        let d = euler_maruyama(&spec, &p, &g).unwrap();
        assert_eq!(remainder_nn(&spec, &d, &p.blocks, &g), 0.0);
    }

    #[test]
    fn ou_remainder_by_hand() {
        let g = build_grid(4, 2).unwrap();
        let p = sample_brownian(&g, StreamId::new(4, 1));
        let spec = ModelSpec::new(
            "ou",
            Smooth::affine(-1.0, 0.0),
            Smooth::constant(1.0),
            Smooth::constant(1.0),
            Initial::Point(0.4),
        );
        let d = euler_maruyama(&spec, &p, &g).unwrap();
        let mut want = 0.0;
        for j in 0..4 {
            let x = d.frozen[j];
            want += -2.0 * x * p.blocks.dw[j] + (x * x - 1.0) / 4.0;
        }
        let got = remainder_nn(&spec, &d, &p.blocks, &g);
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }
}
