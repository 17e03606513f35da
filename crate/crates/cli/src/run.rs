//! Subcommand bodies. Each builds its output files in memory.

use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde_json::json;

use mnx_core::density::{
    gaussian_pdf, joint_pn_density, marginal_density, studentized_qn, PathCoeffs,
};
use mnx_core::harness::{
    convergence_study, expansion_residual, run_replications, t_grid, CoeffMode, MCResult,
    ReplicationConfig, ResidualConfig, StudyConfig, Target, CDF_FUNCTION,
};
use mnx_core::model::{validate_model, ExpansionCase, ModelRegistry, ModelSpec};
use mnx_core::paths::{Scheme, SchemeRegistry};

use crate::config::{Mode, RunConfig, UsageError};
use crate::emit::{json_with_header, num, Csv, Header, Outputs};
use crate::svg::Plot;

/// Test functions a study uses when none are named.
const DEFAULT_FUNCTIONS: [&str; 4] = ["z", "z2", "z3", "sin"];
/// Quantile levels of `𝔠₀` at which the joint density is tabulated.
const PN_LEVELS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
const HISTOGRAM_BINS: usize = 32;

pub fn build_model(cfg: &RunConfig) -> Result<ModelSpec, UsageError> {
    ModelRegistry::default()
        .build(&cfg.model, &cfg.params)
        .map_err(|e| UsageError(e.to_string()))
}

pub fn build_scheme(cfg: &RunConfig, default: &str) -> Result<Arc<dyn Scheme>, UsageError> {
    SchemeRegistry::default()
        .get(cfg.scheme.as_deref().unwrap_or(default))
        .map_err(|e| UsageError(e.to_string()))
}

pub struct Job<'a> {
    pub cfg: &'a RunConfig,
    pub spec: &'a ModelSpec,
    pub scheme: Arc<dyn Scheme>,
    pub threads: Option<usize>,
}

pub fn execute(ctx: &Job) -> Result<Outputs> {
    let header = Header::new(ctx.cfg);
    match ctx.cfg.subcommand {
        Mode::Validate => validate(ctx, &header),
        Mode::Coeffs => coeffs(ctx, &header),
        Mode::Density => density(ctx, &header),
        Mode::Study => study(ctx, &header),
        Mode::Residual => residual(ctx, &header),
    }
}

fn sweep(ctx: &Job, n: usize) -> Result<MCResult> {
    let rc = ReplicationConfig::new(n, ctx.cfg.refinement, ctx.cfg.replications, ctx.cfg.seed)
        .with_coeffs(CoeffMode::Auto)
        .with_scheme(ctx.scheme.clone())
        .with_threads(ctx.threads);
    let run = run_replications(ctx.spec, &rc)?;
    if !run.aborted.is_empty() {
        eprintln!(
            "warning: {} of {} replications aborted",
            run.aborted.len(),
            run.requested
        );
    }
    Ok(run)
}

fn validate(ctx: &Job, header: &Header) -> Result<Outputs> {
    let report = validate_model(ctx.spec)?;
    let mut out = Outputs::default();
    out.add("validation.json", json_with_header(header, &report)?);
    for d in &report.diagnostics {
        eprintln!("{d}");
    }
    if !report.pass {
        out.write(&ctx.cfg.out)?;
        bail!("model `{}` failed validation", report.model);
    }
    Ok(out)
}

fn coeffs(ctx: &Job, header: &Header) -> Result<Outputs> {
    let run = sweep(ctx, ctx.cfg.n)?;
    let records = run.records()?;
    let mut out = Outputs::default();
    let csv = match ctx.spec.case {
        ExpansionCase::Wiener => {
            let mut csv = Csv::new(header, &["replication", "c0", "c1", "c2", "c3"]);
            for r in &records {
                let c = r.wiener_coeffs().context("Wiener record expected")?;
                csv.row([
                    r.replication.to_string(),
                    num(c.c0),
                    num(c.c1),
                    num(c.c2),
                    num(c.c3),
                ]);
            }
            csv
        }
        ExpansionCase::Diffusion => {
            let mut csv = Csv::new(
                header,
                &[
                    "replication",
                    "c_inf",
                    "f_inf",
                    "m",
                    "k",
                    "z_degree",
                    "coefficient",
                ],
            );
            for r in &records {
                let PathCoeffs::Symbol(s) = &r.coeffs else {
                    bail!("diffusion record expected");
                };
                for t in s.to_terms(1) {
                    let k: Vec<String> = t.k.iter().map(u32::to_string).collect();
                    csv.row([
                        r.replication.to_string(),
                        num(r.c_inf),
                        num(r.f_inf),
                        t.m.to_string(),
                        k.join(";"),
                        t.z_degree.to_string(),
                        num(t.coefficient),
                    ]);
                }
            }
            csv
        }
    };
    out.add("coeffs.csv", csv.into_bytes());
    Ok(out)
}

fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, f64)> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        if v >= lo && v < hi {
            counts[((v - lo) / width) as usize] += 1;
        }
    }
    let total = values.len() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (lo + width * (i as f64 + 0.5), c as f64 / (total * width)))
        .collect()
}

fn density(ctx: &Job, header: &Header) -> Result<Outputs> {
    let n = ctx.cfg.n;
    let run = sweep(ctx, n)?;
    let model = run.density_model()?;
    let count = model.sample_count();
    let grid = t_grid();
    let mut curve = Vec::with_capacity(grid.len());
    let target = match ctx.spec.case {
        ExpansionCase::Wiener => {
            let m = model.moments.context("Wiener store without moments")?;
            for &z in &grid {
                curve.push((z, gaussian_pdf(z, 0.0, 1.0), studentized_qn(z, n, &m)));
            }
            Target::Studentized
        }
        ExpansionCase::Diffusion => {
            for &z in &grid {
                let (first, second) = marginal_density(z, n, &model.records)?;
                curve.push((z, first, second));
            }
            Target::Zn
        }
    };

    let mut out = Outputs::default();
    let mut csv = Csv::new(
        header,
        &["z", "first_order", "second_order", "n", "N", "seed"],
    );
    for &(z, a, b) in &curve {
        csv.row([
            num(z),
            num(a),
            num(b),
            n.to_string(),
            count.to_string(),
            ctx.cfg.seed.to_string(),
        ]);
    }
    out.add("qn_curve.csv", csv.into_bytes());

    if let Some(m) = model.moments {
        out.add("moments.json", json_with_header(header, m)?);
        let mut c0 = model.c0_column();
        c0.sort_by(f64::total_cmp);
        let mut pn = Csv::new(
            header,
            &["z", "x", "first_order", "second_order", "reliable", "label"],
        );
        for level in PN_LEVELS {
            let x = c0[((c0.len() - 1) as f64 * level).round() as usize];
            for &z in grid.iter().step_by(2) {
                let v = joint_pn_density(z * x.sqrt(), x, &model, None)?;
                pn.row([
                    num(z * x.sqrt()),
                    num(x),
                    num(v.first_order),
                    num(v.second_order),
                    v.reliable.to_string(),
                    v.label.unwrap_or("").to_string(),
                ]);
            }
        }
        out.add("pn_grid.csv", pn.into_bytes());
    }
    let summary = json!({
        "model": run.model,
        "case": run.case,
        "n": n,
        "refinement": run.refinement,
        "requested": run.requested,
        "aborted": run.aborted,
        "density": model.summary(),
    });
    out.add("summary.json", json_with_header(header, summary)?);

    if ctx.cfg.emit_svg {
        let hist = histogram(&run.values(target), -4.0, 4.0, HISTOGRAM_BINS);
        let svg = Plot::new(
            &format!("{} density, n = {n}", ctx.spec.name),
            "z",
            "density",
        )
        .series("first order", curve.iter().map(|c| (c.0, c.1)).collect())
        .series("second order", curve.iter().map(|c| (c.0, c.2)).collect())
        .series("Monte Carlo", hist)
        .render();
        out.add("qn_curve.svg", svg.into_bytes());
    }
    Ok(out)
}

/// True when `a` is flat on the scan range, so the Wiener statistic is an
/// exact scaled chi-square.
fn constant_a(spec: &ModelSpec) -> bool {
    let (lo, hi) = spec.scan_range;
    let a0 = spec.a(lo);
    (0..=16).all(|i| {
        let x = lo + (hi - lo) * i as f64 / 16.0;
        (spec.a(x) - a0).abs() <= 1e-12 * a0.abs().max(1.0)
    })
}

fn study(ctx: &Job, header: &Header) -> Result<Outputs> {
    let cfg = ctx.cfg;
    let wiener = ctx.spec.case == ExpansionCase::Wiener;
    let functions = cfg.functions.clone().unwrap_or_else(|| {
        let mut f: Vec<String> = DEFAULT_FUNCTIONS.iter().map(|s| s.to_string()).collect();
        if wiener {
            f.push(CDF_FUNCTION.into());
        }
        f
    });
    let max_n = *cfg.n_list.last().expect("checked non-empty");
    let sc = StudyConfig {
        n_list: cfg.n_list.clone(),
        replications: cfg.replications,
        master_seed: cfg.seed,
        fine_len: max_n * cfg.refinement,
        threads: ctx.threads,
        functions,
        chisq_truth: wiener && constant_a(ctx.spec),
    };
    let report = convergence_study(ctx.spec, &sc)?;

    let mut out = Outputs::default();
    let mut csv = Csv::new(
        header,
        &[
            "n",
            "function",
            "order",
            "truth",
            "truth_se",
            "prediction",
            "error",
            "scaled_error",
        ],
    );
    for r in &report.rows {
        csv.row([
            r.n.to_string(),
            r.function.clone(),
            r.order.to_string(),
            num(r.truth),
            num(r.truth_se),
            num(r.prediction),
            num(r.error),
            num(r.scaled_error),
        ]);
    }
    out.add("errors.csv", csv.into_bytes());
    let mut slopes = Csv::new(header, &["function", "order", "slope"]);
    for s in &report.slopes {
        slopes.row([s.function.clone(), s.order.to_string(), num(s.slope)]);
    }
    out.add("slopes.csv", slopes.into_bytes());
    out.add("study.json", json_with_header(header, &report)?);

    if cfg.emit_svg {
        let mut plot = Plot::new(&format!("{} error decay", ctx.spec.name), "n", "|error|");
        plot.log_x = true;
        plot.log_y = true;
        for s in &report.slopes {
            let pts = report
                .rows
                .iter()
                .filter(|r| r.function == s.function && r.order == s.order)
                .map(|r| (r.n as f64, r.error))
                .collect();
            plot = plot.series(&format!("{} order {}", s.function, s.order), pts);
        }
        out.add("errors.svg", plot.render().into_bytes());
    }
    Ok(out)
}

fn residual(ctx: &Job, header: &Header) -> Result<Outputs> {
    let cfg = ctx.cfg;
    let mut rc = ResidualConfig::new(
        cfg.n_list.clone(),
        cfg.refinement,
        cfg.replications,
        cfg.seed,
    );
    rc.threads = ctx.threads;
    rc.scheme = ctx.scheme.clone();
    let rows = expansion_residual(ctx.spec, &rc)?;
    let mut out = Outputs::default();
    let mut csv = Csv::new(
        header,
        &[
            "n",
            "refinement",
            "residual",
            "residual_se",
            "leading",
            "leading_se",
        ],
    );
    for r in &rows {
        csv.row([
            r.n.to_string(),
            r.refinement.to_string(),
            num(r.residual),
            num(r.residual_se),
            num(r.leading),
            num(r.leading_se),
        ]);
    }
    out.add("residual.csv", csv.into_bytes());
    if cfg.emit_svg {
        let mut plot = Plot::new(
            &format!("{} expansion residual", ctx.spec.name),
            "n",
            "sqrt(n) RMS",
        );
        plot.log_x = true;
        plot = plot
            .series(
                "with remainder",
                rows.iter().map(|r| (r.n as f64, r.residual)).collect(),
            )
            .series(
                "leading term only",
                rows.iter().map(|r| (r.n as f64, r.leading)).collect(),
            );
        out.add("residual.svg", plot.render().into_bytes());
    }
    Ok(out)
}
