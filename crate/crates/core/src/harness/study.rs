use std::sync::Arc;

use serde::Serialize;

use crate::accum::mean_se;
use crate::density::{
    coefficient_moments, qn_cdf, qn_expectation, std_normal_cdf, weak_form_expectation,
    CoefficientMoments, OnStatistic, ScalarFunction, ScalarRegistry,
};
use crate::error::{invalid, Result};
use crate::model::{ExpansionCase, ModelSpec};

use super::oracle::chisq_oracle_cdf;
use super::replicate::{run_replications, CoeffMode, MCResult, ReplicationConfig, Target};

/// Points of the CDF comparison grid on `[−4, 4]`.
pub const T_GRID_POINTS: usize = 81;

/// Name used for the CDF sup-error rows.
pub const CDF_FUNCTION: &str = "cdf";

pub fn t_grid() -> Vec<f64> {
    (0..T_GRID_POINTS)
        .map(|i| -4.0 + 8.0 * i as f64 / (T_GRID_POINTS - 1) as f64)
        .collect()
}

/// Sup-errors of `Φ` and of `qn_cdf` against `truth` on the `t` grid.
pub fn cdf_sup_errors(
    n: usize,
    m: &CoefficientMoments,
    truth: impl Fn(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let mut e1: f64 = 0.0;
    let mut e2: f64 = 0.0;
    for t in t_grid() {
        let v = truth(t)?;
        e1 = e1.max((std_normal_cdf(t) - v).abs());
        e2 = e2.max((qn_cdf(t, n, m) - v).abs());
    }
    Ok((e1, e2))
}

/// Sup-errors against the exact chi-square CDF.
pub fn chisq_cdf_errors(n: usize, m: &CoefficientMoments) -> Result<(f64, f64)> {
    cdf_sup_errors(n, m, |t| chisq_oracle_cdf(t, n))
}

/// One row of an error table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub n: usize,
    pub function: String,
    pub order: u8,
    pub truth: f64,
    pub truth_se: f64,
    pub prediction: f64,
    pub error: f64,
    /// `√n · error`
    pub scaled_error: f64,
}

/// Least-squares slope of `ln error` against `ln n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeRow {
    pub function: String,
    pub order: u8,
    pub slope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyReport {
    pub model: String,
    pub master_seed: u64,
    #[serde(rename = "N")]
    pub replications: usize,
    pub fine_len: usize,
    pub rows: Vec<ErrorRow>,
    pub slopes: Vec<SlopeRow>,
    pub moments: Vec<(usize, Option<CoefficientMoments>)>,
}

impl StudyReport {
    pub fn row(&self, n: usize, function: &str, order: u8) -> Option<&ErrorRow> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.function == function && r.order == order)
    }
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    /// Fine-grid size `nR` shared by every `n`.
    pub fine_len: usize,
    pub threads: Option<usize>,
    pub functions: Vec<String>,
    /// Compare CDFs against the exact chi-square law instead of the
    /// empirical CDF. Only valid for constant `a`.
    pub chisq_truth: bool,
}

impl StudyConfig {
    pub fn refinement(&self, n: usize) -> Result<usize> {
        if n >= self.fine_len {
            return Ok(1);
        }
        if self.fine_len % n != 0 {
            return Err(invalid(format!(
                "n = {n} does not divide the fine grid size {}",
                self.fine_len
            )));
        }
        Ok(self.fine_len / n)
    }
}

pub fn log_log_slope(ns: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn push_pair(
    rows: &mut Vec<ErrorRow>,
    n: usize,
    function: &str,
    truth: (f64, f64),
    first: f64,
    second: f64,
) {
    let root = (n as f64).sqrt();
    for (order, prediction) in [(1u8, first), (2u8, second)] {
        let error = (truth.0 - prediction).abs();
        rows.push(ErrorRow {
            n,
            function: function.to_string(),
            order,
            truth: truth.0,
            truth_se: truth.1,
            prediction,
            error,
            scaled_error: root * error,
        });
    }
}

fn empirical_cdf_errors(run: &MCResult, m: &CoefficientMoments) -> Result<(f64, f64)> {
    let mut v = run.values(Target::Studentized);
    v.sort_by(f64::total_cmp);
    let len = v.len() as f64;
    cdf_sup_errors(
        run.n,
        m,
        |t| Ok(v.partition_point(|&x| x <= t) as f64 / len),
    )
}

/// Error decay of the first- and second-order approximations over `n_list`.
///
/// Wiener-case models are compared on the studentized statistic with `qₙ`
/// as the second-order prediction; diffusion-case models on `Zₙ` with the
/// weak form.
pub fn convergence_study(spec: &ModelSpec, cfg: &StudyConfig) -> Result<StudyReport> {
    if cfg.n_list.len() < 3 || cfg.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n_list must be increasing with at least 3 entries"));
    }
    let registry = ScalarRegistry::default();
    let functions: Vec<Arc<dyn ScalarFunction>> = cfg
        .functions
        .iter()
        .filter(|f| f.as_str() != CDF_FUNCTION)
        .map(|f| registry.get(f))
        .collect::<Result<_>>()?;
    let want_cdf = cfg.functions.iter().any(|f| f == CDF_FUNCTION);
    let mut rows = Vec::new();
    let mut moments = Vec::new();
    for &n in &cfg.n_list {
        let rc = ReplicationConfig::new(n, cfg.refinement(n)?, cfg.replications, cfg.master_seed)
            .with_coeffs(CoeffMode::Auto)
            .with_threads(cfg.threads);
        let run = run_replications(spec, &rc)?;
        let records = run.records()?;
        match spec.case {
            ExpansionCase::Wiener => {
                let m = coefficient_moments(&records)?;
                for g in &functions {
                    let truth = run.empirical(g.as_ref(), Target::Studentized);
                    let (first, second) = qn_expectation(|z| g.value(z), n, &m);
                    push_pair(
                        &mut rows,
                        n,
                        &g.name(),
                        (truth.mean, truth.se),
                        first,
                        second,
                    );
                }
                if want_cdf {
                    let (e1, e2) = if cfg.chisq_truth {
                        chisq_cdf_errors(n, &m)?
                    } else {
                        empirical_cdf_errors(&run, &m)?
                    };
                    push_pair(&mut rows, n, CDF_FUNCTION, (0.0, 0.0), e1, e2);
                }
                moments.push((n, Some(m)));
            }
            ExpansionCase::Diffusion => {
                if want_cdf {
                    return Err(invalid("CDF rows need a Wiener-case model"));
                }
                for g in &functions {
                    let truth = run.empirical(g.as_ref(), Target::Zn);
                    let w = weak_form_expectation(&OnStatistic(g.clone()), n, &records)?;
                    push_pair(
                        &mut rows,
                        n,
                        &g.name(),
                        (truth.mean, truth.se),
                        w.first_order,
                        w.total,
                    );
                }
                moments.push((n, None));
            }
        }
    }
    let mut slopes = Vec::new();
    let mut names: Vec<String> = functions.iter().map(|g| g.name()).collect();
    if want_cdf {
        names.push(CDF_FUNCTION.into());
    }
    for name in names {
        for order in [1u8, 2] {
            let errs: Vec<f64> = cfg
                .n_list
                .iter()
                .map(|&n| {
                    rows.iter()
                        .find(|r| r.n == n && r.function == name && r.order == order)
                        .map(|r| r.error)
                        .unwrap_or(f64::NAN)
                })
                .collect();
            slopes.push(SlopeRow {
                function: name.clone(),
                order,
                slope: log_log_slope(&cfg.n_list, &errs),
            });
        }
    }
    Ok(StudyReport {
        model: spec.name.clone(),
        master_seed: cfg.master_seed,
        replications: cfg.replications,
        fine_len: cfg.fine_len,
        rows,
        slopes,
        moments,
    })
}

/// Standard errors of a column, for reporting.
pub fn column_se(values: &[f64]) -> f64 {
    mean_se(values).se
}
