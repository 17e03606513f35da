use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accum::{mean_se, MeanSe};
use crate::density::{DensityModel, PathRecord, ScalarFunction, TestFunction};
use crate::error::{invalid, Error, Result};
use crate::functionals::{compute_sample, StatisticSample};
use crate::malliavin::SGrid;
use crate::model::{ExpansionCase, ModelSpec};
use crate::paths::{
    build_grid, integrate, sample_brownian, BlockGaussians, Euler, Scheme, TimeGrid,
};
use crate::rng::StreamId;
use crate::symbols::{diffusion_coefficients, wiener_coefficients};

/// Smallest sweep `run_replications` accepts.
pub const MIN_REPLICATIONS: usize = 100;

/// Which expansion coefficients each replication computes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoeffMode {
    #[default]
    None,
    /// Closed-form Wiener coefficients or diffusion-case symbols, by model case.
    Auto,
}

/// Which `(Δw, J)` pairs feed the remainder `Nₙ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemainderBlocks {
    #[default]
    None,
    /// Areas realized by the left-point rule on the fine grid.
    EulerConsistent,
    /// The exactly sampled block pairs.
    Exact,
}

#[derive(Clone)]
pub struct ReplicationConfig {
    pub n: usize,
    pub refinement: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub scheme: Arc<dyn Scheme>,
    pub sgrid: SGrid,
    pub coeffs: CoeffMode,
    pub remainder: RemainderBlocks,
    /// Worker count; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl ReplicationConfig {
    pub fn new(n: usize, refinement: usize, replications: usize, master_seed: u64) -> Self {
        Self {
            n,
            refinement,
            replications,
            master_seed,
            scheme: Arc::new(Euler),
            sgrid: SGrid::Coarse,
            coeffs: CoeffMode::None,
            remainder: RemainderBlocks::None,
            threads: None,
        }
    }

    pub fn with_coeffs(mut self, coeffs: CoeffMode) -> Self {
        self.coeffs = coeffs;
        self
    }

    pub fn with_remainder(mut self, remainder: RemainderBlocks) -> Self {
        self.remainder = remainder;
        self
    }

    pub fn with_scheme(mut self, scheme: Arc<dyn Scheme>) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }
}

/// Output of one replication.
#[derive(Clone, Debug)]
pub struct Replicate {
    pub replication: u64,
    pub sample: StatisticSample,
    pub record: Option<PathRecord>,
}

/// Which statistic a test function is applied to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Zn,
    M1n,
    /// `Fₙ^{-1/2} M₁ⁿ`
    Studentized,
}

/// A completed sweep. Replicates are ordered by replication index.
#[derive(Clone, Debug)]
pub struct MCResult {
    pub model: String,
    pub case: ExpansionCase,
    pub master_seed: u64,
    pub n: usize,
    pub refinement: usize,
    pub requested: usize,
    pub aborted: Vec<u64>,
    pub replicates: Vec<Replicate>,
}

impl MCResult {
    pub fn count(&self) -> usize {
        self.replicates.len()
    }

    pub fn values(&self, target: Target) -> Vec<f64> {
        self.replicates
            .iter()
            .map(|r| {
                let s = &r.sample;
                match target {
                    Target::Zn => s.z_n,
                    Target::M1n => s.m1n,
                    Target::Studentized => s.m1n / s.f_n.sqrt(),
                }
            })
            .collect()
    }

    /// `E_MC[g(T)]` with its standard error.
    pub fn empirical(&self, g: &dyn ScalarFunction, target: Target) -> MeanSe {
        let v: Vec<f64> = self
            .values(target)
            .into_iter()
            .map(|t| g.value(t))
            .collect();
        mean_se(&v)
    }

    /// `E_MC[f(S, Fₙ)]` on the expansion's pair: `(M₁ⁿ, Fₙ)` in the Wiener
    /// case, `(Zₙ, Fₙ)` otherwise.
    pub fn empirical_pair(&self, f: &dyn TestFunction) -> Result<MeanSe> {
        let stat = match self.case {
            ExpansionCase::Wiener => Target::M1n,
            ExpansionCase::Diffusion => Target::Zn,
        };
        let v = self
            .values(stat)
            .into_iter()
            .zip(&self.replicates)
            .map(|(z, r)| {
                f.derivative(0, 0, z, r.sample.f_n)
                    .ok_or_else(|| invalid(format!("test function {} has no value", f.name())))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(mean_se(&v))
    }

    /// Per-path coefficient records, if they were collected.
    pub fn records(&self) -> Result<Vec<PathRecord>> {
        self.replicates
            .iter()
            .map(|r| {
                r.record
                    .clone()
                    .ok_or_else(|| invalid("the sweep did not collect expansion coefficients"))
            })
            .collect()
    }

    pub fn density_model(&self) -> Result<DensityModel> {
        DensityModel::new(self.records()?, self.n)
    }
}

fn simulate_one(
    spec: &ModelSpec,
    grid: &TimeGrid,
    cfg: &ReplicationConfig,
    replication: u64,
) -> Result<Replicate> {
    let stream = StreamId::new(cfg.master_seed, replication);
    let path = sample_brownian(grid, stream);
    let dpath = integrate(spec, &path, grid, cfg.scheme.as_ref())?;
    let euler_blocks;
    let blocks = match cfg.remainder {
        RemainderBlocks::None => None,
        RemainderBlocks::EulerConsistent => {
            euler_blocks = BlockGaussians::euler_consistent(&path, grid);
            Some(&euler_blocks)
        }
        RemainderBlocks::Exact => Some(&path.blocks),
    };
    let sample = compute_sample(spec, &dpath, &path, grid, blocks);
    if !sample.z_n.is_finite() || !sample.m1n.is_finite() || !sample.f_n.is_finite() {
        return Err(Error::NonFiniteState {
            replication,
            step: grid.fine_len(),
        });
    }
    let record = match (cfg.coeffs, spec.case) {
        (CoeffMode::None, _) => None,
        (CoeffMode::Auto, ExpansionCase::Wiener) => Some(PathRecord::wiener(
            replication,
            wiener_coefficients(spec, &dpath, grid)?,
        )),
        (CoeffMode::Auto, ExpansionCase::Diffusion) => {
            let c =
                diffusion_coefficients(spec, &dpath, &path, grid, cfg.sgrid, cfg.scheme.as_ref())?;
            Some(PathRecord::diffusion(replication, &c))
        }
    };
    Ok(Replicate {
        replication,
        sample,
        record,
    })
}

fn is_abort(e: &Error) -> bool {
    matches!(
        e,
        Error::NonFiniteState { .. } | Error::NonFiniteModel { .. }
    )
}

/// Simulate `cfg.replications` independent paths and collect their
/// statistics. Replication `i` always uses stream `(master_seed, i)`, so the
/// output does not depend on the worker count.
pub fn run_replications(spec: &ModelSpec, cfg: &ReplicationConfig) -> Result<MCResult> {
    if cfg.replications < MIN_REPLICATIONS {
        return Err(invalid(format!(
            "at least {MIN_REPLICATIONS} replications are required, got {}",
            cfg.replications
        )));
    }
    let grid = build_grid(cfg.n, cfg.refinement)?;
    let work = || -> Vec<Result<Replicate>> {
        (0..cfg.replications as u64)
            .into_par_iter()
            .map(|i| simulate_one(spec, &grid, cfg, i))
            .collect()
    };
    let outcomes = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| invalid(format!("cannot build worker pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut replicates = Vec::with_capacity(outcomes.len());
    let mut aborted = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => replicates.push(r),
            Err(e) if is_abort(&e) => aborted.push(i as u64),
            Err(e) => return Err(e),
        }
    }
    if aborted.len() * 1000 > cfg.replications {
        return Err(Error::TooManyAborts {
            aborted: aborted.len(),
            total: cfg.replications,
        });
    }
    Ok(MCResult {
        model: spec.name.clone(),
        case: spec.case,
        master_seed: cfg.master_seed,
        n: cfg.n,
        refinement: cfg.refinement,
        requested: cfg.replications,
        aborted,
        replicates,
    })
}
