//! Replication sweeps and their comparison against the expansion.

mod oracle;
mod reduction;
mod replicate;
mod residual;
mod study;

pub use oracle::chisq_oracle_cdf;
pub use reduction::{
    reduce_symbol_terms, reduce_with_table, studentize_reduction, wiener_terms, RationalPoly,
    RationalTerm, Reduced, YwPoly,
};
pub use replicate::{
    run_replications, CoeffMode, MCResult, RemainderBlocks, Replicate, ReplicationConfig, Target,
    MIN_REPLICATIONS,
};
pub use residual::{expansion_residual, residual_at, ResidualConfig, ResidualRow};
pub use study::{
    cdf_sup_errors, chisq_cdf_errors, column_se, convergence_study, log_log_slope, t_grid,
    ErrorRow, SlopeRow, StudyConfig, StudyReport, CDF_FUNCTION, T_GRID_POINTS,
};
