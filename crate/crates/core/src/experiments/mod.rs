//! Seeded experiment runners. Each runner returns an [`ExperimentReport`]
//! whose rows carry a verdict and the invariant it checked; [`write_outputs`]
//! serialises a batch to `report.json` plus one CSV per experiment.
//!
//! Randomness is derived from `(seed, path)` streams keyed by cell and trial
//! index, so reports do not depend on thread scheduling.

mod config;
mod packings;
mod report;
mod risk;
mod scaling;
mod shadows;
mod stats;
mod suite;
mod tables;

pub use config::{
    BoundsConfig, DiscriminateConfig, EstimatorKind, ExperimentConfig, PackingConfig, RiskConfig,
    ScalingConfig, ShadowsConfig, TablesConfig,
};
pub use packings::run_packing_suite;
pub use report::{write_outputs, ExperimentReport, ReportRow, RunMetadata, Verdict};
pub use risk::run_risk_curve;
pub use scaling::{find_n_star, run_scaling_fit, NStarSearch, Probe};
pub use shadows::{run_shadow_discrimination, run_shadow_end_to_end};
pub use stats::{linear_fit, median, variance_with_se, LinearFit, Summary};
pub use suite::{
    chi2_bound_rows, haar_moment_rows, info_property_rows, overlap_tail_rows, rank_r_moment_rows,
    run_bound_suite, second_moment_rows, variance_cap_rows,
};
pub use tables::run_lower_bound_table;

use crate::error::Result;
use crate::randomness::RngStream;

/// Top-level stream for one experiment family.
pub(crate) fn experiment_stream(seed: u64, tag: u64) -> RngStream {
    RngStream::from_path(seed, vec![tag])
}

/// Base stream of [`run_bound_suite`]; section k uses `child(k)` in the
/// order moments, second moments, χ² bounds, rank-r moments, overlap tails,
/// variance caps, information properties.
pub fn bounds_stream(seed: u64) -> RngStream {
    experiment_stream(seed, tags::BOUNDS)
}

pub(crate) mod tags {
    pub const RISK: u64 = 1;
    pub const SCALING: u64 = 2;
    pub const BOUNDS: u64 = 3;
    pub const SHADOWS: u64 = 4;
    pub const DISCRIMINATE: u64 = 5;
    pub const PACKING: u64 = 6;
}

/// Every experiment in a fixed order, as run by `selftest`.
pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    let mut out = Vec::new();
    for &kind in &cfg.risk.estimators {
        out.push(run_risk_curve(kind, cfg)?);
    }
    for &kind in &cfg.scaling.estimators {
        let d_list = match kind {
            EstimatorKind::RandomBasis => &cfg.scaling.random_basis_d,
            EstimatorKind::Pauli => &cfg.scaling.pauli_d,
        };
        out.push(run_scaling_fit(kind, cfg.scaling.eps, d_list, cfg)?);
    }
    out.push(run_bound_suite(cfg)?);
    out.push(run_packing_suite(cfg)?);
    out.push(run_shadow_end_to_end(cfg)?);
    let dc = &cfg.discriminate;
    out.push(run_shadow_discrimination(dc.d, dc.states, dc.eps, cfg)?);
    out.push(run_lower_bound_table(cfg)?);
    Ok(out)
}

/// `key=value` pairs joined with `;` for the CSV params column.
pub(crate) fn params(pairs: &[(&str, String)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}
