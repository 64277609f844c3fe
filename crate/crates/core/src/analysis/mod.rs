//! Figures of merit from coincidence counts: visibilities, fidelities,
//! classical bounds and the unconditional control.

mod bounds;
mod estimators;
mod expected;
mod histogram;
mod report;

pub use bounds::{
    classical_bound_single, classical_bound_wcs, poisson, HeraldNormalization, WcsBounds,
    WcsStrategy, REFERENCE_WCS_BOUND,
};
pub use estimators::{
    average, fidelity, fidelity_from_visibility, mean_fidelity, visibility_equator,
    visibility_pole, Estimate, Visibility, ZERO_COUNT_UPPER_68,
};
pub use expected::{expected_counts, herald_efficiency};
pub use histogram::{
    recount, AnalyzerRole, Conditioning, CountSource, ExpectedCounts, Histogram, HistogramKey,
    HistogramRow, SettingLabel,
};
pub use report::{report, BoundInputs, FidelityReport, StateResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("no counts in either analyzer cell")]
    ZeroCounts,
    #[error("counts must be non-negative")]
    NegativeCounts,
    #[error("{0} = {1} is out of range")]
    OutOfRange(&'static str, f64),
    #[error("no data to report")]
    Empty,
    #[error(
        "herald efficiency {herald_efficiency} exceeds the non-vacuum probability {non_vacuum}"
    )]
    Infeasible {
        herald_efficiency: f64,
        non_vacuum: f64,
    },
    #[error("inconsistent report: {0}")]
    Inconsistent(String),
    #[error("malformed histogram: {0}")]
    Format(String),
}
