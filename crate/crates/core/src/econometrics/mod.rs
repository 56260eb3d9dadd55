//! Fixed-effects regressions with cluster-robust inference.

mod event;
mod frame;
mod ols;
mod pipeline;
mod within;

pub use event::{
    fit_2sls, fit_event_study, fit_first_stage, fit_pooled, EventCoefficient, EventStudyResult, IvResult, IvSpec,
    PooledSpec, RegressionSpec, WEAK_INSTRUMENT_F,
};
pub use frame::Frame;
pub use ols::{fit_fe, wald_test, Coefficient, FeFit};
pub use pipeline::{
    attenuation, build_frames, estimate_panel, monte_carlo, replication_seed, stack_cohorts, EstimationSpec,
    MonteCarloSummary, PanelEstimates, PooledResult, Replication, TableRow, OUTCOMES, PRETREND_LEVEL,
};
pub use within::{within_transform, WithinResult};
