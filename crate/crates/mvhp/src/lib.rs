//! Multivariate Hawkes process toolkit for labeled event streams.
//!
//! The model: each of `P` processes has conditional intensity
//!
//! ```text
//! lambda_i(t | H) = b_i + sum_j a[i][j] * sum_{t_k^j < t} exp(-beta (t - t_k^j))
//! ```
//!
//! with nonnegative base rates `b`, nonnegative excitation matrix `a`, and a
//! shared exponential-decay rate `beta` treated as a fixed hyperparameter.
//! Times are hours; sums over history use the left limit, so an event never
//! contributes to the intensity at its own timestamp.
//!
//! On top of the model the crate provides exact likelihood and gradient
//! evaluation, per-row maximum-likelihood fitting, two independent samplers
//! (thinning and cluster-based), residual goodness-of-fit testing with a
//! Kolmogorov-Smirnov gate, event-level cause attribution with influence
//! summaries, a sliding-window pipeline, and event-stream ingest/export.

mod error;
mod events;
mod exec;
mod linalg;
mod model;

mod estimator;
mod gof;
mod heatmap;
mod influence;
mod ingest;
mod likelihood;
mod pipeline;
mod simulate;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use events::EventStreams;
pub use exec::configure_threads;
pub use model::{KernelSpec, MvhpModel};

pub use estimator::{fit_mle, fit_row, FitConfig, FitReport, ModelFile, ModelMeta, RowFit};
pub use gof::{ks_statistic, pooled_gof, pp_points, rescale, GofReport, KsResult};
pub use heatmap::render_heatmap_svg;
pub use influence::{
    attribute_event, attribute_window, classify, granger_edges, pim_estimate, AttributionRecord,
    GrangerEdge, InfluenceClass, PimMatrix,
};
pub use ingest::{
    export_streams, ingest, IngestConfig, IngestFormat, IngestSummary, MalformedRow, RawEvent,
    TimeUnit,
};
pub use likelihood::{compensator, intensity, log_likelihood, log_likelihood_gradient, Gradient};
pub use pipeline::{
    build_timeline, plan_windows, run_pipeline, write_results, PipelineConfig, PipelineResult,
    TimelineEntry, TimelineReport, WindowPlan, WindowResult,
};
pub use simulate::{
    simulate_branching, simulate_thinning, spectral_radius, stationary_mean_intensity, SimConfig,
};
