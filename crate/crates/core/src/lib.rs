//! Game performance index engine.
//!
//! Recorded gameplay sessions are parsed ([`telemetry`]), reduced to raw metrics
//! ([`metrics`]), mapped onto 0–100 sub-index scores through monotone curves
//! ([`scoring`]), combined into six main indices and a persona-weighted overall
//! score with median aggregation across sessions ([`index`]), and finally ranked
//! and serialized ([`report`]). [`synth`] produces seeded synthetic sessions.

pub mod config;
pub mod index;
pub mod metrics;
pub mod report;
pub mod scoring;
pub mod stats;
pub mod synth;
pub mod telemetry;

pub use config::EngineConfig;
pub use index::{score_device, IndexProfile, MainIndexId, ScoreCard};
pub use metrics::{extract_metrics, MetricId, MetricSet};
pub use report::{emit_plot_data, emit_report, rank_devices, ComparisonTable, ReportFormat};
pub use scoring::{map_metric, validate_curve, CurveSet, MappingCurve, SubIndexScore};
pub use synth::{generate_session, CorpusManifest, DeviceModel, SynthDevice};
pub use telemetry::{parse_session, validate_comparability, SessionTelemetry};
