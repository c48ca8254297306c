//! Metrics, experiment suites, manifests, and result reporting.

mod manifest;
mod metrics;
mod report;
mod suite;

pub use manifest::RunManifest;
pub use metrics::{iia, layer_swap_delta, zeroing_accuracy};
pub use report::{
    consolidate_report, curve_table, heatmap_svg, heatmap_table, write_suite_files,
};
pub use suite::{
    run_suite, HeatmapResult, LayerCurve, RuleKind, SuiteData, SuiteKind, SuiteOutput,
    DILUTION_PROPORTIONS,
};
