//! Street-level walkability and safety scoring from geo-tagged photos and
//! venues.
//!
//! Streets are buffered polylines; photos are matched to every street whose
//! buffer contains them and venues to their nearest street. Per-street
//! aggregates feed paired z-score metrics (night activity, gender mix,
//! walkability keywords), venue-mix regressions, and correlation stability
//! diagnostics.

pub mod agreement;
pub mod config;
pub mod error;
pub mod features;
pub mod geo;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod score;
pub mod stats;
pub mod synth;

pub use agreement::{annotation_agreement, Agreement};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use features::{
    aggregate, aggregate_parallel, category_fractions, fraction_pairs, match_tag_counts, mean_age, z_pair_metric,
    AggregateOptions, Assignment, FractionKind, FractionPair, KeywordLists, SegmentFeatures, ZMetric, ZMetricParams,
};
pub use geo::{
    buffer_contains, build_index, match_point_all, nearest_segment, point_to_polyline_distance, project, GeoPoint,
    PlanarPoint, Polyline, Projection, SpatialIndex,
};
pub use model::{
    classify_night, normalize_tag, parse_photos, parse_streets, parse_venues, Gender, MachineTag, NightClass,
    PhotoRecord, StreetSegment, VenueCategory, VenueRecord,
};
pub use score::{build_network, overall_walkability, walkhood, CategoryRatings, StreetNetwork};
pub use stats::{
    adjusted_r2, ols_fit, pearson, quantile_bin, significance_code, stability_curve, BinSummary, RegressionResult,
    StabilityCurve,
};
pub use pipeline::{run_pipeline, Dataset, Metric, Target};
pub use report::ReportBundle;
pub use synth::{synth_city, SynthCity, SynthSpec};
