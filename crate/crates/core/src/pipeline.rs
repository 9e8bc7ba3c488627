//! End-to-end orchestration: ingest, join, aggregate, score, analyse.
//!
//! Each stage is a plain function over the previous stage's output so the
//! CLI can run them one at a time or fused.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::features::{
    aggregate, aggregate_parallel, category_fractions, category_name, fraction_pairs, mean_age, z_pair_metric,
    AggregateOptions, Assignment, FractionKind, KeywordLists, SegmentFeatures, ZMetricParams,
};
use crate::geo::{match_point_all, nearest_segment, GeoPoint, Polyline, Projection, SpatialIndex};
use crate::model::{parse_photos, parse_streets, parse_venues, PhotoRecord, StreetSegment, VenueCategory, VenueRecord};
use crate::stats::{ols_fit, pearson, quantile_bin, stability_curve, BinSummary, RegressionResult, StabilityCurve};

/// Parsed inputs plus their planar geometry.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub streets: Vec<StreetSegment>,
    pub photos: Vec<PhotoRecord>,
    pub venues: Vec<VenueRecord>,
    pub skipped_photos: usize,
    pub skipped_venues: usize,
    pub projection: Projection,
    pub lines: Vec<Polyline>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::file(path, e))
}

impl Dataset {
    /// Projects everything about the mean street vertex.
    pub fn new(streets: Vec<StreetSegment>, photos: Vec<PhotoRecord>, venues: Vec<VenueRecord>) -> Result<Self> {
        if streets.is_empty() {
            return Err(Error::EmptyInput("no street segments".into()));
        }
        let projection = Projection::centered_on(streets.iter().flat_map(|s| s.coords.iter()))?;
        let lines = streets
            .iter()
            .map(|s| s.project(&projection))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            streets,
            photos,
            venues,
            skipped_photos: 0,
            skipped_venues: 0,
            projection,
            lines,
        })
    }

    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let streets_path = PipelineConfig::require(&cfg.streets, "streets")?;
        let text = std::fs::read_to_string(&streets_path).map_err(|e| Error::file(&streets_path, e))?;
        let streets = parse_streets(&text)?;
        let (photos, skipped_photos) = match &cfg.photos {
            Some(p) => parse_photos(open(p)?, cfg.strict)?,
            None => (Vec::new(), 0),
        };
        let (venues, skipped_venues) = match &cfg.venues {
            Some(p) => parse_venues(open(p)?, cfg.strict)?,
            None => (Vec::new(), 0),
        };
        let mut ds = Self::new(streets, photos, venues)?;
        ds.skipped_photos = skipped_photos;
        ds.skipped_venues = skipped_venues;
        Ok(ds)
    }

    pub fn segment_ids(&self) -> Vec<&str> {
        self.streets.iter().map(|s| s.id.as_str()).collect()
    }

    /// Segment positions ordered by segment id.
    pub fn id_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.streets.len()).collect();
        order.sort_by(|&a, &b| self.streets[a].id.cmp(&self.streets[b].id));
        order
    }

    pub fn index(&self, cell_size: f64) -> Result<SpatialIndex> {
        SpatialIndex::build(&self.lines, cell_size)
    }
}

/// Matches photos to every buffer containing them and venues to their
/// nearest segment.
pub fn join(ds: &Dataset, radius: f64, cell_size: f64, parallel: bool) -> Result<Assignment> {
    let index = ds.index(cell_size)?;
    let ids = ds.segment_ids();
    let match_photo = |p: &PhotoRecord| -> Result<Vec<usize>> {
        match ds.projection.project(p.location) {
            Ok(q) => match_point_all(&index, &ds.lines, q, radius),
            Err(_) => Ok(Vec::new()),
        }
    };
    let match_venue = |v: &VenueRecord| -> Result<usize> {
        let q = ds.projection.project(v.location)?;
        nearest_segment(&index, &ids, &ds.lines, q)
    };
    let (photos, venues) = if parallel {
        (
            ds.photos.par_iter().map(match_photo).collect::<Result<Vec<_>>>()?,
            ds.venues.par_iter().map(match_venue).collect::<Result<Vec<_>>>()?,
        )
    } else {
        (
            ds.photos.iter().map(match_photo).collect::<Result<Vec<_>>>()?,
            ds.venues.iter().map(match_venue).collect::<Result<Vec<_>>>()?,
        )
    };
    Ok(Assignment { photos, venues })
}

pub fn keyword_lists(cfg: &PipelineConfig) -> Result<KeywordLists> {
    match &cfg.keywords {
        Some(p) => KeywordLists::from_file(p),
        None => Ok(KeywordLists::default()),
    }
}

pub fn compute_features(ds: &Dataset, assignment: &Assignment, cfg: &PipelineConfig) -> Result<Vec<SegmentFeatures>> {
    let keywords = keyword_lists(cfg)?;
    let opts = AggregateOptions {
        keywords: &keywords,
        night_confidence: cfg.night_confidence,
    };
    let ids = ds.segment_ids();
    if cfg.parallel {
        aggregate_parallel(&ids, &ds.photos, &ds.venues, assignment, &opts)
    } else {
        aggregate(&ids, &ds.photos, &ds.venues, assignment, &opts)
    }
}

// ---------------------------------------------------------------------------
// Per-segment metrics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    PhotoAtNight,
    Manhood,
    MeanAge,
    Zwalkability,
    WalkFraction,
    CarFraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Safety,
    Walkability,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Safety => "safety",
            Target::Walkability => "walkability",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "safety" => Ok(Target::Safety),
            "walkability" => Ok(Target::Walkability),
            _ => Err(Error::InvalidParameter(format!("unknown target `{s}`"))),
        }
    }

    pub fn value(self, seg: &StreetSegment) -> Option<f64> {
        match self {
            Target::Safety => seg.safety,
            Target::Walkability => seg.walkability,
        }
    }
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::PhotoAtNight,
        Metric::Manhood,
        Metric::MeanAge,
        Metric::Zwalkability,
        Metric::WalkFraction,
        Metric::CarFraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::PhotoAtNight => "photo_at_night",
            Metric::Manhood => "manhood",
            Metric::MeanAge => "mean_age",
            Metric::Zwalkability => "zwalkability",
            Metric::WalkFraction => "walk_fraction",
            Metric::CarFraction => "car_fraction",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown metric `{s}`")))
    }

    /// Score the metric is validated against.
    pub fn target(self) -> Target {
        match self {
            Metric::PhotoAtNight | Metric::Manhood | Metric::MeanAge => Target::Safety,
            _ => Target::Walkability,
        }
    }

    /// Data volume used for stability thresholds.
    pub fn volume(self, f: &SegmentFeatures) -> u64 {
        match self {
            Metric::PhotoAtNight => FractionKind::Night.volume(f),
            Metric::Manhood => FractionKind::Gender.volume(f),
            Metric::MeanAge => f.ages.len() as u64,
            Metric::Zwalkability | Metric::WalkFraction | Metric::CarFraction => FractionKind::Tags.volume(f),
        }
    }

    pub fn volume_name(self) -> &'static str {
        match self {
            Metric::PhotoAtNight => "classified_photos",
            Metric::Manhood => "gendered_users",
            Metric::MeanAge => "aged_users",
            _ => "tags",
        }
    }

    pub fn value(self, row: &MetricRow) -> Option<f64> {
        match self {
            Metric::PhotoAtNight => row.photo_at_night,
            Metric::Manhood => row.manhood,
            Metric::MeanAge => row.mean_age,
            Metric::Zwalkability => row.zwalkability,
            Metric::WalkFraction => row.walk_fraction,
            Metric::CarFraction => row.car_fraction,
        }
    }

}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MetricRow {
    pub night_fraction: Option<f64>,
    pub photo_at_night: Option<f64>,
    pub male_fraction: Option<f64>,
    pub manhood: Option<f64>,
    pub mean_age: Option<f64>,
    pub walk_fraction: Option<f64>,
    pub car_fraction: Option<f64>,
    pub zwalkability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub metric: String,
    pub included: usize,
    pub excluded: usize,
    pub params: Option<ZMetricParams>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub rows: Vec<MetricRow>,
    pub summaries: Vec<MetricSummary>,
}

impl Metrics {
    pub fn summary(&self, metric: Metric) -> Option<&MetricSummary> {
        self.summaries.iter().find(|s| s.metric == metric.name())
    }

    /// Whether every z-metric failed.
    pub fn all_degenerate(&self) -> bool {
        [Metric::PhotoAtNight, Metric::Manhood, Metric::Zwalkability]
            .iter()
            .all(|m| self.summary(*m).is_some_and(|s| s.error.is_some()))
    }
}

/// Paired z-metrics, mean age and tag fractions for every segment. A
/// degenerate z-metric leaves its column empty and records the reason.
pub fn compute_metrics(features: &[SegmentFeatures]) -> Metrics {
    let mut rows = vec![MetricRow::default(); features.len()];
    let mut summaries = Vec::new();
    for kind in [FractionKind::Night, FractionKind::Gender, FractionKind::Tags] {
        let fp = fraction_pairs(features, kind);
        for p in &fp.pairs {
            let row = &mut rows[p.index];
            match kind {
                FractionKind::Night => row.night_fraction = Some(p.a),
                FractionKind::Gender => row.male_fraction = Some(p.a),
                FractionKind::Tags => {
                    row.walk_fraction = Some(p.a);
                    row.car_fraction = Some(p.b);
                }
            }
        }
        let mut summary = MetricSummary {
            metric: kind.metric_name().to_string(),
            included: fp.pairs.len(),
            excluded: fp.excluded.len(),
            params: None,
            error: None,
        };
        match z_pair_metric(&fp.pairs, kind) {
            Ok(z) => {
                summary.params = Some(z.params);
                for e in z.entries {
                    let row = &mut rows[e.index];
                    match kind {
                        FractionKind::Night => row.photo_at_night = Some(e.score),
                        FractionKind::Gender => row.manhood = Some(e.score),
                        FractionKind::Tags => row.zwalkability = Some(e.score),
                    }
                }
            }
            Err(e) => summary.error = Some(e.to_string()),
        }
        summaries.push(summary);
    }
    let ages = mean_age(features);
    for &(i, a) in &ages {
        rows[i].mean_age = Some(a);
    }
    summaries.push(MetricSummary {
        metric: Metric::MeanAge.name().to_string(),
        included: ages.len(),
        excluded: features.len() - ages.len(),
        params: None,
        error: None,
    });
    Metrics { rows, summaries }
}

// ---------------------------------------------------------------------------
// Analyses

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub metric: String,
    pub target: String,
    pub n: usize,
    pub r: Option<f64>,
    pub error: Option<String>,
}

fn metric_target_pairs(ds: &Dataset, metrics: &Metrics, metric: Metric, target: Target) -> Vec<(usize, f64, f64)> {
    metrics
        .rows
        .iter()
        .enumerate()
        .filter_map(|(i, row)| Some((i, metric.value(row)?, target.value(&ds.streets[i])?)))
        .collect()
}

pub fn correlation(ds: &Dataset, metrics: &Metrics, metric: Metric, target: Target) -> CorrelationReport {
    let pairs = metric_target_pairs(ds, metrics, metric, target);
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().map(|p| (p.1, p.2)).unzip();
    let r = pearson(&x, &y);
    CorrelationReport {
        metric: metric.name().to_string(),
        target: target.name().to_string(),
        n: x.len(),
        error: r.as_ref().err().map(ToString::to_string),
        r: r.ok(),
    }
}

pub fn correlations(ds: &Dataset, metrics: &Metrics) -> Vec<CorrelationReport> {
    let mut out: Vec<CorrelationReport> = Metric::ALL
        .iter()
        .map(|&m| correlation(ds, metrics, m, m.target()))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = ds.streets.iter().filter_map(|s| Some((s.safety?, s.walkability?))).unzip();
    let r = pearson(&x, &y);
    out.push(CorrelationReport {
        metric: "safety".into(),
        target: "walkability".into(),
        n: x.len(),
        error: r.as_ref().err().map(ToString::to_string),
        r: r.ok(),
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveReport {
    pub metric: String,
    pub target: String,
    pub volume: String,
    pub curve: StabilityCurve,
}

pub fn curve(
    ds: &Dataset,
    features: &[SegmentFeatures],
    metrics: &Metrics,
    metric: Metric,
    thresholds: &[u64],
) -> CurveReport {
    let target = metric.target();
    let rows: Vec<(f64, f64, u64)> = metric_target_pairs(ds, metrics, metric, target)
        .into_iter()
        .map(|(i, m, t)| (m, t, metric.volume(&features[i])))
        .collect();
    CurveReport {
        metric: metric.name().to_string(),
        target: target.name().to_string(),
        volume: metric.volume_name().to_string(),
        curve: stability_curve(&rows, thresholds),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinReport {
    pub metric: String,
    pub target: String,
    pub k: usize,
    pub bins: Vec<BinSummary>,
}

pub fn bins(ds: &Dataset, metrics: &Metrics, metric: Metric, k: usize) -> Result<BinReport> {
    let target = metric.target();
    let pairs: Vec<(f64, f64)> = metric_target_pairs(ds, metrics, metric, target)
        .into_iter()
        .map(|(_, m, t)| (m, t))
        .collect();
    Ok(BinReport {
        metric: metric.name().to_string(),
        target: target.name().to_string(),
        k,
        bins: quantile_bin(&pairs, k)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    pub target: String,
    /// Category left out of the design as the baseline.
    pub reference_category: Option<String>,
    /// Categories with no venues on any modelled segment.
    pub absent_categories: Vec<String>,
    pub result: Option<RegressionResult>,
    pub error: Option<String>,
}

/// Regresses a target on venue-category shares over segments that have both
/// a target value and at least one venue. Degenerate designs are errors.
pub fn regression(
    ds: &Dataset,
    features: &[SegmentFeatures],
    target: Target,
    reference: VenueCategory,
) -> Result<RegressionReport> {
    let rows: Vec<([f64; 9], f64)> = category_fractions(features)
        .into_iter()
        .filter_map(|(i, fr)| Some((fr, target.value(&ds.streets[i])?)))
        .collect();
    let present: Vec<usize> = (0..9).filter(|&c| rows.iter().any(|r| r.0[c] > 0.0)).collect();
    let absent: Vec<String> = (0..9)
        .filter(|c| !present.contains(c))
        .map(|c| category_name(c).to_string())
        .collect();
    // Shares sum to one, so one present category must be left out.
    let dropped = if present.contains(&reference.index()) {
        Some(reference.index())
    } else {
        present.last().copied()
    };
    let columns: Vec<usize> = present.iter().copied().filter(|&c| Some(c) != dropped).collect();
    let names: Vec<&str> = columns.iter().map(|&c| category_name(c)).collect();
    let design: Vec<Vec<f64>> = rows.iter().map(|r| columns.iter().map(|&c| r.0[c]).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let fit = ols_fit(&design, &y, &names).map_err(|e| match e {
        Error::DegenerateMetric(m) => Error::DegenerateMetric(format!("{}: {m}", target.name())),
        Error::InsufficientData(m) => Error::InsufficientData(format!("{}: {m}", target.name())),
        other => other,
    })?;
    Ok(RegressionReport {
        target: target.name().to_string(),
        reference_category: dropped.map(|c| category_name(c).to_string()),
        absent_categories: absent,
        result: Some(fit),
        error: None,
    })
}

/// Like [`regression`], but degenerate statistics become a report entry.
pub fn regression_or_report(
    ds: &Dataset,
    features: &[SegmentFeatures],
    target: Target,
    reference: VenueCategory,
) -> Result<RegressionReport> {
    match regression(ds, features, target, reference) {
        Err(e) if e.exit_code() == 2 => Ok(RegressionReport {
            target: target.name().to_string(),
            reference_category: None,
            absent_categories: Vec::new(),
            result: None,
            error: Some(e.to_string()),
        }),
        other => other,
    }
}

// ---------------------------------------------------------------------------
// Fused run

/// Everything a run produced, before and after rendering.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub assignment: Assignment,
    pub features: Vec<SegmentFeatures>,
    pub metrics: Metrics,
    pub correlations: Vec<CorrelationReport>,
    pub curves: Vec<CurveReport>,
    pub bins: Vec<(Metric, std::result::Result<BinReport, String>)>,
    pub regressions: Vec<RegressionReport>,
}

pub fn analyse(ds: &Dataset, assignment: Assignment, cfg: &PipelineConfig) -> Result<Analysis> {
    cfg.validate()?;
    let features = compute_features(ds, &assignment, cfg)?;
    if features.iter().all(|f| f.n_photos == 0 && f.n_venues() == 0) {
        return Err(Error::EmptyResult("no photo or venue matched any street segment".into()));
    }
    let metrics = compute_metrics(&features);
    let correlations = correlations(ds, &metrics);
    let curves = [Metric::PhotoAtNight, Metric::Manhood, Metric::MeanAge, Metric::Zwalkability]
        .iter()
        .map(|&m| curve(ds, &features, &metrics, m, &cfg.thresholds))
        .collect();
    let bins = [
        (Metric::PhotoAtNight, cfg.night_bins),
        (Metric::Manhood, cfg.gender_bins),
        (Metric::Zwalkability, cfg.tags_bins),
    ]
    .iter()
    .map(|&(m, k)| (m, bins(ds, &metrics, m, k).map_err(|e| e.to_string())))
    .collect();
    let regressions = cfg
        .targets
        .iter()
        .map(|t| regression_or_report(ds, &features, Target::parse(t)?, cfg.reference_category))
        .collect::<Result<Vec<_>>>()?;
    Ok(Analysis {
        assignment,
        features,
        metrics,
        correlations,
        curves,
        bins,
        regressions,
    })
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<crate::report::ReportBundle> {
    cfg.validate()?;
    let ds = Dataset::load(cfg)?;
    let assignment = join(&ds, cfg.buffer_radius, cfg.cell_size(), cfg.parallel)?;
    let analysis = analyse(&ds, assignment, cfg)?;
    crate::report::render(&ds, &analysis, cfg)
}

// ---------------------------------------------------------------------------
// Assignment files

pub fn read_assignment_csv(ds: &Dataset, text: &str) -> Result<Assignment> {
    let seg_pos: HashMap<&str, usize> = ds.streets.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let photo_pos: HashMap<&str, usize> = ds.photos.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
    let venue_pos: HashMap<&str, usize> = ds.venues.iter().enumerate().map(|(i, v)| (v.id.as_str(), i)).collect();
    let mut photos = vec![Vec::new(); ds.photos.len()];
    let mut venues: Vec<Option<usize>> = vec![None; ds.venues.len()];
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    for rec in reader.records() {
        let rec = rec?;
        let (kind, record, segment) = (&rec[0], &rec[1], &rec[2]);
        let seg = *seg_pos
            .get(segment)
            .ok_or_else(|| Error::DanglingReference(format!("unknown segment `{segment}`")))?;
        match kind {
            "photo" => {
                let p = *photo_pos
                    .get(record)
                    .ok_or_else(|| Error::DanglingReference(format!("unknown photo `{record}`")))?;
                photos[p].push(seg);
            }
            "venue" => {
                let v = *venue_pos
                    .get(record)
                    .ok_or_else(|| Error::DanglingReference(format!("unknown venue `{record}`")))?;
                venues[v] = Some(seg);
            }
            other => return Err(Error::Validation(format!("unknown assignment kind `{other}`"))),
        }
    }
    for p in &mut photos {
        p.sort_unstable();
        p.dedup();
    }
    let venues = venues
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::DanglingReference(format!("venue `{}` has no segment", ds.venues[i].id))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Assignment { photos, venues })
}

/// Origin for walkhood queries given in lon/lat.
pub fn project_origin(ds: &Dataset, origin: GeoPoint) -> Result<crate::geo::PlanarPoint> {
    ds.projection.project(origin)
}
