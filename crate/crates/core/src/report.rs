//! Rendering of pipeline results to CSV, JSON and GeoJSON.
//!
//! Everything is rendered into memory first; rows follow segment id order
//! so repeated runs produce identical bytes.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::features::{category_name, Assignment, SegmentFeatures};
use crate::model::street_feature;
use crate::pipeline::{Analysis, BinReport, CurveReport, Dataset, Metrics, RegressionReport};
use crate::score::{overall_walkability, CategoryRatings};

/// Named output files.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportBundle {
    pub files: Vec<(String, Vec<u8>)>,
}

impl ReportBundle {
    pub fn push(&mut self, name: impl Into<String>, body: impl Into<Vec<u8>>) {
        self.files.push((name.into(), body.into()));
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        for (name, body) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::file(&path, e))?;
        }
        Ok(())
    }
}

pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn pretty_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn features_csv(ds: &Dataset, features: &[SegmentFeatures]) -> Result<String> {
    let mut header = vec![
        "segment_id",
        "n_photos",
        "night_count",
        "notnight_count",
        "n_users",
        "male_users",
        "female_users",
        "aged_users",
        "mean_age",
        "tag_total",
        "walk_tag_count",
        "car_tag_count",
        "n_venues",
    ];
    let venue_cols: Vec<String> = (0..9).map(|c| format!("venues_{}", category_name(c))).collect();
    header.extend(venue_cols.iter().map(String::as_str));
    let rows = ds.id_order().into_iter().map(|i| {
        let f = &features[i];
        let mean = (!f.ages.is_empty())
            .then(|| f.ages.iter().map(|&a| f64::from(a)).sum::<f64>() / f.ages.len() as f64);
        let mut row = vec![
            f.segment_id.clone(),
            f.n_photos.to_string(),
            f.night_count.to_string(),
            f.notnight_count.to_string(),
            f.n_users.to_string(),
            f.male_users.to_string(),
            f.female_users.to_string(),
            f.ages.len().to_string(),
            opt(mean),
            f.tag_total.to_string(),
            f.walk_tag_count.to_string(),
            f.car_tag_count.to_string(),
            f.n_venues().to_string(),
        ];
        row.extend(f.venue_counts.iter().map(u64::to_string));
        row
    });
    csv_string(&header, rows)
}

pub fn metrics_csv(ds: &Dataset, metrics: &Metrics) -> Result<String> {
    let header = [
        "segment_id",
        "walkability",
        "safety",
        "night_fraction",
        "photo_at_night",
        "male_fraction",
        "manhood",
        "mean_age",
        "walk_fraction",
        "car_fraction",
        "zwalkability",
    ];
    let rows = ds.id_order().into_iter().map(|i| {
        let s = &ds.streets[i];
        let m = &metrics.rows[i];
        vec![
            s.id.clone(),
            opt(s.walkability),
            opt(s.safety),
            opt(m.night_fraction),
            opt(m.photo_at_night),
            opt(m.male_fraction),
            opt(m.manhood),
            opt(m.mean_age),
            opt(m.walk_fraction),
            opt(m.car_fraction),
            opt(m.zwalkability),
        ]
    });
    csv_string(&header, rows)
}

pub fn assignments_csv(ds: &Dataset, assignment: &Assignment) -> Result<String> {
    let photos = assignment.photos.iter().enumerate().flat_map(|(p, segs)| {
        segs.iter()
            .map(move |&s| vec!["photo".to_string(), ds.photos[p].id.clone(), ds.streets[s].id.clone()])
    });
    let venues = assignment
        .venues
        .iter()
        .enumerate()
        .map(|(v, &s)| vec!["venue".to_string(), ds.venues[v].id.clone(), ds.streets[s].id.clone()]);
    csv_string(&["kind", "record_id", "segment_id"], photos.chain(venues))
}

pub fn curve_csv(report: &CurveReport) -> Result<String> {
    let rows = report
        .curve
        .points
        .iter()
        .map(|p| vec![p.threshold.to_string(), p.n_segments.to_string(), opt(p.r)]);
    csv_string(&["threshold", "n_segments", "r"], rows)
}

pub fn bins_csv(report: &BinReport) -> Result<String> {
    let rows = report.bins.iter().map(|b| {
        vec![
            b.label.clone(),
            num(b.metric_lower),
            num(b.metric_upper),
            b.count.to_string(),
            opt(b.median),
            opt(b.p2),
            opt(b.p98),
        ]
    });
    csv_string(&["bin", "metric_lower", "metric_upper", "count", "median", "p2", "p98"], rows)
}

pub fn regression_csv(reports: &[RegressionReport]) -> Result<String> {
    let mut rows = Vec::new();
    for rep in reports {
        let Some(res) = &rep.result else { continue };
        for c in std::iter::once(&res.intercept).chain(&res.coefficients) {
            rows.push(vec![
                rep.target.clone(),
                c.name.clone(),
                num(c.estimate),
                num(c.std_error),
                num(c.t_stat),
                num(c.p_value),
                c.significance.clone(),
            ]);
        }
    }
    csv_string(
        &["target", "term", "estimate", "std_error", "t_stat", "p_value", "significance"],
        rows,
    )
}

const LOW: [f64; 3] = [215.0, 25.0, 28.0];
const MID: [f64; 3] = [255.0, 255.0, 191.0];
const HIGH: [f64; 3] = [26.0, 150.0, 65.0];

/// Diverging red-yellow-green colour for a score on the 1..5 scale.
pub fn score_color(score: f64) -> String {
    let t = ((score - 1.0) / 4.0).clamp(0.0, 1.0);
    let (a, b, u) = if t < 0.5 { (LOW, MID, t * 2.0) } else { (MID, HIGH, t * 2.0 - 1.0) };
    let c: Vec<u8> = (0..3).map(|k| (a[k] + (b[k] - a[k]) * u).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub fn scored_geojson(ds: &Dataset, features: &[SegmentFeatures], metrics: &Metrics) -> Result<String> {
    let out: Vec<Value> = ds
        .id_order()
        .into_iter()
        .map(|i| {
            let seg = &ds.streets[i];
            let m = &metrics.rows[i];
            let composite = seg
                .ratings
                .as_ref()
                .and_then(|r| CategoryRatings::from_partial(r).ok())
                .map(|r| overall_walkability(&r));
            let mut extra = Map::new();
            let mut put = |k: &str, v: Option<f64>| {
                extra.insert(k.to_string(), v.map_or(Value::Null, Value::from));
            };
            put("composite_walkability", composite);
            put("photo_at_night", m.photo_at_night);
            put("manhood", m.manhood);
            put("mean_age", m.mean_age);
            put("zwalkability", m.zwalkability);
            extra.insert("n_photos".into(), features[i].n_photos.into());
            extra.insert("n_venues".into(), features[i].n_venues().into());
            let color = seg
                .walkability
                .or(composite)
                .map_or_else(|| "#808080".to_string(), score_color);
            extra.insert("color".into(), color.into());
            street_feature(seg, extra)
        })
        .collect();
    Ok(serde_json::to_string(&json!({ "type": "FeatureCollection", "features": out }))? + "\n")
}

pub fn summary_json(ds: &Dataset, a: &Analysis, cfg: &PipelineConfig) -> Result<String> {
    let matched = a.assignment.photos.iter().filter(|p| !p.is_empty()).count();
    let origin = ds.projection.origin();
    let value = json!({
        "segments": ds.streets.len(),
        "photos": ds.photos.len(),
        "venues": ds.venues.len(),
        "skipped_photos": ds.skipped_photos,
        "skipped_venues": ds.skipped_venues,
        "matched_photos": matched,
        "unmatched_photos": ds.photos.len() - matched,
        "segments_with_photos": a.features.iter().filter(|f| f.n_photos > 0).count(),
        "segments_with_venues": a.features.iter().filter(|f| f.n_venues() > 0).count(),
        "buffer_radius": cfg.buffer_radius,
        "cell_size": cfg.cell_size(),
        "night_confidence": cfg.night_confidence,
        "projection_origin": { "lon": origin.lon, "lat": origin.lat },
        "metrics": a.metrics.summaries,
        "correlations": a.correlations,
        "bins": a.bins.iter().map(|(m, b)| match b {
            Ok(_) => json!({ "metric": m.name(), "ok": true }),
            Err(e) => json!({ "metric": m.name(), "ok": false, "error": e }),
        }).collect::<Vec<_>>(),
    });
    pretty_json(&value)
}

/// Renders every output of a fused run.
pub fn render(ds: &Dataset, a: &Analysis, cfg: &PipelineConfig) -> Result<ReportBundle> {
    let mut b = ReportBundle::default();
    b.push("summary.json", summary_json(ds, a, cfg)?);
    b.push("assignments.csv", assignments_csv(ds, &a.assignment)?);
    b.push("features.csv", features_csv(ds, &a.features)?);
    b.push("metrics.csv", metrics_csv(ds, &a.metrics)?);
    b.push("regression.json", pretty_json(&a.regressions)?);
    b.push("regression.csv", regression_csv(&a.regressions)?);
    for c in &a.curves {
        b.push(format!("curve_{}.csv", c.metric), curve_csv(c)?);
    }
    for (_, bins) in &a.bins {
        if let Ok(r) = bins {
            b.push(format!("bins_{}.csv", r.metric), bins_csv(r)?);
        }
    }
    b.push("scored_streets.geojson", scored_geojson(ds, &a.features, &a.metrics)?);
    Ok(b)
}
