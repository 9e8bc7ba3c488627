mod args;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use walkstreet::agreement::{annotation_agreement, read_keyword_list};
use walkstreet::pipeline::{
    self, compute_features, compute_metrics, join, read_assignment_csv, regression, Dataset, Metric, Target,
};
use walkstreet::report::{self, pretty_json};
use walkstreet::score::{build_network, hull_feature, walkhood};
use walkstreet::{synth_city, Assignment, Error, GeoPoint, PipelineConfig, Result};

use args::{AssignmentInput, Cli, Command, Output};

fn emit(out: &Output, body: &str) -> Result<()> {
    match &out.output {
        Some(p) => std::fs::write(p, body).map_err(|e| Error::File {
            path: p.display().to_string(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::File {
        path: path.display().to_string(),
        source: e,
    })
}

fn assignment(ds: &Dataset, cfg: &PipelineConfig, input: &AssignmentInput) -> Result<Assignment> {
    match &input.assignments {
        Some(p) => read_assignment_csv(ds, &read(p)?),
        None => join(ds, cfg.buffer_radius, cfg.cell_size(), cfg.parallel),
    }
}

fn staged(cfg: &PipelineConfig, input: &AssignmentInput) -> Result<(Dataset, Vec<walkstreet::SegmentFeatures>)> {
    let ds = Dataset::load(cfg)?;
    let a = assignment(&ds, cfg, input)?;
    let f = compute_features(&ds, &a, cfg)?;
    Ok((ds, f))
}

/// Fails with the metric's own degeneracy error, if any.
fn require_metric(metrics: &pipeline::Metrics, metric: Metric) -> Result<()> {
    match metrics.summary(metric).and_then(|s| s.error.clone()) {
        Some(msg) => Err(Error::DegenerateMetric(msg)),
        None => Ok(()),
    }
}

fn ingest_summary(ds: &Dataset) -> Result<String> {
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for l in &ds.lines {
        for v in l.vertices() {
            min_x = min_x.min(v.x);
            max_x = max_x.max(v.x);
            min_y = min_y.min(v.y);
            max_y = max_y.max(v.y);
        }
    }
    let origin = ds.projection.origin();
    pretty_json(&json!({
        "segments": ds.streets.len(),
        "segments_with_walkability": ds.streets.iter().filter(|s| s.walkability.is_some()).count(),
        "segments_with_safety": ds.streets.iter().filter(|s| s.safety.is_some()).count(),
        "segments_with_ratings": ds.streets.iter().filter(|s| s.ratings.is_some()).count(),
        "street_length_m": ds.lines.iter().map(|l| l.length()).sum::<f64>(),
        "extent_m": { "width": max_x - min_x, "height": max_y - min_y },
        "projection_origin": { "lon": origin.lon, "lat": origin.lat },
        "photos": ds.photos.len(),
        "skipped_photos": ds.skipped_photos,
        "venues": ds.venues.len(),
        "skipped_venues": ds.skipped_venues,
    }))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.config.resolve()?;
    match cli.command {
        Command::Ingest(out) => emit(&out, &ingest_summary(&Dataset::load(&cfg)?)?),
        Command::Join(out) => {
            let ds = Dataset::load(&cfg)?;
            let a = join(&ds, cfg.buffer_radius, cfg.cell_size(), cfg.parallel)?;
            emit(&out, &report::assignments_csv(&ds, &a)?)
        }
        Command::Features { input, out } => {
            let (ds, f) = staged(&cfg, &input)?;
            emit(&out, &report::features_csv(&ds, &f)?)
        }
        Command::Metrics { input, out } => {
            let (ds, f) = staged(&cfg, &input)?;
            let metrics = compute_metrics(&f);
            emit(&out, &report::metrics_csv(&ds, &metrics)?)?;
            for s in metrics.summaries.iter().filter(|s| s.error.is_some()) {
                eprintln!("warning: {}", s.error.as_deref().unwrap_or_default());
            }
            if metrics.all_degenerate() {
                return Err(Error::DegenerateMetric("every paired z-metric is degenerate".into()));
            }
            Ok(())
        }
        Command::Regress { target, input, out } => {
            let (ds, f) = staged(&cfg, &input)?;
            let body = match target {
                Some(t) => pretty_json(&regression(&ds, &f, Target::parse(&t)?, cfg.reference_category)?)?,
                None => {
                    let reports = cfg
                        .targets
                        .iter()
                        .map(|t| regression(&ds, &f, Target::parse(t)?, cfg.reference_category))
                        .collect::<Result<Vec<_>>>()?;
                    pretty_json(&reports)?
                }
            };
            emit(&out, &body)
        }
        Command::Curve { metric, input, out } => {
            let metric = Metric::parse(&metric)?;
            let (ds, f) = staged(&cfg, &input)?;
            let metrics = compute_metrics(&f);
            require_metric(&metrics, metric)?;
            let c = pipeline::curve(&ds, &f, &metrics, metric, &cfg.thresholds);
            if c.curve.defined().next().is_none() {
                return Err(Error::UndefinedCorrelation(format!(
                    "{} vs {} is undefined at every threshold",
                    c.metric, c.target
                )));
            }
            emit(&out, &report::curve_csv(&c)?)
        }
        Command::Bins { metric, k, input, out } => {
            let metric = Metric::parse(&metric)?;
            let k = k.unwrap_or(match metric {
                Metric::PhotoAtNight => cfg.night_bins,
                Metric::Manhood => cfg.gender_bins,
                Metric::Zwalkability => cfg.tags_bins,
                _ => 3,
            });
            let (ds, f) = staged(&cfg, &input)?;
            let metrics = compute_metrics(&f);
            require_metric(&metrics, metric)?;
            emit(&out, &report::bins_csv(&pipeline::bins(&ds, &metrics, metric, k)?)?)
        }
        Command::Score { input, out } => {
            let (ds, f) = staged(&cfg, &input)?;
            emit(&out, &report::scored_geojson(&ds, &f, &compute_metrics(&f))?)
        }
        Command::Walkhood {
            lon,
            lat,
            minutes,
            speed,
            snap_tolerance,
            out,
        } => {
            let ds = Dataset::load(&PipelineConfig {
                photos: None,
                venues: None,
                ..cfg
            })?;
            let segments: Vec<(&str, walkstreet::Polyline)> =
                ds.streets.iter().zip(&ds.lines).map(|(s, l)| (s.id.as_str(), l.clone())).collect();
            let net = build_network(&segments, snap_tolerance)?;
            let origin = ds.projection.project(GeoPoint::new(lon, lat)?)?;
            let hull = walkhood(&net, origin, minutes, speed)?;
            emit(&out, &pretty_json(&hull_feature(&hull, &ds.projection, minutes, speed))?)
        }
        Command::Synth(args) => {
            let spec = args.apply(&cfg);
            let city = synth_city(&spec)?;
            city.write_to(&cfg.out_dir)?;
            eprintln!(
                "wrote {} segments, {} photos, {} venues to {}",
                city.streets.len(),
                city.photos.len(),
                city.venues.len(),
                cfg.out_dir.display()
            );
            Ok(())
        }
        Command::Run => {
            let bundle = walkstreet::run_pipeline(&cfg)?;
            bundle.write_to(&cfg.out_dir)?;
            let summary: serde_json::Value =
                serde_json::from_slice(bundle.get("summary.json").unwrap_or(b"{}")).unwrap_or_default();
            if let Some(ms) = summary["metrics"].as_array() {
                for m in ms.iter().filter(|m| !m["error"].is_null()) {
                    eprintln!("warning: {}", m["error"].as_str().unwrap_or_default());
                }
            }
            eprintln!("wrote {} files to {}", bundle.files.len(), cfg.out_dir.display());
            Ok(())
        }
        Command::Agreement { lists, out } => {
            let lists = lists
                .iter()
                .map(|p| read(p).map(|t| read_keyword_list(&t)))
                .collect::<Result<Vec<_>>>()?;
            let a = annotation_agreement(&lists)?;
            let body = pretty_json(&json!({
                "merged": a.merged,
                "intersected": a.intersected,
                "agreement": a.agreement,
                "merged_over_intersected": a.merged_over_intersected,
                "definition": "agreement = |intersection| / |union|; merged_over_intersected is its reciprocal",
            }))?;
            emit(&out, &body)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
