use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use walkstreet::{PipelineConfig, Result, VenueCategory};

#[derive(Parser, Debug)]
#[command(name = "walkstreet", version, about = "Street walkability and safety scoring from geo-tagged photos and venues")]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,

    #[command(subcommand)]
    pub command: Command,
}

/// Pipeline settings. Each flag overrides the config-file key of the same name.
#[derive(Args, Debug, Default)]
pub struct ConfigArgs {
    /// TOML config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Streets GeoJSON (FeatureCollection of LineStrings)
    #[arg(long, global = true)]
    pub streets: Option<PathBuf>,
    /// Photos, one JSON object per line
    #[arg(long, global = true)]
    pub photos: Option<PathBuf>,
    /// Venues, one JSON object per line
    #[arg(long, global = true)]
    pub venues: Option<PathBuf>,
    /// Photo-to-street match radius in meters
    #[arg(long, global = true)]
    pub buffer_radius: Option<f64>,
    /// Spatial grid cell size in meters (>= buffer radius)
    #[arg(long, global = true)]
    pub cell_size: Option<f64>,
    /// Machine-tag confidence a night/day label must exceed
    #[arg(long, global = true)]
    pub night_confidence: Option<f64>,
    /// Keyword TOML file with `walk` and `car` arrays
    #[arg(long, global = true)]
    pub keywords: Option<PathBuf>,
    /// Stability thresholds, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub thresholds: Option<Vec<u64>>,
    /// Regression targets, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub targets: Option<Vec<String>>,
    /// Venue category left out of regressions
    #[arg(long, global = true)]
    pub reference_category: Option<VenueCategory>,
    #[arg(long, global = true)]
    pub night_bins: Option<usize>,
    #[arg(long, global = true)]
    pub gender_bins: Option<usize>,
    #[arg(long, global = true)]
    pub tags_bins: Option<usize>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Fail on the first malformed photo or venue line
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    pub strict: Option<bool>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    pub parallel: Option<bool>,
}

macro_rules! set {
    ($cfg:ident, $args:ident, $($field:ident),*) => {
        $(if let Some(v) = $args.$field.clone() { $cfg.$field = v; })*
    };
}

impl ConfigArgs {
    /// Config file values, then flags.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        let args = self;
        if args.streets.is_some() {
            cfg.streets = args.streets.clone();
        }
        if args.photos.is_some() {
            cfg.photos = args.photos.clone();
        }
        if args.venues.is_some() {
            cfg.venues = args.venues.clone();
        }
        if args.keywords.is_some() {
            cfg.keywords = args.keywords.clone();
        }
        if args.cell_size.is_some() {
            cfg.cell_size = args.cell_size;
        }
        set!(
            cfg,
            args,
            buffer_radius,
            night_confidence,
            thresholds,
            targets,
            reference_category,
            night_bins,
            gender_bins,
            tags_bins,
            out_dir,
            seed,
            strict,
            parallel
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct Output {
    /// Output file; stdout when omitted
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AssignmentInput {
    /// Assignment CSV from `join`; computed when omitted
    #[arg(long)]
    pub assignments: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate inputs and print a summary
    Ingest(#[command(flatten)] Output),
    /// Match photos and venues to streets (assignment CSV)
    Join(#[command(flatten)] Output),
    /// Per-segment aggregates (CSV)
    Features {
        #[command(flatten)]
        input: AssignmentInput,
        #[command(flatten)]
        out: Output,
    },
    /// Per-segment z-metrics (CSV)
    Metrics {
        #[command(flatten)]
        input: AssignmentInput,
        #[command(flatten)]
        out: Output,
    },
    /// Venue-mix regression (JSON)
    Regress {
        /// Single target; every configured target when omitted
        #[arg(long)]
        target: Option<String>,
        #[command(flatten)]
        input: AssignmentInput,
        #[command(flatten)]
        out: Output,
    },
    /// Correlation stability versus data volume (CSV)
    Curve {
        #[arg(long)]
        metric: String,
        #[command(flatten)]
        input: AssignmentInput,
        #[command(flatten)]
        out: Output,
    },
    /// Quantile bins of a metric with target medians and whiskers (CSV)
    Bins {
        #[arg(long)]
        metric: String,
        /// Number of bins; the configured count for the metric when omitted
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        input: AssignmentInput,
        #[command(flatten)]
        out: Output,
    },
    /// Composite walkability and scored streets (GeoJSON)
    Score {
        #[command(flatten)]
        input: AssignmentInput,
        #[command(flatten)]
        out: Output,
    },
    /// Area walkable from a point within a time budget (GeoJSON)
    Walkhood {
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        #[arg(long, default_value_t = 15.0)]
        minutes: f64,
        /// Walking speed in meters per minute
        #[arg(long, default_value_t = walkstreet::score::DEFAULT_WALK_SPEED_M_PER_MIN)]
        speed: f64,
        /// Endpoints closer than this many meters are joined
        #[arg(long, default_value_t = walkstreet::score::DEFAULT_SNAP_TOLERANCE_M)]
        snap_tolerance: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Generate a synthetic city into --out-dir
    Synth(SynthArgs),
    /// Full pipeline into --out-dir
    Run,
    /// Agreement between keyword lists, one keyword per line
    Agreement {
        #[arg(required = true, num_args = 2..)]
        lists: Vec<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
}

/// Overrides for the config's `[synth]` table.
#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_segments: Option<usize>,
    #[arg(long)]
    pub extent_m: Option<f64>,
    #[arg(long)]
    pub photos_median: Option<f64>,
    #[arg(long)]
    pub photos_sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho_night: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho_gender: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho_tags: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho_age: Option<f64>,
    #[arg(long)]
    pub noise_slope: Option<f64>,
    #[arg(long)]
    pub gender_known: Option<f64>,
    #[arg(long)]
    pub age_known: Option<f64>,
    #[arg(long)]
    pub tags_per_photo: Option<f64>,
    #[arg(long)]
    pub unclassified: Option<f64>,
    #[arg(long)]
    pub venues_per_segment: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub origin_lon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub origin_lat: Option<f64>,
}

impl SynthArgs {
    pub fn apply(&self, cfg: &PipelineConfig) -> walkstreet::SynthSpec {
        let mut spec = cfg.synth_spec();
        let args = self;
        if args.extent_m.is_some() {
            spec.extent_m = args.extent_m;
        }
        set!(
            spec,
            args,
            n_segments,
            photos_median,
            photos_sigma,
            rho_night,
            rho_gender,
            rho_tags,
            rho_age,
            noise_slope,
            gender_known,
            age_known,
            tags_per_photo,
            unclassified,
            venues_per_segment,
            origin_lon,
            origin_lat
        );
        spec
    }
}
