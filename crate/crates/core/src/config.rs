//! Pipeline configuration, loadable from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::DEFAULT_BUFFER_RADIUS_M;
use crate::model::{VenueCategory, DEFAULT_NIGHT_CONFIDENCE};
use crate::stats::DEFAULT_THRESHOLDS;
use crate::synth::SynthSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub streets: Option<PathBuf>,
    pub photos: Option<PathBuf>,
    pub venues: Option<PathBuf>,
    pub buffer_radius: f64,
    /// Grid cell size; twice the buffer radius when unset.
    pub cell_size: Option<f64>,
    pub night_confidence: f64,
    /// TOML keyword file; the built-in lists when unset.
    pub keywords: Option<PathBuf>,
    pub thresholds: Vec<u64>,
    pub targets: Vec<String>,
    pub reference_category: VenueCategory,
    pub night_bins: usize,
    pub gender_bins: usize,
    pub tags_bins: usize,
    pub out_dir: PathBuf,
    /// Seed for synthetic generation; the analysis itself draws no randomness.
    pub seed: u64,
    pub strict: bool,
    pub parallel: bool,
    /// Synthetic city parameters for the `synth` command.
    pub synth: SynthSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            streets: None,
            photos: None,
            venues: None,
            buffer_radius: DEFAULT_BUFFER_RADIUS_M,
            cell_size: None,
            night_confidence: DEFAULT_NIGHT_CONFIDENCE,
            keywords: None,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            targets: vec!["safety".into(), "walkability".into()],
            reference_category: VenueCategory::Travel,
            night_bins: 3,
            gender_bins: 4,
            tags_bins: 3,
            out_dir: PathBuf::from("out"),
            seed: 0,
            strict: false,
            parallel: true,
            synth: SynthSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size.unwrap_or(2.0 * self.buffer_radius)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.buffer_radius > 0.0 && self.buffer_radius.is_finite()) {
            return Err(Error::Config(format!("buffer-radius must be > 0, got {}", self.buffer_radius)));
        }
        if self.cell_size() < self.buffer_radius {
            return Err(Error::Config(format!(
                "cell-size {} is smaller than buffer-radius {}",
                self.cell_size(),
                self.buffer_radius
            )));
        }
        if !(self.night_confidence > 0.0 && self.night_confidence <= 1.0) {
            return Err(Error::Config(format!(
                "night-confidence must be in (0, 1], got {}",
                self.night_confidence
            )));
        }
        for t in &self.targets {
            if t != "safety" && t != "walkability" {
                return Err(Error::Config(format!("unknown regression target `{t}`")));
            }
        }
        for (name, k) in [
            ("night-bins", self.night_bins),
            ("gender-bins", self.gender_bins),
            ("tags-bins", self.tags_bins),
        ] {
            if k < 2 {
                return Err(Error::Config(format!("{name} must be at least 2")));
            }
        }
        Ok(())
    }

    /// Synthetic spec with the top-level seed applied.
    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    pub fn require(path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        path.clone()
            .ok_or_else(|| Error::Config(format!("missing input path `{key}`")))
    }
}
