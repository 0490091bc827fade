//! Engine configuration: mapping curves, persona profiles and graphical-quality weights.
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "gfx": { "tiers": 0.5, "render_scale": 0.3, "pixel_density": 0.2,
//!            "ppi_reference": 500, "ppi_default_factor": 0.5 },
//!   "curves": { "<metric_id>": [[value, score], ...], ... },
//!   "profiles": {
//!     "<name>": {
//!       "main_weights": { "<main_index>": weight, ... },
//!       "sub_weights": { "<main_index>": { "<metric_id>": weight, ... }, ... }
//!     }
//!   }
//! }
//! ```
//!
//! `gfx` is optional. A curve is required for every metric id.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::index::{IndexProfile, MainIndexId, WeightError};
use crate::metrics::{GfxWeights, MetricId};
use crate::scoring::{validate_curve, CurveError, CurveSet, CurveSetError};

pub const CONFIG_SCHEMA_VERSION: u64 = 1;

/// The shipped default configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../data/default_config.json");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported config schema_version {0}")]
    Version(u64),
    #[error("unknown metric id `{0}`")]
    UnknownMetric(String),
    #[error("unknown main index `{0}`")]
    UnknownIndex(String),
    #[error("curve `{metric}`: {source}")]
    Curve {
        metric: MetricId,
        #[source]
        source: CurveError,
    },
    #[error(transparent)]
    MissingCurve(#[from] CurveSetError),
    #[error("profile `{profile}`: {source}")]
    Profile {
        profile: String,
        #[source]
        source: WeightError,
    },
    #[error("config defines no profiles")]
    NoProfiles,
    #[error("gfx weights: {0}")]
    Gfx(String),
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GfxDoc {
    tiers: f64,
    render_scale: f64,
    pixel_density: f64,
    ppi_reference: f64,
    ppi_default_factor: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    main_weights: BTreeMap<String, f64>,
    #[serde(default)]
    sub_weights: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    schema_version: u64,
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
    #[serde(default)]
    gfx: Option<GfxDoc>,
    curves: BTreeMap<String, Vec<(f64, f64)>>,
    profiles: BTreeMap<String, ProfileDoc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub curves: CurveSet,
    pub profiles: BTreeMap<String, IndexProfile>,
    pub gfx: GfxWeights,
}

fn metric_id(s: &str) -> Result<MetricId, ConfigError> {
    s.parse()
        .map_err(|_| ConfigError::UnknownMetric(s.to_string()))
}

fn index_id(s: &str) -> Result<MainIndexId, ConfigError> {
    s.parse()
        .map_err(|_| ConfigError::UnknownIndex(s.to_string()))
}

impl EngineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let doc: ConfigDoc = serde_json::from_str(text)?;
        if doc.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ConfigError::Version(doc.schema_version));
        }

        let gfx = match doc.gfx {
            None => GfxWeights::default(),
            Some(g) => GfxWeights {
                tiers: g.tiers,
                render_scale: g.render_scale,
                pixel_density: g.pixel_density,
                ppi_reference: g.ppi_reference,
                ppi_default_factor: g.ppi_default_factor,
            },
        };
        gfx.validate().map_err(ConfigError::Gfx)?;

        let mut curves = BTreeMap::new();
        for (name, points) in doc.curves {
            let metric = metric_id(&name)?;
            let curve =
                validate_curve(points).map_err(|source| ConfigError::Curve { metric, source })?;
            curves.insert(metric, curve);
        }
        let curves = CurveSet::new(curves)?;

        if doc.profiles.is_empty() {
            return Err(ConfigError::NoProfiles);
        }
        let mut profiles = BTreeMap::new();
        for (name, p) in doc.profiles {
            let main = p
                .main_weights
                .iter()
                .map(|(k, &w)| Ok((index_id(k)?, w)))
                .collect::<Result<BTreeMap<_, _>, ConfigError>>()?;
            let mut sub = BTreeMap::new();
            for (index, weights) in &p.sub_weights {
                let weights = weights
                    .iter()
                    .map(|(k, &w)| Ok((metric_id(k)?, w)))
                    .collect::<Result<BTreeMap<_, _>, ConfigError>>()?;
                sub.insert(index_id(index)?, weights);
            }
            let profile = IndexProfile::new(name.clone(), main, sub).map_err(|source| {
                ConfigError::Profile {
                    profile: name.clone(),
                    source,
                }
            })?;
            profiles.insert(name, profile);
        }
        Ok(EngineConfig {
            curves,
            profiles,
            gfx,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn default_config() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("shipped default config is valid")
    }

    pub fn profile(&self, name: &str) -> Result<&IndexProfile, ConfigError> {
        self.profiles
            .get(name)
            .ok_or_else(|| ConfigError::UnknownProfile(name.to_string()))
    }
}
