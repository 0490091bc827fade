//! Sub-index scores to main indices, main indices to the overall score, and
//! median aggregation across repeated sessions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::metrics::{extract_metrics_with, ExtractError, GfxWeights, MetricId};
use crate::scoring::{map_metric, CurveSet, SubIndexScore, MAX_SCORE, MIN_SCORE};
use crate::stats;
use crate::telemetry::SessionTelemetry;

/// Normalized weights are snapped to multiples of 2^-40 so that proportional
/// weight vectors normalize to bit-identical values.
const WEIGHT_GRID: f64 = (1u64 << 40) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MainIndexId {
    VisualSmoothness,
    GraphicalQuality,
    Battery,
    Temperature,
    Swiftness,
    Responsiveness,
}

impl MainIndexId {
    pub const ALL: [MainIndexId; 6] = [
        MainIndexId::VisualSmoothness,
        MainIndexId::GraphicalQuality,
        MainIndexId::Battery,
        MainIndexId::Temperature,
        MainIndexId::Swiftness,
        MainIndexId::Responsiveness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MainIndexId::VisualSmoothness => "visual_smoothness",
            MainIndexId::GraphicalQuality => "graphical_quality",
            MainIndexId::Battery => "battery",
            MainIndexId::Temperature => "temperature",
            MainIndexId::Swiftness => "swiftness",
            MainIndexId::Responsiveness => "responsiveness",
        }
    }

    /// Two-letter column name used in csv reports.
    pub fn short_code(self) -> &'static str {
        match self {
            MainIndexId::VisualSmoothness => "vs",
            MainIndexId::GraphicalQuality => "gq",
            MainIndexId::Battery => "ba",
            MainIndexId::Temperature => "te",
            MainIndexId::Swiftness => "sw",
            MainIndexId::Responsiveness => "re",
        }
    }

    pub fn metrics(self) -> impl Iterator<Item = MetricId> {
        MetricId::ALL
            .into_iter()
            .filter(move |m| m.main_index() == self)
    }
}

impl fmt::Display for MainIndexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MainIndexId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MainIndexId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown main index `{s}`"))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("metric `{metric}` does not belong to main index `{index}`")]
    UnknownMetric {
        index: MainIndexId,
        metric: MetricId,
    },
    #[error("weight for `{key}` must be finite and non-negative, found {weight}")]
    Invalid { key: String, weight: f64 },
    #[error("weights for `{0}` are all zero")]
    AllZero(String),
}

/// A named persona: how sub-indices combine into main indices and how main indices
/// combine into the overall score. Weights are normalized at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexProfile {
    name: String,
    sub_weights: BTreeMap<MainIndexId, BTreeMap<MetricId, f64>>,
    main_weights: BTreeMap<MainIndexId, f64>,
}

impl IndexProfile {
    /// Main indices missing from `main_weights` get weight 0. A main index without a
    /// sub-weight map weights its metrics equally.
    pub fn new(
        name: impl Into<String>,
        main_weights: BTreeMap<MainIndexId, f64>,
        sub_weights: BTreeMap<MainIndexId, BTreeMap<MetricId, f64>>,
    ) -> Result<Self, WeightError> {
        let name = name.into();
        let mut normalized_sub = BTreeMap::new();
        for index in MainIndexId::ALL {
            let raw = match sub_weights.get(&index) {
                Some(w) if !w.is_empty() => w.clone(),
                _ => index.metrics().map(|m| (m, 1.0)).collect(),
            };
            if let Some(&metric) = raw.keys().find(|m| m.main_index() != index) {
                return Err(WeightError::UnknownMetric { index, metric });
            }
            normalized_sub.insert(
                index,
                normalize(raw, |m| m.to_string(), &format!("{name}.{index}"))?,
            );
        }
        let main = normalize(main_weights, |m| m.to_string(), &name)?;
        Ok(IndexProfile {
            name,
            sub_weights: normalized_sub,
            main_weights: main,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn main_weight(&self, index: MainIndexId) -> f64 {
        self.main_weights.get(&index).copied().unwrap_or(0.0)
    }

    pub fn main_weights(&self) -> &BTreeMap<MainIndexId, f64> {
        &self.main_weights
    }

    pub fn sub_weights(&self, index: MainIndexId) -> &BTreeMap<MetricId, f64> {
        &self.sub_weights[&index]
    }
}

fn normalize<K: Ord + Copy>(
    raw: BTreeMap<K, f64>,
    key_name: impl Fn(&K) -> String,
    owner: &str,
) -> Result<BTreeMap<K, f64>, WeightError> {
    for (k, &w) in &raw {
        if !(w.is_finite() && w >= 0.0) {
            return Err(WeightError::Invalid {
                key: key_name(k),
                weight: w,
            });
        }
    }
    let total: f64 = raw.values().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(WeightError::AllZero(owner.to_string()));
    }
    Ok(raw
        .into_iter()
        .map(|(k, w)| (k, ((w / total) * WEIGHT_GRID).round() / WEIGHT_GRID))
        .collect())
}

/// A score that may be absent, with notes on any missing-data handling.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlaggedScore {
    pub score: Option<f64>,
    pub flags: Vec<String>,
}

/// Weighted mean over present entries with weights renormalized over them.
///
/// Returns `None` when no present entry carries positive weight.
fn renormalized_mean(entries: impl Iterator<Item = (f64, Option<f64>)>) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (w, score) in entries {
        if let Some(s) = score {
            if w > 0.0 {
                num += w * s;
                den += w;
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
    }
    (den > 0.0).then(|| (num / den).clamp(lo, hi))
}

/// Combines one main index's sub-index scores. `None` entries are metrics that
/// could not be measured; their weight is redistributed over the present ones.
pub fn score_main_index(
    index: MainIndexId,
    sub_scores: &[(MetricId, Option<f64>)],
    weights: &BTreeMap<MetricId, f64>,
) -> Result<FlaggedScore, WeightError> {
    if let Some(&metric) = weights.keys().find(|m| m.main_index() != index) {
        return Err(WeightError::UnknownMetric { index, metric });
    }
    let weight = |m: &MetricId| weights.get(m).copied().unwrap_or(0.0);
    let missing: Vec<&str> = sub_scores
        .iter()
        .filter(|(m, s)| s.is_none() && weight(m) > 0.0)
        .map(|(m, _)| m.as_str())
        .collect();

    let score = renormalized_mean(sub_scores.iter().map(|(m, s)| (weight(m), *s)));
    let mut flags = Vec::new();
    match score {
        None => flags.push(format!("{index}: no weighted metric measured")),
        Some(_) if !missing.is_empty() => flags.push(format!(
            "{index}: renormalized without {}",
            missing.join(" ")
        )),
        Some(_) => {}
    }
    Ok(FlaggedScore { score, flags })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("all main indices are absent")]
    AllIndicesAbsent,
    #[error("no main index with positive weight in profile `{0}` was measured")]
    NoWeightedIndex(String),
    #[error("no sessions to aggregate")]
    EmptyInput,
}

/// Overall score: weighted mean of the present main indices under the profile's weights.
pub fn score_overall(
    main_scores: &BTreeMap<MainIndexId, Option<f64>>,
    profile: &IndexProfile,
) -> Result<(f64, Vec<String>), IndexError> {
    if main_scores.values().all(Option::is_none) {
        return Err(IndexError::AllIndicesAbsent);
    }
    let entries = MainIndexId::ALL.into_iter().map(|i| {
        (
            profile.main_weight(i),
            main_scores.get(&i).copied().flatten(),
        )
    });
    let overall = renormalized_mean(entries)
        .ok_or_else(|| IndexError::NoWeightedIndex(profile.name.clone()))?;

    let missing: Vec<&str> = MainIndexId::ALL
        .into_iter()
        .filter(|i| {
            profile.main_weight(*i) > 0.0 && main_scores.get(i).copied().flatten().is_none()
        })
        .map(MainIndexId::as_str)
        .collect();
    let flags = if missing.is_empty() {
        Vec::new()
    } else {
        vec![format!(
            "overall: renormalized without {}",
            missing.join(" ")
        )]
    };
    Ok((overall, flags))
}

/// Median of per-session scores.
pub fn aggregate_sessions(per_session: &[f64]) -> Result<f64, IndexError> {
    stats::median(per_session).ok_or(IndexError::EmptyInput)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionScore {
    /// Sub-index scores of the measured metrics, in metric order.
    pub sub_scores: Vec<SubIndexScore>,
    pub main: BTreeMap<MainIndexId, Option<f64>>,
    pub overall: f64,
    pub flags: Vec<String>,
}

/// Full score tree for one device under one profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCard {
    pub device_id: String,
    pub profile_name: String,
    pub sessions: Vec<SessionScore>,
    /// Median of the per-session overall scores.
    pub overall: f64,
    /// Median per main index over the sessions where it was measured.
    pub main: BTreeMap<MainIndexId, Option<f64>>,
    /// Distinct missing-data notes across sessions, sorted.
    pub flags: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("no sessions for device")]
    EmptyInput,
    #[error("sessions from several devices: `{first}` and `{other}`")]
    MixedDevices { first: String, other: String },
    #[error("session {session}: {source}")]
    Metric {
        session: usize,
        #[source]
        source: ExtractError,
    },
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error("session {session}: {source}")]
    Index {
        session: usize,
        #[source]
        source: IndexError,
    },
}

/// Runs one session through extraction, curve mapping and both aggregation levels.
pub fn score_session(
    session: &SessionTelemetry,
    profile: &IndexProfile,
    curves: &CurveSet,
    gfx: &GfxWeights,
) -> Result<SessionScore, ScoreError> {
    let metrics = extract_metrics_with(session, gfx)
        .map_err(|source| ScoreError::Metric { session: 0, source })?;

    let mut sub_scores = Vec::new();
    let mut main = BTreeMap::new();
    let mut flags = Vec::new();
    for index in MainIndexId::ALL {
        let entries: Vec<(MetricId, Option<f64>)> = index
            .metrics()
            .map(|m| {
                let mapped = metrics.get(m).map(|v| map_metric(m, v, curves.get(m)));
                if let Some(s) = mapped {
                    sub_scores.push(s);
                }
                (m, mapped.map(|s| s.score))
            })
            .collect();
        let scored = score_main_index(index, &entries, profile.sub_weights(index))?;
        flags.extend(scored.flags);
        main.insert(index, scored.score);
    }
    sub_scores.sort_by_key(|s| s.metric_id);

    let (overall, overall_flags) =
        score_overall(&main, profile).map_err(|source| ScoreError::Index { session: 0, source })?;
    flags.extend(overall_flags);
    Ok(SessionScore {
        sub_scores,
        main,
        overall,
        flags,
    })
}

/// Scores every session of one device and aggregates them by median.
pub fn score_device(
    sessions: &[SessionTelemetry],
    profile: &IndexProfile,
    curves: &CurveSet,
    gfx: &GfxWeights,
) -> Result<ScoreCard, ScoreError> {
    let first = sessions.first().ok_or(ScoreError::EmptyInput)?;
    let device_id = first.device.device_id.clone();
    if let Some(other) = sessions.iter().find(|s| s.device.device_id != device_id) {
        return Err(ScoreError::MixedDevices {
            first: device_id,
            other: other.device.device_id.clone(),
        });
    }

    let scored = sessions
        .iter()
        .enumerate()
        .map(|(i, s)| {
            score_session(s, profile, curves, gfx).map_err(|e| match e {
                ScoreError::Metric { source, .. } => ScoreError::Metric { session: i, source },
                ScoreError::Index { source, .. } => ScoreError::Index { session: i, source },
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let overalls: Vec<f64> = scored.iter().map(|s| s.overall).collect();
    let overall =
        aggregate_sessions(&overalls).map_err(|source| ScoreError::Index { session: 0, source })?;

    let mut flags: BTreeSet<String> = scored
        .iter()
        .flat_map(|s| s.flags.iter().cloned())
        .collect();
    let mut main = BTreeMap::new();
    for index in MainIndexId::ALL {
        let present: Vec<f64> = scored.iter().filter_map(|s| s.main[&index]).collect();
        if !present.is_empty() && present.len() < scored.len() {
            flags.insert(format!(
                "{index}: measured in {} of {} sessions",
                present.len(),
                scored.len()
            ));
        }
        main.insert(index, stats::median(&present));
    }

    debug_assert!((MIN_SCORE..=MAX_SCORE).contains(&overall));
    Ok(ScoreCard {
        device_id,
        profile_name: profile.name.clone(),
        sessions: scored,
        overall,
        main,
        flags: flags.into_iter().collect(),
    })
}
