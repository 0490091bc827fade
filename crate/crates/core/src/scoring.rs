//! Metric value to sub-index score mapping through monotone piecewise-linear curves.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::metrics::MetricId;

pub const MIN_SCORE: f64 = 0.0;
pub const MAX_SCORE: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("curve needs at least 2 breakpoints, found {0}")]
    TooFewBreakpoints(usize),
    #[error("breakpoint {index} is not finite")]
    NonFinite { index: usize },
    #[error("breakpoint values not strictly increasing at index {index}")]
    ValuesNotIncreasing { index: usize },
    #[error("breakpoint score {score} outside [0,100] at index {index}")]
    ScoreOutOfRange { index: usize, score: f64 },
    #[error("breakpoint scores not monotone at index {index}")]
    ScoresNotMonotone { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Higher metric values earn higher scores.
    Increasing,
    /// Higher metric values earn lower scores.
    Decreasing,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    pub value: f64,
    pub score: f64,
}

impl From<(f64, f64)> for Breakpoint {
    fn from((value, score): (f64, f64)) -> Self {
        Breakpoint { value, score }
    }
}

/// A validated monotone piecewise-linear value-to-score function.
///
/// Values outside the breakpoint range clamp to the first or last score.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingCurve {
    values: Vec<f64>,
    scores: Vec<f64>,
    direction: Direction,
}

/// Builds a curve, rejecting any breakpoint list that would not be a bounded monotone function.
pub fn validate_curve<B: Into<Breakpoint>>(
    breakpoints: impl IntoIterator<Item = B>,
) -> Result<MappingCurve, CurveError> {
    let points: Vec<Breakpoint> = breakpoints.into_iter().map(Into::into).collect();
    if points.len() < 2 {
        return Err(CurveError::TooFewBreakpoints(points.len()));
    }
    let mut direction = Direction::Flat;
    for (index, p) in points.iter().enumerate() {
        if !(p.value.is_finite() && p.score.is_finite()) {
            return Err(CurveError::NonFinite { index });
        }
        if !(MIN_SCORE..=MAX_SCORE).contains(&p.score) {
            return Err(CurveError::ScoreOutOfRange {
                index,
                score: p.score,
            });
        }
        if index == 0 {
            continue;
        }
        let prev = points[index - 1];
        if p.value <= prev.value {
            return Err(CurveError::ValuesNotIncreasing { index });
        }
        let step = if p.score > prev.score {
            Direction::Increasing
        } else if p.score < prev.score {
            Direction::Decreasing
        } else {
            Direction::Flat
        };
        match (direction, step) {
            (_, Direction::Flat) => {}
            (Direction::Flat, d) => direction = d,
            (d, s) if d != s => return Err(CurveError::ScoresNotMonotone { index }),
            _ => {}
        }
    }
    Ok(MappingCurve {
        values: points.iter().map(|p| p.value).collect(),
        scores: points.iter().map(|p| p.score).collect(),
        direction,
    })
}

impl MappingCurve {
    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = Breakpoint> + '_ {
        self.values
            .iter()
            .zip(&self.scores)
            .map(|(&value, &score)| Breakpoint { value, score })
    }

    pub fn score_range(&self) -> (f64, f64) {
        let lo = self.scores.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .scores
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Largest absolute slope over all segments, in points per metric unit.
    pub fn max_slope(&self) -> f64 {
        self.values
            .windows(2)
            .zip(self.scores.windows(2))
            .map(|(v, s)| ((s[1] - s[0]) / (v[1] - v[0])).abs())
            .fold(0.0, f64::max)
    }

    pub fn eval(&self, value: f64) -> f64 {
        let last = self.values.len() - 1;
        if value <= self.values[0] {
            return self.scores[0];
        }
        if value >= self.values[last] {
            return self.scores[last];
        }
        // First breakpoint strictly greater than value; 1 <= hi <= last here.
        let hi = self.values.partition_point(|&v| v <= value);
        let lo = hi - 1;
        if self.values[lo] == value {
            return self.scores[lo];
        }
        let (v0, v1) = (self.values[lo], self.values[hi]);
        let (s0, s1) = (self.scores[lo], self.scores[hi]);
        let t = (value - v0) / (v1 - v0);
        let score = s0 + t * (s1 - s0);
        // Keep rounding inside the segment so monotonicity survives segment joins.
        score.clamp(s0.min(s1), s0.max(s1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubIndexScore {
    pub metric_id: MetricId,
    pub raw_value: f64,
    pub score: f64,
}

pub fn map_metric(metric_id: MetricId, value: f64, curve: &MappingCurve) -> SubIndexScore {
    SubIndexScore {
        metric_id,
        raw_value: value,
        score: curve.eval(value),
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveSetError {
    #[error("no mapping curve for metric `{0}`")]
    Missing(MetricId),
}

/// One validated curve for every metric.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    curves: BTreeMap<MetricId, MappingCurve>,
}

impl CurveSet {
    pub fn new(curves: BTreeMap<MetricId, MappingCurve>) -> Result<Self, CurveSetError> {
        if let Some(missing) = MetricId::ALL.into_iter().find(|m| !curves.contains_key(m)) {
            return Err(CurveSetError::Missing(missing));
        }
        Ok(CurveSet { curves })
    }

    pub fn get(&self, metric: MetricId) -> &MappingCurve {
        &self.curves[&metric]
    }

    pub fn iter(&self) -> impl Iterator<Item = (MetricId, &MappingCurve)> {
        self.curves.iter().map(|(k, v)| (*k, v))
    }
}
