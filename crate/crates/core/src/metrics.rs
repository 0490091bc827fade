//! Raw metric extraction from a validated session.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::index::MainIndexId;
use crate::stats;
use crate::telemetry::{
    BatterySample, DeviceMeta, GameSettings, Launch, SceneLoad, SessionTelemetry,
    TemperatureSample, TouchEvent,
};

/// Fixed metric identifiers used by config files and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricId {
    AvgFps,
    Low1Fps,
    FpsStability,
    GfxPoints,
    DrainPctPerHour,
    PeakTempC,
    TempRiseC,
    LaunchS,
    SceneLoadS,
    TouchLatencyMs,
}

impl MetricId {
    pub const ALL: [MetricId; 10] = [
        MetricId::AvgFps,
        MetricId::Low1Fps,
        MetricId::FpsStability,
        MetricId::GfxPoints,
        MetricId::DrainPctPerHour,
        MetricId::PeakTempC,
        MetricId::TempRiseC,
        MetricId::LaunchS,
        MetricId::SceneLoadS,
        MetricId::TouchLatencyMs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::AvgFps => "avg_fps",
            MetricId::Low1Fps => "low1_fps",
            MetricId::FpsStability => "fps_stability",
            MetricId::GfxPoints => "gfx_points",
            MetricId::DrainPctPerHour => "drain_pct_per_hour",
            MetricId::PeakTempC => "peak_temp_c",
            MetricId::TempRiseC => "temp_rise_c",
            MetricId::LaunchS => "launch_s",
            MetricId::SceneLoadS => "scene_load_s",
            MetricId::TouchLatencyMs => "touch_latency_ms",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            MetricId::AvgFps | MetricId::Low1Fps => "fps",
            MetricId::FpsStability | MetricId::GfxPoints => "fraction",
            MetricId::DrainPctPerHour => "%/h",
            MetricId::PeakTempC | MetricId::TempRiseC => "°C",
            MetricId::LaunchS | MetricId::SceneLoadS => "s",
            MetricId::TouchLatencyMs => "ms",
        }
    }

    /// The main index this metric feeds.
    pub fn main_index(self) -> MainIndexId {
        match self {
            MetricId::AvgFps | MetricId::Low1Fps | MetricId::FpsStability => {
                MainIndexId::VisualSmoothness
            }
            MetricId::GfxPoints => MainIndexId::GraphicalQuality,
            MetricId::DrainPctPerHour => MainIndexId::Battery,
            MetricId::PeakTempC | MetricId::TempRiseC => MainIndexId::Temperature,
            MetricId::LaunchS | MetricId::SceneLoadS => MainIndexId::Swiftness,
            MetricId::TouchLatencyMs => MainIndexId::Responsiveness,
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown metric id `{0}`")]
pub struct UnknownMetric(pub String);

impl FromStr for MetricId {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("insufficient {stream} samples: {detail}")]
    InsufficientSamples {
        stream: &'static str,
        detail: String,
    },
}

/// A metric error tagged with the metric that could not be computed.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{metric}: {source}")]
pub struct ExtractError {
    pub metric: MetricId,
    #[source]
    pub source: MetricError,
}

/// Raw metric values for one session.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSet {
    pub avg_fps: f64,
    pub low_percentile_fps: f64,
    pub fps_stability: f64,
    /// Battery percent per hour.
    pub drain_rate: f64,
    pub peak_temp: f64,
    pub temp_rise: f64,
    /// Seconds.
    pub launch_time: Option<f64>,
    /// Seconds.
    pub mean_scene_load: Option<f64>,
    /// Milliseconds.
    pub median_touch_latency: Option<f64>,
    pub gfx_quality_points: f64,
    /// Seconds between first and last frame.
    pub session_duration: f64,
}

impl MetricSet {
    pub fn get(&self, id: MetricId) -> Option<f64> {
        match id {
            MetricId::AvgFps => Some(self.avg_fps),
            MetricId::Low1Fps => Some(self.low_percentile_fps),
            MetricId::FpsStability => Some(self.fps_stability),
            MetricId::GfxPoints => Some(self.gfx_quality_points),
            MetricId::DrainPctPerHour => Some(self.drain_rate),
            MetricId::PeakTempC => Some(self.peak_temp),
            MetricId::TempRiseC => Some(self.temp_rise),
            MetricId::LaunchS => self.launch_time,
            MetricId::SceneLoadS => self.mean_scene_load,
            MetricId::TouchLatencyMs => self.median_touch_latency,
        }
    }
}

/// Percentile used for the low-FPS metric ("1% low").
pub const LOW_FPS_PERCENTILE: f64 = 1.0;
/// Relative band around the median frame interval counted as stable.
pub const STABILITY_BAND: f64 = 0.2;
/// Minimum span of battery samples for a drain rate.
pub const MIN_BATTERY_SPAN_MS: i64 = 60_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpsMetrics {
    pub avg_fps: f64,
    pub low_percentile_fps: f64,
    pub fps_stability: f64,
}

/// Frame intervals in ms between consecutive present timestamps.
///
/// A zero-length interval is folded into the following one, so only positive
/// intervals remain.
pub fn frame_intervals(frames: &[i64]) -> Vec<i64> {
    frames
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&dt| dt != 0)
        .collect()
}

pub fn compute_fps_metrics(frames: &[i64]) -> Result<FpsMetrics, MetricError> {
    if frames.len() < 2 {
        return Err(MetricError::DegenerateInput(format!(
            "need at least 2 frame timestamps, found {}",
            frames.len()
        )));
    }
    if frames.windows(2).any(|w| w[1] < w[0]) {
        return Err(MetricError::DegenerateInput(
            "frame timestamps decrease".into(),
        ));
    }
    let span_ms = frames[frames.len() - 1] - frames[0];
    if span_ms <= 0 {
        return Err(MetricError::DegenerateInput(
            "all frame timestamps are equal".into(),
        ));
    }

    let avg_fps = (frames.len() - 1) as f64 / (span_ms as f64 / 1000.0);

    let mut intervals = frame_intervals(frames);
    intervals.sort_unstable();
    let n = intervals.len();

    // The k-th lowest instantaneous FPS comes from the k-th longest interval.
    let rank = stats::nearest_rank(LOW_FPS_PERCENTILE, n);
    let low_percentile_fps = 1000.0 / intervals[n - rank] as f64;

    let median_dt = if n % 2 == 1 {
        intervals[n / 2] as f64
    } else {
        (intervals[n / 2 - 1] as f64 + intervals[n / 2] as f64) / 2.0
    };
    let band = STABILITY_BAND * median_dt;
    let stable = intervals
        .iter()
        .filter(|&&dt| (dt as f64 - median_dt).abs() <= band)
        .count();

    Ok(FpsMetrics {
        avg_fps,
        low_percentile_fps,
        fps_stability: stable as f64 / n as f64,
    })
}

/// Endpoint battery drain in percent per hour, floored at zero.
pub fn compute_battery_metrics(battery: &[BatterySample]) -> Result<f64, MetricError> {
    let (first, last) = match battery {
        [first, .., last] => (first, last),
        _ => {
            return Err(MetricError::InsufficientSamples {
                stream: "battery",
                detail: format!("need at least 2 samples, found {}", battery.len()),
            })
        }
    };
    let span_ms = last.t - first.t;
    if span_ms <= MIN_BATTERY_SPAN_MS {
        return Err(MetricError::InsufficientSamples {
            stream: "battery",
            detail: format!("samples span {span_ms}ms, need more than {MIN_BATTERY_SPAN_MS}ms"),
        });
    }
    let span_hours = span_ms as f64 / 3_600_000.0;
    Ok(((first.level - last.level) / span_hours).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalMetrics {
    pub peak_temp: f64,
    pub temp_rise: f64,
}

/// Peak over every sensor, and rise relative to the chronologically first sample.
pub fn compute_thermal_metrics(
    temperature: &[TemperatureSample],
) -> Result<ThermalMetrics, MetricError> {
    let first = temperature
        .first()
        .ok_or(MetricError::InsufficientSamples {
            stream: "temperature",
            detail: "need at least 1 sample".into(),
        })?;
    let peak_temp = temperature
        .iter()
        .map(|s| s.value)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ThermalMetrics {
        peak_temp,
        temp_rise: peak_temp - first.value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SwiftnessMetrics {
    pub launch_time: Option<f64>,
    pub mean_scene_load: Option<f64>,
}

pub fn compute_swiftness_metrics(
    launch: Option<&Launch>,
    scene_loads: &[SceneLoad],
) -> SwiftnessMetrics {
    let launch_time = launch.map(|l| (l.t_first_frame - l.t_start) as f64 / 1000.0);
    let mean_scene_load = (!scene_loads.is_empty()).then(|| {
        let total: f64 = scene_loads
            .iter()
            .map(|l| (l.t_end - l.t_start) as f64 / 1000.0)
            .sum();
        total / scene_loads.len() as f64
    });
    SwiftnessMetrics {
        launch_time,
        mean_scene_load,
    }
}

/// Median touch latency in ms; `None` without touch events.
pub fn compute_responsiveness_metrics(touch: &[TouchEvent]) -> Option<f64> {
    let mut latencies: Vec<f64> = touch.iter().map(|e| e.latency).collect();
    stats::median_in_place(&mut latencies)
}

/// Weights of the graphical-quality blend. They come from the engine config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfxWeights {
    pub tiers: f64,
    pub render_scale: f64,
    pub pixel_density: f64,
    /// ppi at which the pixel-density factor saturates at 1.
    pub ppi_reference: f64,
    /// Pixel-density factor used when the device does not report ppi.
    pub ppi_default_factor: f64,
}

impl Default for GfxWeights {
    fn default() -> Self {
        GfxWeights {
            tiers: 0.5,
            render_scale: 0.3,
            pixel_density: 0.2,
            ppi_reference: 500.0,
            ppi_default_factor: 0.5,
        }
    }
}

impl GfxWeights {
    pub fn validate(&self) -> Result<(), String> {
        let weights = [self.tiers, self.render_scale, self.pixel_density];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err("gfx weights must be finite and non-negative".into());
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("gfx weights must sum to 1, found {sum}"));
        }
        if !(self.ppi_reference.is_finite() && self.ppi_reference > 0.0) {
            return Err("gfx ppi_reference must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.ppi_default_factor) {
            return Err("gfx ppi_default_factor must lie in [0,1]".into());
        }
        Ok(())
    }
}

pub fn compute_gfx_quality(
    settings: &GameSettings,
    device: &DeviceMeta,
    weights: &GfxWeights,
) -> f64 {
    let tier_mean = settings
        .tiers()
        .iter()
        .map(|&t| f64::from(t) / f64::from(GameSettings::MAX_TIER))
        .sum::<f64>()
        / 4.0;
    let ppi_factor = device
        .display_ppi
        .map(|ppi| (ppi / weights.ppi_reference).clamp(0.0, 1.0))
        .unwrap_or(weights.ppi_default_factor);
    let points = weights.tiers * tier_mean
        + weights.render_scale * settings.render_scale
        + weights.pixel_density * ppi_factor;
    points.clamp(0.0, 1.0)
}

pub fn extract_metrics(session: &SessionTelemetry) -> Result<MetricSet, ExtractError> {
    extract_metrics_with(session, &GfxWeights::default())
}

pub fn extract_metrics_with(
    session: &SessionTelemetry,
    gfx: &GfxWeights,
) -> Result<MetricSet, ExtractError> {
    let fps = compute_fps_metrics(&session.frames).map_err(|source| ExtractError {
        metric: MetricId::AvgFps,
        source,
    })?;
    let drain_rate = compute_battery_metrics(&session.battery).map_err(|source| ExtractError {
        metric: MetricId::DrainPctPerHour,
        source,
    })?;
    let thermal = compute_thermal_metrics(&session.temperature).map_err(|source| ExtractError {
        metric: MetricId::PeakTempC,
        source,
    })?;
    let swift = compute_swiftness_metrics(session.launch.as_ref(), &session.scene_loads);

    Ok(MetricSet {
        avg_fps: fps.avg_fps,
        low_percentile_fps: fps.low_percentile_fps,
        fps_stability: fps.fps_stability,
        drain_rate,
        peak_temp: thermal.peak_temp,
        temp_rise: thermal.temp_rise,
        launch_time: swift.launch_time,
        mean_scene_load: swift.mean_scene_load,
        median_touch_latency: compute_responsiveness_metrics(&session.touch),
        gfx_quality_points: compute_gfx_quality(&session.settings, &session.device, gfx),
        session_duration: session.duration_ms() as f64 / 1000.0,
    })
}
