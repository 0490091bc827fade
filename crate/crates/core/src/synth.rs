//! Seeded synthetic sessions from a parametric device model.
//!
//! Randomness comes from SplitMix64 (the reference generator at
//! <https://prng.di.unimi.it/splitmix64.c>), consumed as follows so the stream can be
//! reproduced in any language:
//!
//! * uniform in [0,1): `(next_u64() >> 11) * 2^-53`
//! * standard normal: sum of 12 uniforms minus 6 (Irwin-Hall), which needs no
//!   transcendental functions and is therefore bit-portable
//! * frame jitter draws one normal per frame; touch jitter draws one uniform per
//!   pair of touch events
//!
//! Session `k` of a device uses seed `mix(model.seed ^ k)`, where `mix` is the
//! SplitMix64 output function applied once.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::Deserialize;
use thiserror::Error;

use crate::telemetry::{
    BatterySample, DeviceMeta, GameSettings, Launch, SceneLoad, SessionTelemetry,
    TemperatureSample, TouchEvent, SCHEMA_VERSION,
};

pub const MIN_DURATION_S: f64 = 120.0;
pub const BATTERY_PERIOD_MS: i64 = 30_000;
pub const TEMPERATURE_PERIOD_MS: i64 = 10_000;
pub const TOUCH_PERIOD_MS: i64 = 2_000;
pub const SCENE_LOAD_PERIOD_MS: i64 = 120_000;
/// Scene loads take this fraction of the launch time.
pub const SCENE_LOAD_FRACTION: f64 = 0.3;
pub const TOUCH_JITTER: f64 = 0.1;
pub const BATTERY_START_LEVEL: f64 = 100.0;
pub const TEMPERATURE_SENSOR: &str = "skin";

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid device model: {0}")]
pub struct ModelError(pub String);

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceModel {
    pub base_frame_time_ms: f64,
    #[serde(default)]
    pub frame_jitter_sd_ms: f64,
    /// Seconds after the first frame at which frame times inflate.
    #[serde(default)]
    pub throttle_onset_s: Option<f64>,
    #[serde(default = "one")]
    pub throttle_factor: f64,
    pub drain_rate_pct_per_hour: f64,
    pub temp_start_c: f64,
    pub temp_peak_c: f64,
    pub touch_latency_ms: f64,
    pub launch_time_s: f64,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl DeviceModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: &str| Err(ModelError(msg.to_string()));
        let finite = [
            self.base_frame_time_ms,
            self.frame_jitter_sd_ms,
            self.throttle_factor,
            self.drain_rate_pct_per_hour,
            self.temp_start_c,
            self.temp_peak_c,
            self.touch_latency_ms,
            self.launch_time_s,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return fail("all parameters must be finite");
        }
        if self.base_frame_time_ms <= 0.0 {
            return fail("base_frame_time_ms must be positive");
        }
        if self.frame_jitter_sd_ms < 0.0 {
            return fail("frame_jitter_sd_ms must be non-negative");
        }
        if self.throttle_factor < 1.0 {
            return fail("throttle_factor must be at least 1");
        }
        if matches!(self.throttle_onset_s, Some(t) if !(t.is_finite() && t >= 0.0)) {
            return fail("throttle_onset_s must be non-negative");
        }
        if self.drain_rate_pct_per_hour < 0.0 {
            return fail("drain_rate_pct_per_hour must be non-negative");
        }
        if self.temp_peak_c < self.temp_start_c {
            return fail("temp_peak_c must be at least temp_start_c");
        }
        if self.touch_latency_ms < 0.0 || self.launch_time_s < 0.0 {
            return fail("touch latency and launch time must be non-negative");
        }
        Ok(())
    }
}

/// Everything needed to synthesize sessions for one device.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDevice {
    pub device: DeviceMeta,
    pub settings: GameSettings,
    pub model: DeviceModel,
}

struct Noise(SplitMix64);

impl Noise {
    fn new(seed: u64) -> Self {
        Noise(SplitMix64::seed_from_u64(seed))
    }

    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn normal(&mut self) -> f64 {
        (0..12).map(|_| self.uniform()).sum::<f64>() - 6.0
    }
}

/// Seed for session `index` of a device seeded with `seed`.
pub fn session_seed(seed: u64, index: u64) -> u64 {
    SplitMix64::seed_from_u64(seed ^ index).next_u64()
}

fn round_to(x: f64, quantum: f64) -> f64 {
    (x / quantum).round() * quantum
}

/// Generates one session of `duration_s` seconds of gameplay using the model's seed.
pub fn generate_session(
    device: &SynthDevice,
    duration_s: f64,
) -> Result<SessionTelemetry, ModelError> {
    generate_session_seeded(device, duration_s, device.model.seed)
}

pub fn generate_session_seeded(
    device: &SynthDevice,
    duration_s: f64,
    seed: u64,
) -> Result<SessionTelemetry, ModelError> {
    let model = &device.model;
    model.validate()?;
    if !(duration_s.is_finite() && duration_s >= MIN_DURATION_S) {
        return Err(ModelError(format!(
            "duration must be at least {MIN_DURATION_S} s, found {duration_s}"
        )));
    }
    let mut noise = Noise::new(seed);

    let launch_ms = (model.launch_time_s * 1000.0).round() as i64;
    let duration_ms = duration_s * 1000.0;
    let end_ms = launch_ms + duration_ms.round() as i64;

    // Frame presents: continuous clock, rounded to integer ms on output.
    let throttle_ms = model.throttle_onset_s.map(|s| s * 1000.0);
    let expected = (duration_ms / model.base_frame_time_ms) as usize + 2;
    let mut frames = Vec::with_capacity(expected);
    let mut elapsed = 0.0_f64;
    let slack = 1e-6;
    while elapsed <= duration_ms + slack {
        frames.push(launch_ms + elapsed.round() as i64);
        let throttled = matches!(throttle_ms, Some(onset) if elapsed >= onset - slack);
        let base = if throttled {
            model.base_frame_time_ms * model.throttle_factor
        } else {
            model.base_frame_time_ms
        };
        let jitter = model.frame_jitter_sd_ms * noise.normal();
        elapsed += (base + jitter).max(0.1 * base);
    }

    let sample_times = |period: i64| {
        let mut times: Vec<i64> = (0..=end_ms / period).map(|k| k * period).collect();
        if times.last() != Some(&end_ms) {
            times.push(end_ms);
        }
        times
    };

    let battery = sample_times(BATTERY_PERIOD_MS)
        .into_iter()
        .map(|t| BatterySample {
            t,
            level: (BATTERY_START_LEVEL - model.drain_rate_pct_per_hour * t as f64 / 3_600_000.0)
                .max(0.0),
        })
        .collect();

    let saturation_ms = match model.throttle_onset_s {
        Some(onset) => (3.0 * onset * 1000.0).min(duration_ms),
        None => duration_ms,
    }
    .max(1.0);
    let temperature = sample_times(TEMPERATURE_PERIOD_MS)
        .into_iter()
        .map(|t| {
            let progress = (t as f64 / saturation_ms).min(1.0);
            TemperatureSample {
                t,
                value: round_to(
                    model.temp_start_c + (model.temp_peak_c - model.temp_start_c) * progress,
                    0.01,
                ),
                sensor: TEMPERATURE_SENSOR.to_string(),
            }
        })
        .collect();

    // Antithetic pairs keep the latency distribution symmetric around the true value.
    let mut touch = Vec::new();
    let mut pending: Option<f64> = None;
    let mut t = launch_ms + TOUCH_PERIOD_MS;
    while t <= end_ms {
        let offset = match pending.take() {
            Some(u) => -u,
            None => {
                let u = 2.0 * noise.uniform() - 1.0;
                pending = Some(u);
                u
            }
        };
        touch.push(TouchEvent {
            t,
            latency: round_to(model.touch_latency_ms * (1.0 + TOUCH_JITTER * offset), 0.01),
        });
        t += TOUCH_PERIOD_MS;
    }

    let load_ms = (SCENE_LOAD_FRACTION * launch_ms as f64).round() as i64;
    let mut scene_loads = Vec::new();
    let mut start = launch_ms + SCENE_LOAD_PERIOD_MS / 2;
    while start + load_ms <= end_ms {
        scene_loads.push(SceneLoad {
            t_start: start,
            t_end: start + load_ms,
        });
        start += SCENE_LOAD_PERIOD_MS;
    }

    let session = SessionTelemetry {
        schema_version: SCHEMA_VERSION,
        device: device.device.clone(),
        settings: device.settings.clone(),
        launch: Some(Launch {
            t_start: 0,
            t_first_frame: launch_ms,
        }),
        frames,
        battery,
        temperature,
        touch,
        scene_loads,
    };
    session
        .validate()
        .map_err(|e| ModelError(format!("generated session failed validation: {e}")))?;
    Ok(session)
}

/// `count` sessions for one device, each with its own derived seed.
pub fn generate_sessions(
    device: &SynthDevice,
    count: usize,
    duration_s: f64,
) -> Result<Vec<SessionTelemetry>, ModelError> {
    (0..count as u64)
        .map(|k| generate_session_seeded(device, duration_s, session_seed(device.model.seed, k)))
        .collect()
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("malformed corpus manifest: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("corpus manifest: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameSettingsDoc {
    game_id: String,
    render_scale: f64,
    texture_tier: u8,
    effects_tier: u8,
    aa_tier: u8,
    dynamic_range_tier: u8,
}

impl From<GameSettingsDoc> for GameSettings {
    fn from(d: GameSettingsDoc) -> Self {
        GameSettings {
            game_id: d.game_id,
            render_scale: d.render_scale,
            texture_tier: d.texture_tier,
            effects_tier: d.effects_tier,
            aa_tier: d.aa_tier,
            dynamic_range_tier: d.dynamic_range_tier,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceDoc {
    device_id: String,
    #[serde(default)]
    battery_capacity: Option<u32>,
    #[serde(default)]
    display_ppi: Option<f64>,
    #[serde(default)]
    game: Option<GameSettingsDoc>,
    model: DeviceModel,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDoc {
    schema_version: u64,
    #[serde(default)]
    description: Option<String>,
    sessions_per_device: usize,
    session_duration_s: f64,
    game: GameSettingsDoc,
    devices: Vec<DeviceDoc>,
}

/// A synthetic corpus: devices plus how many sessions of what length to generate.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub sessions_per_device: usize,
    pub session_duration_s: f64,
    pub devices: Vec<SynthDevice>,
}

/// The shipped nine-device demo manifest.
pub const DEMO_MANIFEST: &str = include_str!("../data/demo_manifest.json");

impl CorpusManifest {
    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let doc: ManifestDoc = serde_json::from_str(text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(ManifestError::Invalid(format!(
                "unsupported schema_version {}",
                doc.schema_version
            )));
        }
        let _ = doc.description;
        if doc.sessions_per_device == 0 {
            return Err(ManifestError::Invalid(
                "sessions_per_device must be positive".into(),
            ));
        }
        if doc.session_duration_s < MIN_DURATION_S {
            return Err(ManifestError::Invalid(format!(
                "session_duration_s must be at least {MIN_DURATION_S}"
            )));
        }
        let mut devices: Vec<SynthDevice> = Vec::with_capacity(doc.devices.len());
        for d in doc.devices {
            if devices.iter().any(|x| x.device.device_id == d.device_id) {
                return Err(ManifestError::Invalid(format!(
                    "duplicate device `{}`",
                    d.device_id
                )));
            }
            d.model
                .validate()
                .map_err(|e| ManifestError::Invalid(format!("{}: {e}", d.device_id)))?;
            devices.push(SynthDevice {
                device: DeviceMeta {
                    device_id: d.device_id,
                    battery_capacity: d.battery_capacity,
                    display_ppi: d.display_ppi,
                    display_resolution: None,
                },
                settings: d.game.unwrap_or_else(|| doc.game.clone()).into(),
                model: d.model,
            });
        }
        if devices.is_empty() {
            return Err(ManifestError::Invalid("no devices".into()));
        }
        Ok(CorpusManifest {
            sessions_per_device: doc.sessions_per_device,
            session_duration_s: doc.session_duration_s,
            devices,
        })
    }

    pub fn demo() -> Self {
        Self::parse(DEMO_MANIFEST).expect("shipped demo manifest is valid")
    }

    /// Replaces every device seed with `seed ^ device_seed`.
    pub fn reseeded(mut self, seed: u64) -> Self {
        for d in &mut self.devices {
            d.model.seed ^= seed;
        }
        self
    }

    /// All sessions of the corpus, grouped per device in manifest order.
    pub fn generate(&self) -> Result<Vec<(String, Vec<SessionTelemetry>)>, ModelError> {
        self.devices
            .iter()
            .map(|d| {
                generate_sessions(d, self.sessions_per_device, self.session_duration_s)
                    .map(|s| (d.device.device_id.clone(), s))
            })
            .collect()
    }
}
