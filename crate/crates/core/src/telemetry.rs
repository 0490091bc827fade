//! Session telemetry data model and the session-file parser.
//!
//! A session file is one JSON document:
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "device": { "device_id", "battery_capacity"?, "display_ppi"?, "display_resolution"? },
//!   "game":   { "game_id", "render_scale", "texture_tier", "effects_tier", "aa_tier", "dynamic_range_tier" },
//!   "events": { "launch"?, "frames", "battery"?, "temperature"?, "touch"?, "scene_loads"? }
//! }
//! ```
//!
//! Timestamps are integer milliseconds relative to session start. Unknown keys
//! are ignored and reported as warnings.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

pub const SCHEMA_VERSION: u64 = 1;

/// Allowed upward step between consecutive battery samples, in percentage points.
pub const BATTERY_NOISE_PP: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TelemetryError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("validation error ({rule}): {detail}")]
    Validation { rule: &'static str, detail: String },
}

impl TelemetryError {
    fn schema(path: &str, message: impl Into<String>) -> Self {
        TelemetryError::Schema {
            path: path.to_string(),
            message: message.into(),
        }
    }

    fn invalid(rule: &'static str, detail: impl Into<String>) -> Self {
        TelemetryError::Validation {
            rule,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Resolution {
    pub width_px: u32,
    pub height_px: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceMeta {
    pub device_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub battery_capacity: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub display_ppi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub display_resolution: Option<Resolution>,
}

impl DeviceMeta {
    pub fn new(device_id: impl Into<String>) -> Self {
        DeviceMeta {
            device_id: device_id.into(),
            battery_capacity: None,
            display_ppi: None,
            display_resolution: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameSettings {
    pub game_id: String,
    pub render_scale: f64,
    pub texture_tier: u8,
    pub effects_tier: u8,
    pub aa_tier: u8,
    pub dynamic_range_tier: u8,
}

impl GameSettings {
    pub const MAX_TIER: u8 = 3;

    pub fn tiers(&self) -> [u8; 4] {
        [
            self.texture_tier,
            self.effects_tier,
            self.aa_tier,
            self.dynamic_range_tier,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Launch {
    pub t_start: i64,
    pub t_first_frame: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatterySample {
    pub t: i64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperatureSample {
    pub t: i64,
    pub value: f64,
    pub sensor: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TouchEvent {
    pub t: i64,
    pub latency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SceneLoad {
    pub t_start: i64,
    pub t_end: i64,
}

/// One recorded gameplay session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTelemetry {
    pub schema_version: u64,
    pub device: DeviceMeta,
    pub settings: GameSettings,
    pub launch: Option<Launch>,
    pub frames: Vec<i64>,
    pub battery: Vec<BatterySample>,
    pub temperature: Vec<TemperatureSample>,
    pub touch: Vec<TouchEvent>,
    pub scene_loads: Vec<SceneLoad>,
}

impl SessionTelemetry {
    /// Last frame minus first frame, in milliseconds.
    pub fn duration_ms(&self) -> i64 {
        match (self.frames.first(), self.frames.last()) {
            (Some(first), Some(last)) => last - first,
            _ => 0,
        }
    }

    /// Checks every type invariant. `parse_session` only returns sessions that pass.
    pub fn validate(&self) -> Result<(), TelemetryError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(TelemetryError::invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        validate_device(&self.device)?;
        validate_settings(&self.settings)?;

        if self.frames.len() < 2 {
            return Err(TelemetryError::invalid(
                "frame count",
                format!("at least 2 frames required, found {}", self.frames.len()),
            ));
        }
        check_non_decreasing("frames", self.frames.iter().copied())?;
        if self.duration_ms() <= 0 {
            return Err(TelemetryError::invalid(
                "session duration",
                "last frame must be later than first frame",
            ));
        }

        check_non_decreasing("battery", self.battery.iter().map(|b| b.t))?;
        for b in &self.battery {
            if !(0.0..=100.0).contains(&b.level) {
                return Err(TelemetryError::invalid(
                    "battery range",
                    format!("level {} outside [0,100] at t={}ms", b.level, b.t),
                ));
            }
        }
        for pair in self.battery.windows(2) {
            let rise = pair[1].level - pair[0].level;
            if rise > BATTERY_NOISE_PP {
                return Err(TelemetryError::invalid(
                    "battery monotonicity",
                    format!(
                        "battery increased by >{BATTERY_NOISE_PP}pp at t={}ms ({} -> {})",
                        pair[1].t, pair[0].level, pair[1].level
                    ),
                ));
            }
        }

        check_non_decreasing("temperature", self.temperature.iter().map(|s| s.t))?;
        check_non_decreasing("touch", self.touch.iter().map(|e| e.t))?;
        for e in &self.touch {
            if !(e.latency.is_finite() && e.latency >= 0.0) {
                return Err(TelemetryError::invalid(
                    "touch latency",
                    format!(
                        "latency {} at t={}ms must be a finite non-negative value",
                        e.latency, e.t
                    ),
                ));
            }
        }
        check_non_decreasing("scene_loads", self.scene_loads.iter().map(|l| l.t_start))?;
        for (i, load) in self.scene_loads.iter().enumerate() {
            if load.t_end < load.t_start {
                return Err(TelemetryError::invalid(
                    "scene load order",
                    format!(
                        "scene_loads[{i}] ends ({}ms) before it starts ({}ms)",
                        load.t_end, load.t_start
                    ),
                ));
            }
        }
        if let Some(launch) = self.launch {
            if launch.t_first_frame < launch.t_start {
                return Err(TelemetryError::invalid(
                    "launch order",
                    format!(
                        "first frame ({}ms) precedes launch start ({}ms)",
                        launch.t_first_frame, launch.t_start
                    ),
                ));
            }
        }
        Ok(())
    }
}

fn validate_device(device: &DeviceMeta) -> Result<(), TelemetryError> {
    if device.device_id.is_empty() {
        return Err(TelemetryError::invalid(
            "device_id",
            "device_id must be non-empty",
        ));
    }
    if device.battery_capacity == Some(0) {
        return Err(TelemetryError::invalid(
            "device metadata",
            "battery_capacity must be positive",
        ));
    }
    if let Some(ppi) = device.display_ppi {
        if !(ppi.is_finite() && ppi > 0.0) {
            return Err(TelemetryError::invalid(
                "device metadata",
                "display_ppi must be positive",
            ));
        }
    }
    if let Some(res) = device.display_resolution {
        if res.width_px == 0 || res.height_px == 0 {
            return Err(TelemetryError::invalid(
                "device metadata",
                "display_resolution dimensions must be positive",
            ));
        }
    }
    Ok(())
}

fn validate_settings(settings: &GameSettings) -> Result<(), TelemetryError> {
    if !(settings.render_scale > 0.0 && settings.render_scale <= 1.0) {
        return Err(TelemetryError::invalid(
            "render_scale",
            format!("render_scale {} outside (0,1]", settings.render_scale),
        ));
    }
    let names = [
        "texture_tier",
        "effects_tier",
        "aa_tier",
        "dynamic_range_tier",
    ];
    for (name, tier) in names.iter().zip(settings.tiers()) {
        if tier > GameSettings::MAX_TIER {
            return Err(TelemetryError::invalid(
                "settings tier",
                format!("{name} {tier} outside 0..=3"),
            ));
        }
    }
    Ok(())
}

fn check_non_decreasing(
    stream: &'static str,
    times: impl Iterator<Item = i64>,
) -> Result<(), TelemetryError> {
    let mut prev: Option<i64> = None;
    for (i, t) in times.enumerate() {
        if let Some(p) = prev {
            if t < p {
                return Err(TelemetryError::invalid(
                    "timestamp order",
                    format!("{stream}[{i}] at t={t}ms precedes previous sample at t={p}ms"),
                ));
            }
        }
        prev = Some(t);
    }
    Ok(())
}

/// A parsed session together with the unknown-key warnings raised while reading it.
#[derive(Debug, Clone)]
pub struct ParsedSession {
    pub session: SessionTelemetry,
    pub warnings: Vec<String>,
}

/// Parses and validates a session document. Unknown keys are logged at warn level.
pub fn parse_session(bytes: &[u8]) -> Result<SessionTelemetry, TelemetryError> {
    let parsed = parse_session_with_warnings(bytes)?;
    for w in &parsed.warnings {
        log::warn!("{w}");
    }
    Ok(parsed.session)
}

pub fn parse_session_with_warnings(bytes: &[u8]) -> Result<ParsedSession, TelemetryError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| TelemetryError::Syntax(format!("input is not UTF-8: {e}")))?;
    let root: Value =
        serde_json::from_str(text).map_err(|e| TelemetryError::Syntax(e.to_string()))?;

    let mut reader = Reader::default();
    let session = reader.session(&root)?;
    session.validate()?;
    Ok(ParsedSession {
        session,
        warnings: reader.warnings,
    })
}

#[derive(Default)]
struct Reader {
    warnings: Vec<String>,
}

/// Borrowed view of a JSON object that remembers its path and which keys were read.
struct Obj<'a> {
    path: String,
    map: &'a Map<String, Value>,
}

impl<'a> Obj<'a> {
    fn new(path: &str, value: &'a Value) -> Result<Self, TelemetryError> {
        match value {
            Value::Object(map) => Ok(Obj {
                path: path.to_string(),
                map,
            }),
            other => Err(TelemetryError::schema(
                path,
                format!("expected object, found {}", kind(other)),
            )),
        }
    }

    fn child_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        match self.map.get(key) {
            Some(Value::Null) | None => None,
            Some(v) => Some(v),
        }
    }

    fn required(&self, key: &str) -> Result<&'a Value, TelemetryError> {
        self.get(key)
            .ok_or_else(|| TelemetryError::schema(&self.child_path(key), "missing required field"))
    }

    fn object(&self, key: &str) -> Result<Obj<'a>, TelemetryError> {
        Obj::new(&self.child_path(key), self.required(key)?)
    }

    fn string(&self, key: &str) -> Result<String, TelemetryError> {
        as_string(&self.child_path(key), self.required(key)?)
    }

    fn int(&self, key: &str) -> Result<i64, TelemetryError> {
        as_int(&self.child_path(key), self.required(key)?)
    }

    fn real(&self, key: &str) -> Result<f64, TelemetryError> {
        as_real(&self.child_path(key), self.required(key)?)
    }

    fn opt_real(&self, key: &str) -> Result<Option<f64>, TelemetryError> {
        self.get(key)
            .map(|v| as_real(&self.child_path(key), v))
            .transpose()
    }

    fn opt_uint(&self, key: &str) -> Result<Option<u32>, TelemetryError> {
        self.get(key)
            .map(|v| as_u32(&self.child_path(key), v))
            .transpose()
    }

    fn tier(&self, key: &str) -> Result<u8, TelemetryError> {
        let path = self.child_path(key);
        let v = as_int(&path, self.required(key)?)?;
        u8::try_from(v).map_err(|_| {
            TelemetryError::invalid("settings tier", format!("{path} {v} outside 0..=3"))
        })
    }

    fn array(&self, key: &str) -> Result<&'a [Value], TelemetryError> {
        as_array(&self.child_path(key), self.required(key)?)
    }

    fn opt_array(&self, key: &str) -> Result<&'a [Value], TelemetryError> {
        match self.get(key) {
            None => Ok(&[]),
            Some(v) => as_array(&self.child_path(key), v),
        }
    }

    fn unknown_keys(&self, known: &[&str], warnings: &mut Vec<String>) {
        for key in self.map.keys() {
            if !known.contains(&key.as_str()) {
                warnings.push(format!("ignoring unknown key `{}`", self.child_path(key)));
            }
        }
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn as_string(path: &str, v: &Value) -> Result<String, TelemetryError> {
    v.as_str()
        .map(str::to_owned)
        .ok_or_else(|| TelemetryError::schema(path, format!("expected string, found {}", kind(v))))
}

fn as_int(path: &str, v: &Value) -> Result<i64, TelemetryError> {
    v.as_i64().ok_or_else(|| {
        TelemetryError::schema(path, format!("expected integer, found {}", describe(v)))
    })
}

fn as_u32(path: &str, v: &Value) -> Result<u32, TelemetryError> {
    v.as_u64()
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| {
            TelemetryError::schema(
                path,
                format!("expected non-negative integer, found {}", describe(v)),
            )
        })
}

fn as_real(path: &str, v: &Value) -> Result<f64, TelemetryError> {
    v.as_f64()
        .ok_or_else(|| TelemetryError::schema(path, format!("expected number, found {}", kind(v))))
}

fn as_array<'a>(path: &str, v: &'a Value) -> Result<&'a [Value], TelemetryError> {
    v.as_array()
        .map(Vec::as_slice)
        .ok_or_else(|| TelemetryError::schema(path, format!("expected array, found {}", kind(v))))
}

fn describe(v: &Value) -> String {
    match v {
        Value::Number(n) => format!("number {n}"),
        other => kind(other).to_string(),
    }
}

impl Reader {
    fn session(&mut self, root: &Value) -> Result<SessionTelemetry, TelemetryError> {
        let top = Obj::new("", root)?;
        top.unknown_keys(
            &["schema_version", "device", "game", "events"],
            &mut self.warnings,
        );

        let version_value = top.required("schema_version")?;
        let schema_version = version_value.as_u64().ok_or_else(|| {
            TelemetryError::schema(
                "schema_version",
                format!("expected integer, found {}", describe(version_value)),
            )
        })?;
        if schema_version != SCHEMA_VERSION {
            return Err(TelemetryError::invalid(
                "schema_version",
                format!("unsupported schema_version {schema_version}, expected {SCHEMA_VERSION}"),
            ));
        }

        let device = self.device(&top.object("device")?)?;
        let settings = self.settings(&top.object("game")?)?;

        let events = top.object("events")?;
        events.unknown_keys(
            &[
                "launch",
                "frames",
                "battery",
                "temperature",
                "touch",
                "scene_loads",
            ],
            &mut self.warnings,
        );

        let launch = match events.get("launch") {
            None => None,
            Some(v) => {
                let obj = Obj::new(&events.child_path("launch"), v)?;
                obj.unknown_keys(&["t_start", "t_first_frame"], &mut self.warnings);
                Some(Launch {
                    t_start: obj.int("t_start")?,
                    t_first_frame: obj.int("t_first_frame")?,
                })
            }
        };

        let frames = events
            .array("frames")?
            .iter()
            .enumerate()
            .map(|(i, v)| as_int(&format!("events.frames[{i}]"), v))
            .collect::<Result<Vec<_>, _>>()?;

        let battery = self.records(&events, "battery", &["t", "level"], |o| {
            Ok(BatterySample {
                t: o.int("t")?,
                level: o.real("level")?,
            })
        })?;
        let temperature = self.records(&events, "temperature", &["t", "value", "sensor"], |o| {
            Ok(TemperatureSample {
                t: o.int("t")?,
                value: o.real("value")?,
                sensor: o.string("sensor")?,
            })
        })?;
        let touch = self.records(&events, "touch", &["t", "latency"], |o| {
            Ok(TouchEvent {
                t: o.int("t")?,
                latency: o.real("latency")?,
            })
        })?;
        let scene_loads = self.records(&events, "scene_loads", &["t_start", "t_end"], |o| {
            Ok(SceneLoad {
                t_start: o.int("t_start")?,
                t_end: o.int("t_end")?,
            })
        })?;

        Ok(SessionTelemetry {
            schema_version,
            device,
            settings,
            launch,
            frames,
            battery,
            temperature,
            touch,
            scene_loads,
        })
    }

    fn device(&mut self, obj: &Obj<'_>) -> Result<DeviceMeta, TelemetryError> {
        obj.unknown_keys(
            &[
                "device_id",
                "battery_capacity",
                "display_ppi",
                "display_resolution",
            ],
            &mut self.warnings,
        );
        let display_resolution = match obj.get("display_resolution") {
            None => None,
            Some(v) => {
                let res = Obj::new(&obj.child_path("display_resolution"), v)?;
                res.unknown_keys(&["width_px", "height_px"], &mut self.warnings);
                let width_px = res.opt_uint("width_px")?;
                let height_px = res.opt_uint("height_px")?;
                match (width_px, height_px) {
                    (Some(width_px), Some(height_px)) => Some(Resolution {
                        width_px,
                        height_px,
                    }),
                    (None, _) => {
                        return Err(TelemetryError::schema(
                            &res.child_path("width_px"),
                            "missing required field",
                        ))
                    }
                    (_, None) => {
                        return Err(TelemetryError::schema(
                            &res.child_path("height_px"),
                            "missing required field",
                        ))
                    }
                }
            }
        };
        Ok(DeviceMeta {
            device_id: obj.string("device_id")?,
            battery_capacity: obj.opt_uint("battery_capacity")?,
            display_ppi: obj.opt_real("display_ppi")?,
            display_resolution,
        })
    }

    fn settings(&mut self, obj: &Obj<'_>) -> Result<GameSettings, TelemetryError> {
        obj.unknown_keys(
            &[
                "game_id",
                "render_scale",
                "texture_tier",
                "effects_tier",
                "aa_tier",
                "dynamic_range_tier",
            ],
            &mut self.warnings,
        );
        Ok(GameSettings {
            game_id: obj.string("game_id")?,
            render_scale: obj.real("render_scale")?,
            texture_tier: obj.tier("texture_tier")?,
            effects_tier: obj.tier("effects_tier")?,
            aa_tier: obj.tier("aa_tier")?,
            dynamic_range_tier: obj.tier("dynamic_range_tier")?,
        })
    }

    fn records<T>(
        &mut self,
        events: &Obj<'_>,
        key: &str,
        known: &[&str],
        read: impl Fn(&Obj<'_>) -> Result<T, TelemetryError>,
    ) -> Result<Vec<T>, TelemetryError> {
        let items = events.opt_array(key)?;
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            let obj = Obj::new(&format!("{}[{i}]", events.child_path(key)), item)?;
            obj.unknown_keys(known, &mut self.warnings);
            out.push(read(&obj)?);
        }
        Ok(out)
    }
}

/// Sessions whose game or settings diverge from the most common values in a batch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparabilityReport {
    pub session_count: usize,
    pub flags: Vec<ComparabilityFlag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparabilityFlag {
    /// Position of the session in the input list.
    pub session: usize,
    pub device_id: String,
    /// Every field of this session that differs from the modal value.
    pub fields: Vec<FieldDivergence>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDivergence {
    pub field: &'static str,
    pub found: String,
    pub modal: String,
}

impl ComparabilityReport {
    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }
}

impl std::fmt::Display for ComparabilityFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "session {} ({}):", self.session, self.device_id)?;
        for d in &self.fields {
            write!(
                f,
                " {} is {} but most sessions use {};",
                d.field, d.found, d.modal
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum ComparabilityError {
    #[error("no sessions to compare")]
    EmptyInput,
}

/// Flags sessions whose game_id or settings tiers differ from the modal values.
///
/// Ties for the mode resolve to the value seen first in input order.
pub fn validate_comparability(
    sessions: &[SessionTelemetry],
) -> Result<ComparabilityReport, ComparabilityError> {
    if sessions.is_empty() {
        return Err(ComparabilityError::EmptyInput);
    }
    type Getter = fn(&GameSettings) -> String;
    let fields: [(&'static str, Getter); 5] = [
        ("game_id", |s| s.game_id.clone()),
        ("texture_tier", |s| s.texture_tier.to_string()),
        ("effects_tier", |s| s.effects_tier.to_string()),
        ("aa_tier", |s| s.aa_tier.to_string()),
        ("dynamic_range_tier", |s| s.dynamic_range_tier.to_string()),
    ];

    let modes: Vec<String> = fields
        .iter()
        .map(|(_, get)| modal_value(sessions.iter().map(|s| get(&s.settings))))
        .collect();

    let flags = sessions
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            let diverging: Vec<FieldDivergence> = fields
                .iter()
                .zip(&modes)
                .filter_map(|((field, get), modal)| {
                    let found = get(&s.settings);
                    (found != *modal).then(|| FieldDivergence {
                        field,
                        found,
                        modal: modal.clone(),
                    })
                })
                .collect();
            (!diverging.is_empty()).then(|| ComparabilityFlag {
                session: i,
                device_id: s.device.device_id.clone(),
                fields: diverging,
            })
        })
        .collect();

    Ok(ComparabilityReport {
        session_count: sessions.len(),
        flags,
    })
}

fn modal_value(values: impl Iterator<Item = String>) -> String {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (order, v) in values.enumerate() {
        counts.entry(v).or_insert((0, order)).0 += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(v, _)| v)
        .unwrap_or_default()
}
