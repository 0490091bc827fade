//! Device ranking and canonical report serialization.
//!
//! Report json layout (schema_version 1), keys always in this order:
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "profile": "<name>",
//!   "devices": [
//!     {
//!       "rank": 1,
//!       "device_id": "<id>",
//!       "overall": 86.2000,
//!       "overall_display": 86,
//!       "main": { "visual_smoothness": 95, ..., "responsiveness": null },
//!       "flags": ["..."]
//!     }
//!   ]
//! }
//! ```
//!
//! Reals are written with exactly four decimals, lines end in `\n`, and the
//! document ends with a newline. The csv layout is
//! `device_id,profile,rank,overall,vs,gq,ba,te,sw,re,flags` with flags joined by `; `.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::index::{MainIndexId, ScoreCard};
use crate::stats::descending;
use crate::telemetry::{
    BatterySample, DeviceMeta, GameSettings, Launch, SceneLoad, SessionTelemetry,
    TemperatureSample, TouchEvent,
};

pub const REPORT_SCHEMA_VERSION: u64 = 1;
pub const CSV_HEADER: [&str; 11] = [
    "device_id",
    "profile",
    "rank",
    "overall",
    "vs",
    "gq",
    "ba",
    "te",
    "sw",
    "re",
    "flags",
];
pub const PLOT_HEADER: [&str; 3] = ["device_id", "profile", "overall_display"];
const FLAG_SEPARATOR: &str = "; ";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no score cards to rank")]
    EmptyInput,
    #[error("score cards use different profiles: `{0}` and `{1}`")]
    MixedProfiles(String, String),
    #[error("malformed report: {0}")]
    Malformed(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!(
                "unknown report format `{other}` (expected json or csv)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub rank: u32,
    pub device_id: String,
    pub overall_exact: f64,
    pub overall_display: i64,
    pub main_display: BTreeMap<MainIndexId, Option<i64>>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub profile_name: String,
    pub rows: Vec<TableRow>,
}

/// Integer display score; halves round away from zero.
pub fn display_score(exact: f64) -> i64 {
    exact.round() as i64
}

/// Ranks cards by exact overall score, descending, with device_id ascending as the
/// tie order. Equal exact scores share a rank and the next rank skips (1, 1, 3).
pub fn rank_devices(cards: &[ScoreCard]) -> Result<ComparisonTable, ReportError> {
    let first = cards.first().ok_or(ReportError::EmptyInput)?;
    if let Some(other) = cards.iter().find(|c| c.profile_name != first.profile_name) {
        return Err(ReportError::MixedProfiles(
            first.profile_name.clone(),
            other.profile_name.clone(),
        ));
    }

    let mut order: Vec<&ScoreCard> = cards.iter().collect();
    order.sort_by(|a, b| {
        descending(a.overall, b.overall).then_with(|| a.device_id.cmp(&b.device_id))
    });

    let mut rows: Vec<TableRow> = Vec::with_capacity(order.len());
    for (position, card) in order.iter().enumerate() {
        let rank = match rows.last() {
            Some(prev) if prev.overall_exact.total_cmp(&card.overall) == Ordering::Equal => {
                prev.rank
            }
            _ => position as u32 + 1,
        };
        rows.push(TableRow {
            rank,
            device_id: card.device_id.clone(),
            overall_exact: card.overall,
            overall_display: display_score(card.overall),
            main_display: MainIndexId::ALL
                .into_iter()
                .map(|i| (i, card.main.get(&i).copied().flatten().map(display_score)))
                .collect(),
            flags: card.flags.clone(),
        });
    }
    Ok(ComparisonTable {
        profile_name: first.profile_name.clone(),
        rows,
    })
}

/// Canonical four-decimal rendering of a real.
pub fn format_real(x: f64) -> String {
    // Adding 0.0 folds -0.0 into 0.0.
    format!("{:.4}", x + 0.0)
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

fn write_table_json(out: &mut String, table: &ComparisonTable, indent: &str) {
    let i1 = format!("{indent}  ");
    let i2 = format!("{indent}    ");
    let i3 = format!("{indent}      ");
    let i4 = format!("{indent}        ");
    let _ = writeln!(out, "{indent}{{");
    let _ = writeln!(out, "{i1}\"schema_version\": {REPORT_SCHEMA_VERSION},");
    let _ = writeln!(
        out,
        "{i1}\"profile\": {},",
        json_string(&table.profile_name)
    );
    if table.rows.is_empty() {
        let _ = writeln!(out, "{i1}\"devices\": []");
    } else {
        let _ = writeln!(out, "{i1}\"devices\": [");
        for (r, row) in table.rows.iter().enumerate() {
            let _ = writeln!(out, "{i2}{{");
            let _ = writeln!(out, "{i3}\"rank\": {},", row.rank);
            let _ = writeln!(out, "{i3}\"device_id\": {},", json_string(&row.device_id));
            let _ = writeln!(out, "{i3}\"overall\": {},", format_real(row.overall_exact));
            let _ = writeln!(out, "{i3}\"overall_display\": {},", row.overall_display);
            let _ = writeln!(out, "{i3}\"main\": {{");
            for (k, index) in MainIndexId::ALL.into_iter().enumerate() {
                let value = match row.main_display.get(&index).copied().flatten() {
                    Some(v) => v.to_string(),
                    None => "null".to_string(),
                };
                let comma = if k + 1 < MainIndexId::ALL.len() {
                    ","
                } else {
                    ""
                };
                let _ = writeln!(out, "{i4}\"{index}\": {value}{comma}");
            }
            let _ = writeln!(out, "{i3}}},");
            let flags: Vec<String> = row.flags.iter().map(|f| json_string(f)).collect();
            let _ = writeln!(out, "{i3}\"flags\": [{}]", flags.join(", "));
            let comma = if r + 1 < table.rows.len() { "," } else { "" };
            let _ = writeln!(out, "{i2}}}{comma}");
        }
        let _ = writeln!(out, "{i1}]");
    }
    let _ = write!(out, "{indent}}}");
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn write_table_csv(
    w: &mut csv::Writer<Vec<u8>>,
    table: &ComparisonTable,
) -> Result<(), csv::Error> {
    for row in &table.rows {
        let mut record = vec![
            row.device_id.clone(),
            table.profile_name.clone(),
            row.rank.to_string(),
            format_real(row.overall_exact),
        ];
        for index in MainIndexId::ALL {
            record.push(
                row.main_display
                    .get(&index)
                    .copied()
                    .flatten()
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            );
        }
        record.push(row.flags.join(FLAG_SEPARATOR));
        w.write_record(&record)?;
    }
    Ok(())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, ReportError> {
    w.into_inner()
        .map_err(|e| ReportError::Malformed(format!("csv flush failed: {e}")))
}

/// Serializes one table canonically.
pub fn emit_report(table: &ComparisonTable, format: ReportFormat) -> Result<Vec<u8>, ReportError> {
    match format {
        ReportFormat::Json => {
            let mut out = String::new();
            write_table_json(&mut out, table, "");
            out.push('\n');
            Ok(out.into_bytes())
        }
        ReportFormat::Csv => {
            let mut w = csv_writer();
            w.write_record(CSV_HEADER)?;
            write_table_csv(&mut w, table)?;
            finish_csv(w)
        }
    }
}

/// Serializes several tables into one document: a json array of reports, or a
/// single csv with one header.
pub fn emit_reports(
    tables: &[ComparisonTable],
    format: ReportFormat,
) -> Result<Vec<u8>, ReportError> {
    match format {
        ReportFormat::Json => {
            let mut out = String::from("[\n");
            for (i, table) in tables.iter().enumerate() {
                write_table_json(&mut out, table, "  ");
                out.push_str(if i + 1 < tables.len() { ",\n" } else { "\n" });
            }
            out.push_str("]\n");
            Ok(out.into_bytes())
        }
        ReportFormat::Csv => {
            let mut w = csv_writer();
            w.write_record(CSV_HEADER)?;
            for table in tables {
                write_table_csv(&mut w, table)?;
            }
            finish_csv(w)
        }
    }
}

/// Grouped-bar data: one row per (device, profile), devices ascending by id and
/// profiles in the order given.
pub fn emit_plot_data(tables: &[ComparisonTable]) -> Result<Vec<u8>, ReportError> {
    if tables.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut by_device: BTreeMap<&str, Vec<(&str, i64)>> = BTreeMap::new();
    for table in tables {
        for row in &table.rows {
            by_device
                .entry(row.device_id.as_str())
                .or_default()
                .push((table.profile_name.as_str(), row.overall_display));
        }
    }
    let mut w = csv_writer();
    w.write_record(PLOT_HEADER)?;
    for (device, series) in by_device {
        for (profile, display) in series {
            w.write_record([device, profile, &display.to_string()])?;
        }
    }
    finish_csv(w)
}

/// Reads a single-table json report back into a table.
pub fn parse_report_json(bytes: &[u8]) -> Result<ComparisonTable, ReportError> {
    let root: Value =
        serde_json::from_slice(bytes).map_err(|e| ReportError::Malformed(e.to_string()))?;
    table_from_value(&root)
}

fn malformed(what: &str) -> ReportError {
    ReportError::Malformed(what.to_string())
}

fn table_from_value(root: &Value) -> Result<ComparisonTable, ReportError> {
    if root.get("schema_version").and_then(Value::as_u64) != Some(REPORT_SCHEMA_VERSION) {
        return Err(malformed("schema_version must be 1"));
    }
    let profile_name = root
        .get("profile")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("missing profile"))?
        .to_string();
    let devices = root
        .get("devices")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing devices"))?;
    let rows = devices
        .iter()
        .map(|d| {
            let int = |key: &str| {
                d.get(key)
                    .and_then(Value::as_i64)
                    .ok_or_else(|| malformed(key))
            };
            let main_obj = d
                .get("main")
                .and_then(Value::as_object)
                .ok_or_else(|| malformed("main"))?;
            let main_display = MainIndexId::ALL
                .into_iter()
                .map(|i| (i, main_obj.get(i.as_str()).and_then(Value::as_i64)))
                .collect();
            let flags = d
                .get("flags")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed("flags"))?
                .iter()
                .map(|f| {
                    f.as_str()
                        .map(str::to_owned)
                        .ok_or_else(|| malformed("flag"))
                })
                .collect::<Result<_, _>>()?;
            Ok(TableRow {
                rank: u32::try_from(int("rank")?).map_err(|_| malformed("rank"))?,
                device_id: d
                    .get("device_id")
                    .and_then(Value::as_str)
                    .ok_or_else(|| malformed("device_id"))?
                    .to_string(),
                overall_exact: d
                    .get("overall")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| malformed("overall"))?,
                overall_display: int("overall_display")?,
                main_display,
                flags,
            })
        })
        .collect::<Result<Vec<_>, ReportError>>()?;
    Ok(ComparisonTable { profile_name, rows })
}

#[derive(Serialize)]
struct SessionDoc<'a> {
    schema_version: u64,
    device: &'a DeviceMeta,
    game: &'a GameSettings,
    events: EventsDoc<'a>,
}

#[derive(Serialize)]
struct EventsDoc<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    launch: Option<&'a Launch>,
    frames: &'a [i64],
    battery: &'a [BatterySample],
    temperature: &'a [TemperatureSample],
    touch: &'a [TouchEvent],
    scene_loads: &'a [SceneLoad],
}

/// Writes a session in the session-file schema: compact json plus a trailing newline.
pub fn write_session(session: &SessionTelemetry) -> String {
    let doc = SessionDoc {
        schema_version: session.schema_version,
        device: &session.device,
        game: &session.settings,
        events: EventsDoc {
            launch: session.launch.as_ref(),
            frames: &session.frames,
            battery: &session.battery,
            temperature: &session.temperature,
            touch: &session.touch,
            scene_loads: &session.scene_loads,
        },
    };
    let mut out = serde_json::to_string(&doc).expect("session serialization is infallible");
    out.push('\n');
    out
}
