//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use gpi_cli::{cmd_demo, run};
use gpi_core::index::{score_device, score_main_index, score_overall, IndexProfile, MainIndexId};
use gpi_core::metrics::{extract_metrics, GfxWeights, MetricId};
use gpi_core::report::{parse_report_json, write_session, ComparisonTable};
use gpi_core::scoring::{validate_curve, CurveSet, MappingCurve};
use gpi_core::stats::{median, percentile_nearest_rank};
use gpi_core::synth::{generate_session, DeviceModel, SynthDevice};
use gpi_core::telemetry::{
    parse_session, BatterySample, DeviceMeta, GameSettings, Launch, SceneLoad, SessionTelemetry,
    TemperatureSample, TouchEvent,
};
use gpi_core::EngineConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("bounds", bounds),
        ("monotonicity", monotonicity),
        ("oracle equivalence", oracle_equivalence),
        ("recoverability", recoverability),
        ("persona discrimination", persona_discrimination),
        ("determinism", determinism),
        ("weight-scaling invariance", weight_scaling),
        ("throughput", throughput),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    }};
}

// ---------------------------------------------------------------- generators

/// Typical magnitude of each metric, so random curves straddle real values.
fn metric_span(m: MetricId) -> (f64, f64) {
    match m {
        MetricId::AvgFps | MetricId::Low1Fps => (0.0, 200.0),
        MetricId::FpsStability | MetricId::GfxPoints => (0.0, 1.0),
        MetricId::DrainPctPerHour => (0.0, 400.0),
        MetricId::PeakTempC => (15.0, 60.0),
        MetricId::TempRiseC => (0.0, 40.0),
        MetricId::LaunchS | MetricId::SceneLoadS => (0.0, 25.0),
        MetricId::TouchLatencyMs => (0.0, 250.0),
    }
}

fn random_curve(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64), increasing: bool) -> MappingCurve {
    let n = rng.random_range(2..=8);
    let mut values: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    while values.len() < 2 {
        values.push(values.last().unwrap() + 1.0);
    }
    let mut scores: Vec<f64> = (0..values.len())
        .map(|_| rng.random_range(0.0..=100.0))
        .collect();
    scores.sort_by(f64::total_cmp);
    if !increasing {
        scores.reverse();
    }
    validate_curve(values.into_iter().zip(scores)).expect("generated curve is valid")
}

fn random_curve_set(rng: &mut ChaCha8Rng) -> CurveSet {
    let curves = MetricId::ALL
        .into_iter()
        .map(|m| {
            let up = rng.random_bool(0.5);
            (m, random_curve(rng, metric_span(m), up))
        })
        .collect();
    CurveSet::new(curves).expect("all metrics present")
}

fn random_weights(
    rng: &mut ChaCha8Rng,
) -> (
    BTreeMap<MainIndexId, f64>,
    BTreeMap<MainIndexId, BTreeMap<MetricId, f64>>,
) {
    let mut main: BTreeMap<_, _> = MainIndexId::ALL
        .into_iter()
        .map(|i| {
            (
                i,
                if rng.random_bool(0.2) {
                    0.0
                } else {
                    rng.random_range(0.0..10.0)
                },
            )
        })
        .collect();
    *main.get_mut(&MainIndexId::VisualSmoothness).unwrap() += 0.5;
    let mut sub: BTreeMap<MainIndexId, BTreeMap<MetricId, f64>> = BTreeMap::new();
    for m in MetricId::ALL {
        sub.entry(m.main_index())
            .or_default()
            .insert(m, rng.random_range(0.01..5.0));
    }
    (main, sub)
}

fn random_profile(rng: &mut ChaCha8Rng) -> IndexProfile {
    let (main, sub) = random_weights(rng);
    IndexProfile::new("random", main, sub).expect("valid weights")
}

fn random_session(rng: &mut ChaCha8Rng) -> SessionTelemetry {
    let frame_count = rng.random_range(2..3_000);
    let base: f64 = rng.random_range(4.0..80.0);
    let mut t = rng.random_range(0..20_000);
    let mut frames = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        frames.push(t);
        // Mostly near the base frame time, with occasional hitches and merged frames.
        let dt = if rng.random_bool(0.02) {
            base * rng.random_range(2.0..10.0)
        } else {
            base * rng.random_range(0.5..1.5)
        };
        t += if rng.random_bool(0.01) {
            0
        } else {
            dt.round() as i64
        };
    }
    if frames.last() == frames.first() {
        *frames.last_mut().unwrap() += 1;
    }

    let mut battery = Vec::new();
    let mut level = rng.random_range(5.0..=100.0);
    let mut bt = 0;
    for _ in 0..rng.random_range(2..20) {
        battery.push(BatterySample { t: bt, level });
        bt += rng.random_range(10_000..120_000);
        level = (level - rng.random_range(-0.5..4.0)).clamp(0.0, 100.0);
    }
    if battery.last().unwrap().t <= 60_000 {
        battery.push(BatterySample {
            t: 61_000,
            level: battery.last().unwrap().level,
        });
    }

    let mut tt = 0;
    let temperature = (0..rng.random_range(1..30))
        .map(|_| {
            tt += rng.random_range(0..20_000);
            let sensor = if rng.random_bool(0.5) { "skin" } else { "gpu" };
            TemperatureSample {
                t: tt,
                value: rng.random_range(20.0..55.0),
                sensor: sensor.into(),
            }
        })
        .collect();
    let mut ut = 0;
    let touch = (0..rng.random_range(0..40))
        .map(|_| {
            ut += rng.random_range(0..5_000);
            TouchEvent {
                t: ut,
                latency: rng.random_range(0.0..250.0),
            }
        })
        .collect();
    let mut lt = 0;
    let scene_loads = (0..rng.random_range(0..5))
        .map(|_| {
            lt += rng.random_range(0..60_000);
            SceneLoad {
                t_start: lt,
                t_end: lt + rng.random_range(0..15_000),
            }
        })
        .collect();

    let mut device = DeviceMeta::new("random-device");
    device.display_ppi = rng.random_bool(0.7).then(|| rng.random_range(150.0..800.0));
    SessionTelemetry {
        schema_version: 1,
        device,
        settings: GameSettings {
            game_id: "bench".into(),
            render_scale: rng.random_range(0.01..=1.0),
            texture_tier: rng.random_range(0..=3),
            effects_tier: rng.random_range(0..=3),
            aa_tier: rng.random_range(0..=3),
            dynamic_range_tier: rng.random_range(0..=3),
        },
        launch: rng.random_bool(0.8).then(|| Launch {
            t_start: 0,
            t_first_frame: rng.random_range(0..30_000),
        }),
        frames,
        battery,
        temperature,
        touch,
        scene_loads,
    }
}

// ---------------------------------------------------------------- criteria

fn bounds() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0_0D5);
    let gfx = GfxWeights::default();
    let mut checked = 0usize;
    for i in 0..1_000 {
        let session = random_session(&mut rng);
        session
            .validate()
            .map_err(|e| format!("generator produced an invalid session: {e}"))?;
        let curves = random_curve_set(&mut rng);
        let profile = random_profile(&mut rng);
        let card = score_device(std::slice::from_ref(&session), &profile, &curves, &gfx)
            .map_err(|e| format!("session {i}: {e}"))?;
        let in_range = |x: f64| (0.0..=100.0).contains(&x);
        for s in &card.sessions {
            for sub in &s.sub_scores {
                ensure!(
                    in_range(sub.score),
                    "session {i}: {} scored {}",
                    sub.metric_id,
                    sub.score
                );
                checked += 1;
            }
            for (index, score) in &s.main {
                if let Some(x) = score {
                    ensure!(in_range(*x), "session {i}: {index} scored {x}");
                    checked += 1;
                }
            }
            ensure!(in_range(s.overall), "session {i}: overall {}", s.overall);
        }
        ensure!(
            in_range(card.overall),
            "session {i}: aggregate {}",
            card.overall
        );
        checked += 2;
    }
    Ok(format!(
        "{checked} scores from 1000 random sessions in [0,100], 0 violations"
    ))
}

fn monotonicity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1CE);
    let mut breakpoints = 0;
    for c in 0..200 {
        let curve = random_curve(&mut rng, (-50.0, 150.0), true);
        for bp in curve.breakpoints() {
            ensure!(
                curve.eval(bp.value) == bp.score,
                "curve {c}: eval({}) != {}",
                bp.value,
                bp.score
            );
            breakpoints += 1;
        }
        for _ in 0..1_000 {
            let a = rng.random_range(-100.0..200.0);
            let b = rng.random_range(-100.0..200.0);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            ensure!(
                curve.eval(lo) <= curve.eval(hi),
                "curve {c}: eval({lo}) = {} > eval({hi}) = {}",
                curve.eval(lo),
                curve.eval(hi)
            );
        }
    }
    Ok(format!(
        "200 curves x 1000 pairs without inversion; {breakpoints} breakpoints exact"
    ))
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn oracle_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0_4AC1E);
    let mut lists = 0;
    for n in 1..=200usize {
        for _ in 0..10 {
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-500.0..500.0)).collect();
            let s = sorted(&values);
            let rank = n.div_ceil(100);
            let pct_oracle = s[rank - 1];
            let med_oracle = if n % 2 == 1 {
                s[n / 2]
            } else {
                (s[n / 2 - 1] + s[n / 2]) / 2.0
            };
            ensure!(
                percentile_nearest_rank(&values, 1.0) == Some(pct_oracle),
                "1st percentile differs at n = {n}"
            );
            ensure!(
                median(&values) == Some(med_oracle),
                "median differs at n = {n}"
            );
            lists += 1;
        }
    }

    let mut worst: f64 = 0.0;
    let mut means = 0;
    for _ in 0..2_000 {
        let (main_raw, sub_raw) = random_weights(&mut rng);
        let profile = IndexProfile::new("p", main_raw.clone(), sub_raw.clone()).unwrap();
        let mut main_scores = BTreeMap::new();
        for index in MainIndexId::ALL {
            let scores: Vec<(MetricId, Option<f64>)> = index
                .metrics()
                .map(|m| {
                    (
                        m,
                        rng.random_bool(0.85).then(|| rng.random_range(0.0..=100.0)),
                    )
                })
                .collect();
            let raw = &sub_raw[&index];
            let num: f64 = scores
                .iter()
                .filter_map(|(m, s)| s.map(|s| raw[m] * s))
                .sum();
            let den: f64 = scores.iter().filter_map(|(m, s)| s.map(|_| raw[m])).sum();
            let got = score_main_index(index, &scores, profile.sub_weights(index))
                .unwrap()
                .score;
            match got {
                Some(x) => {
                    worst = worst.max((x - num / den).abs());
                    means += 1;
                }
                None => ensure!(den == 0.0, "{index} absent although measured"),
            }
            main_scores.insert(index, got);
        }
        let present: Vec<_> = main_scores
            .iter()
            .filter_map(|(i, s)| s.map(|s| (main_raw[i], s)))
            .collect();
        let den: f64 = present.iter().map(|(w, _)| w).sum();
        if den > 0.0 {
            let oracle = present.iter().map(|(w, s)| w * s).sum::<f64>() / den;
            let (overall, _) = score_overall(&main_scores, &profile).unwrap();
            worst = worst.max((overall - oracle).abs());
            means += 1;
        }
    }
    ensure!(worst <= 1e-9, "weighted mean off by {worst:e}");
    Ok(format!(
        "percentile and median equal sort oracles on {lists} lists (n = 1..200); {means} weighted means within {worst:.1e} of dot products"
    ))
}

fn recoverability() -> Result<String, String> {
    let mut device = DeviceMeta::new("ground-truth");
    device.display_ppi = Some(460.0);
    let synth = SynthDevice {
        device,
        settings: GameSettings {
            game_id: "bench".into(),
            render_scale: 1.0,
            texture_tier: 3,
            effects_tier: 3,
            aa_tier: 3,
            dynamic_range_tier: 3,
        },
        model: DeviceModel {
            base_frame_time_ms: 1000.0 / 60.0,
            frame_jitter_sd_ms: 0.0,
            throttle_onset_s: None,
            throttle_factor: 1.0,
            drain_rate_pct_per_hour: 20.0,
            temp_start_c: 30.0,
            temp_peak_c: 40.0,
            touch_latency_ms: 55.0,
            launch_time_s: 8.2,
            seed: 42,
        },
    };
    let session = generate_session(&synth, 600.0).map_err(|e| e.to_string())?;
    let m = extract_metrics(&session).map_err(|e| e.to_string())?;
    let launch = m.launch_time.ok_or("launch time absent")?;
    let touch = m.median_touch_latency.ok_or("touch latency absent")?;
    ensure!((m.avg_fps - 60.0).abs() <= 0.1, "avg_fps {}", m.avg_fps);
    ensure!((m.drain_rate - 20.0).abs() <= 0.1, "drain {}", m.drain_rate);
    ensure!((launch - 8.2).abs() <= 0.01, "launch {launch}");
    ensure!((touch - 55.0).abs() <= 0.5, "touch {touch}");
    Ok(format!(
        "avg_fps {:.4}, drain {:.4} %/h, launch {launch:.3} s, touch {touch:.2} ms",
        m.avg_fps, m.drain_rate
    ))
}

fn rank_of(table: &ComparisonTable, id: &str) -> Result<u32, String> {
    table
        .rows
        .iter()
        .find(|r| r.device_id == id)
        .map(|r| r.rank)
        .ok_or_else(|| format!("device {id} missing from {} report", table.profile_name))
}

fn display_of(table: &ComparisonTable, id: &str) -> i64 {
    table
        .rows
        .iter()
        .find(|r| r.device_id == id)
        .unwrap()
        .overall_display
}

fn persona_discrimination() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let summary = cmd_demo(dir.path(), 0, None, None).map_err(|e| e.to_string())?;
    let read = |name: &str| -> Result<ComparisonTable, String> {
        let bytes = fs::read(dir.path().join(name)).map_err(|e| e.to_string())?;
        parse_report_json(&bytes).map_err(|e| e.to_string())
    };
    let competitive = read("report_competitive.json")?;
    let casual = read("report_casual.json")?;
    let elapsed = start.elapsed();

    let (a, b, c) = (
        rank_of(&competitive, "A")?,
        rank_of(&competitive, "B")?,
        rank_of(&competitive, "C")?,
    );
    ensure!(a < c && b < c, "competitive ranks A={a} B={b} C={c}");
    let casual_c = rank_of(&casual, "C")?;
    ensure!(casual_c == 1, "casual rank of C is {casual_c}");
    let (da, db) = (display_of(&competitive, "A"), display_of(&competitive, "B"));
    ensure!(
        da == db && a == b,
        "A/B tie not rendered: displays {da}/{db}, ranks {a}/{b}"
    );
    ensure!(
        summary.session_files == 27,
        "{} session files",
        summary.session_files
    );
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "competitive A={a} B={b} (both {da}) C={c}; casual C=1 ({}); {:.2} s end to end",
        display_of(&casual, "C"),
        elapsed.as_secs_f64()
    ))
}

/// Every file below `root` with its bytes, keyed by relative path.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

fn device_dirs(demo: &Path) -> Vec<String> {
    let mut dirs: Vec<String> = fs::read_dir(demo.join("sessions"))
        .unwrap()
        .map(|e| e.unwrap().path().to_string_lossy().into_owned())
        .collect();
    dirs.sort();
    dirs
}

fn gpi(args: &[&str]) -> Result<Vec<u8>, String> {
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let code = run(
        std::iter::once("gpi").chain(args.iter().copied()),
        &mut stdout,
        &mut stderr,
    );
    ensure!(
        code == 0,
        "gpi {} exited {code}: {}",
        args.join(" "),
        String::from_utf8_lossy(&stderr)
    );
    Ok(stdout)
}

fn determinism() -> Result<String, String> {
    let first = tempfile::tempdir().map_err(|e| e.to_string())?;
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    cmd_demo(first.path(), 0, None, None).map_err(|e| e.to_string())?;
    cmd_demo(second.path(), 0, None, None).map_err(|e| e.to_string())?;
    let (a, b) = (tree(first.path()), tree(second.path()));
    ensure!(a.len() == 30, "demo wrote {} files", a.len());
    ensure!(a == b, "demo trees differ");

    let dirs = device_dirs(first.path());
    let mut outputs = 0;
    for args in [
        vec!["score", "--profile", "competitive"],
        vec!["score", "--profile", "casual", "--format", "csv"],
        vec!["compare"],
    ] {
        let mut full = args.clone();
        full.extend(dirs.iter().map(String::as_str));
        let x = gpi(&full)?;
        let y = gpi(&full)?;
        ensure!(x == y, "`{}` output differs between runs", args.join(" "));
        outputs += 1;
    }
    Ok(format!(
        "two demo runs wrote identical trees ({} files, {} bytes); {outputs} score invocations repeat byte for byte",
        a.len(),
        a.values().map(Vec::len).sum::<usize>()
    ))
}

/// The shipped config with every profile's main weights multiplied by `c`.
fn scaled_config(c: f64) -> String {
    let mut doc: serde_json::Value =
        serde_json::from_str(gpi_core::config::DEFAULT_CONFIG).unwrap();
    for profile in doc["profiles"].as_object_mut().unwrap().values_mut() {
        for w in profile["main_weights"]
            .as_object_mut()
            .unwrap()
            .values_mut()
        {
            *w = serde_json::json!(w.as_f64().unwrap() * c);
        }
    }
    serde_json::to_string_pretty(&doc).unwrap()
}

fn weight_scaling() -> Result<String, String> {
    let demo = tempfile::tempdir().map_err(|e| e.to_string())?;
    cmd_demo(demo.path(), 0, None, None).map_err(|e| e.to_string())?;
    let dirs = device_dirs(demo.path());
    let configs = tempfile::tempdir().map_err(|e| e.to_string())?;

    let invocations: [&[&str]; 4] = [
        &["score", "--profile", "competitive"],
        &["score", "--profile", "casual"],
        &["compare", "--format", "json"],
        &["compare", "--format", "csv"],
    ];
    let emit = |config: &Path| -> Result<Vec<Vec<u8>>, String> {
        invocations
            .iter()
            .map(|args| {
                let mut full: Vec<&str> = args.to_vec();
                full.extend(["--config", config.to_str().unwrap()]);
                full.extend(dirs.iter().map(String::as_str));
                gpi(&full)
            })
            .collect()
    };
    let base_path = configs.path().join("base.json");
    fs::write(&base_path, scaled_config(1.0)).map_err(|e| e.to_string())?;
    let base = emit(&base_path)?;
    for c in [0.1, 3.0, 1000.0] {
        let path = configs.path().join(format!("scaled_{c}.json"));
        fs::write(&path, scaled_config(c)).map_err(|e| e.to_string())?;
        EngineConfig::load(&path).map_err(|e| e.to_string())?;
        ensure!(
            emit(&path)? == base,
            "reports differ with main weights x{c}"
        );
    }
    Ok(format!(
        "{} reports byte-identical under main weights x0.1, x3, x1000",
        invocations.len()
    ))
}

fn throughput() -> Result<String, String> {
    let config = EngineConfig::default_config();
    let profile = config.profile("competitive").map_err(|e| e.to_string())?;
    let mut device = DeviceMeta::new("throughput");
    device.display_ppi = Some(450.0);
    let synth = SynthDevice {
        device,
        settings: GameSettings {
            game_id: "bench".into(),
            render_scale: 1.0,
            texture_tier: 2,
            effects_tier: 2,
            aa_tier: 2,
            dynamic_range_tier: 2,
        },
        model: DeviceModel {
            base_frame_time_ms: 1000.0 / 60.0,
            frame_jitter_sd_ms: 1.5,
            throttle_onset_s: None,
            throttle_factor: 1.0,
            drain_rate_pct_per_hour: 20.0,
            temp_start_c: 30.0,
            temp_peak_c: 42.0,
            touch_latency_ms: 50.0,
            launch_time_s: 6.0,
            seed: 7,
        },
    };
    let sessions =
        gpi_core::synth::generate_sessions(&synth, 100, 600.0).map_err(|e| e.to_string())?;
    let frames: usize = sessions.iter().map(|s| s.frames.len()).sum();
    let files: Vec<String> = sessions.iter().map(write_session).collect();

    let start = Instant::now();
    let parsed = files
        .iter()
        .map(|f| parse_session(f.as_bytes()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let parse_time = start.elapsed();
    let card =
        score_device(&parsed, profile, &config.curves, &config.gfx).map_err(|e| e.to_string())?;
    let total = start.elapsed();
    let scoring = total - parse_time;

    ensure!(
        card.sessions.len() == 100,
        "{} sessions scored",
        card.sessions.len()
    );
    ensure!(
        total < Duration::from_secs(2),
        "parse + score took {total:?}"
    );
    Ok(format!(
        "100 ten-minute sessions ({frames} frames): parse {:.3} s + score {:.3} s = {:.3} s",
        parse_time.as_secs_f64(),
        scoring.as_secs_f64(),
        total.as_secs_f64()
    ))
}
