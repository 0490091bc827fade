//! Command-line front end: `validate`, `score`, `compare` and `demo`.
//!
//! Exit statuses: 0 success, 1 data error, 2 usage or config error.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use gpi_core::config::{ConfigError, EngineConfig};
use gpi_core::index::{score_device, ScoreCard};
use gpi_core::report::{
    self, emit_plot_data, emit_report, emit_reports, rank_devices, ComparisonTable, ReportFormat,
};
use gpi_core::synth::CorpusManifest;
use gpi_core::telemetry::{parse_session_with_warnings, validate_comparability, SessionTelemetry};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "gpi",
    version,
    about = "Game performance index scoring for recorded gameplay sessions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate session files.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Score devices (one directory of session files per device) under one profile.
    Score {
        #[command(flatten)]
        opts: ScoreArgs,
        #[arg(long)]
        profile: String,
    },
    /// Score devices under every profile in the config.
    Compare {
        #[command(flatten)]
        opts: ScoreArgs,
    },
    /// Generate the synthetic demo corpus and score it under every profile.
    Demo {
        #[arg(long)]
        out: PathBuf,
        /// XOR-ed into every device seed of the manifest.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corpus manifest; defaults to the built-in nine-device manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
pub struct ScoreArgs {
    /// Engine config; defaults to the built-in policy.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(required = true)]
    pub device_dirs: Vec<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Data(_) | CliError::Io { .. } => EXIT_DATA,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Validate { files } => return cmd_validate(&files, stdout, stderr),
        Command::Score { opts, profile } => cmd_score(&opts, Some(&profile), stdout, stderr),
        Command::Compare { opts } => cmd_score(&opts, None, stdout, stderr),
        Command::Demo {
            out,
            seed,
            manifest,
            config,
        } => cmd_demo(&out, seed, manifest.as_deref(), config.as_deref()).map(|summary| {
            let _ = writeln!(
                stdout,
                "wrote {} session files, {} reports and plot data to {}",
                summary.session_files,
                summary.reports.len(),
                out.display()
            );
        }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// Validates each file, printing one diagnostic line per problem.
pub fn cmd_validate(paths: &[PathBuf], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    if paths.is_empty() {
        let _ = writeln!(stderr, "usage: gpi validate <FILES>...");
        return EXIT_USAGE;
    }
    let mut invalid = 0;
    for path in paths {
        match read_session(path) {
            Ok((_, warnings)) => {
                for w in warnings {
                    let _ = writeln!(stderr, "{}: warning: {w}", path.display());
                }
            }
            Err(e) => {
                invalid += 1;
                let _ = writeln!(stderr, "{e}");
            }
        }
    }
    if invalid == 0 {
        let _ = writeln!(stdout, "{} valid", paths.len());
        EXIT_OK
    } else {
        let _ = writeln!(stdout, "{invalid} of {} invalid", paths.len());
        EXIT_DATA
    }
}

fn read_session(path: &Path) -> Result<(SessionTelemetry, Vec<String>), CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_session_with_warnings(&bytes)
        .map(|p| (p.session, p.warnings))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Session files of a device directory: every `*.json` file, in file-name order.
pub fn session_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|entry| entry.map(|e| e.path()).map_err(io_err(dir)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no session files",
            dir.display()
        )));
    }
    Ok(files)
}

/// Reads every device directory, reporting comparability issues on `stderr`.
pub fn load_devices(
    dirs: &[PathBuf],
    stderr: &mut dyn Write,
) -> Result<Vec<Vec<SessionTelemetry>>, CliError> {
    let mut devices = Vec::with_capacity(dirs.len());
    let mut seen = BTreeSet::new();
    for dir in dirs {
        let mut sessions = Vec::new();
        for file in session_files(dir)? {
            let (session, warnings) = read_session(&file)?;
            for w in warnings {
                let _ = writeln!(stderr, "{}: warning: {w}", file.display());
            }
            sessions.push(session);
        }
        let id = sessions[0].device.device_id.clone();
        if let Some(other) = sessions.iter().find(|s| s.device.device_id != id) {
            return Err(CliError::Data(format!(
                "{}: sessions from several devices (`{id}` and `{}`)",
                dir.display(),
                other.device.device_id
            )));
        }
        if !seen.insert(id.clone()) {
            return Err(CliError::Data(format!(
                "device `{id}` appears in more than one directory"
            )));
        }
        devices.push(sessions);
    }
    let all: Vec<SessionTelemetry> = devices.iter().flatten().cloned().collect();
    if let Ok(report) = validate_comparability(&all) {
        for flag in &report.flags {
            let _ = writeln!(stderr, "warning: not comparable: {flag}");
        }
    }
    Ok(devices)
}

/// Scores every device under each named profile and ranks them.
pub fn score_tables(
    devices: &[Vec<SessionTelemetry>],
    config: &EngineConfig,
    profiles: &[&str],
) -> Result<Vec<ComparisonTable>, CliError> {
    profiles
        .iter()
        .map(|&name| {
            let profile = config.profile(name)?;
            let cards = devices
                .iter()
                .map(|sessions| {
                    score_device(sessions, profile, &config.curves, &config.gfx).map_err(|e| {
                        let id = sessions
                            .first()
                            .map(|s| s.device.device_id.as_str())
                            .unwrap_or("?");
                        CliError::Data(format!("device `{id}`: {e}"))
                    })
                })
                .collect::<Result<Vec<ScoreCard>, _>>()?;
            rank_devices(&cards).map_err(|e| CliError::Data(e.to_string()))
        })
        .collect()
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig, CliError> {
    Ok(match path {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::default_config(),
    })
}

fn check_output_path(out: &Path, inputs: &[&Path]) -> Result<(), CliError> {
    let resolved = fs::canonicalize(out).ok();
    for input in inputs {
        let same = match (&resolved, fs::canonicalize(input).ok()) {
            (Some(a), Some(b)) => *a == b || a.starts_with(&b),
            _ => false,
        };
        if same {
            return Err(CliError::Usage(format!(
                "output path {} would overwrite input {}",
                out.display(),
                input.display()
            )));
        }
    }
    Ok(())
}

/// `score` when `profile` is given, otherwise `compare` over every profile.
pub fn cmd_score(
    opts: &ScoreArgs,
    profile: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    if opts.device_dirs.is_empty() {
        return Err(CliError::Usage("no device directories given".into()));
    }
    let config = load_config(opts.config.as_deref())?;
    let profiles: Vec<&str> = match profile {
        Some(name) => {
            config.profile(name)?;
            vec![name]
        }
        None => config.profiles.keys().map(String::as_str).collect(),
    };
    if let Some(out) = &opts.out {
        let mut inputs: Vec<&Path> = opts.device_dirs.iter().map(PathBuf::as_path).collect();
        inputs.extend(opts.config.as_deref());
        check_output_path(out, &inputs)?;
    }

    let devices = load_devices(&opts.device_dirs, stderr)?;
    let tables = score_tables(&devices, &config, &profiles)?;
    let bytes = match profile {
        Some(_) => emit_report(&tables[0], opts.format),
        None => emit_reports(&tables, opts.format),
    }
    .map_err(|e| CliError::Data(e.to_string()))?;

    match &opts.out {
        Some(path) => fs::write(path, &bytes).map_err(io_err(path)),
        None => stdout
            .write_all(&bytes)
            .map_err(io_err(Path::new("<stdout>"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSummary {
    pub session_files: usize,
    pub reports: Vec<PathBuf>,
    pub plot: PathBuf,
}

/// Writes the synthetic corpus under `out/sessions/<device>/`, then one json
/// report per profile and `plot.csv`.
pub fn cmd_demo(
    out: &Path,
    seed: u64,
    manifest: Option<&Path>,
    config: Option<&Path>,
) -> Result<DemoSummary, CliError> {
    let manifest = match manifest {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            CorpusManifest::parse(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => CorpusManifest::demo(),
    }
    .reseeded(seed);
    let config = load_config(config)?;

    let corpus = manifest
        .generate()
        .map_err(|e| CliError::Data(e.to_string()))?;
    let sessions_root = out.join("sessions");
    let mut dirs = Vec::with_capacity(corpus.len());
    let mut session_files = 0;
    for (device_id, sessions) in &corpus {
        let dir = sessions_root.join(device_id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (k, session) in sessions.iter().enumerate() {
            let path = dir.join(format!("session_{:02}.json", k + 1));
            fs::write(&path, report::write_session(session)).map_err(io_err(&path))?;
            session_files += 1;
        }
        dirs.push(dir);
    }

    // Score what was written, so the reports match a later `score` run on the files.
    let devices = load_devices(&dirs, &mut std::io::sink())?;
    let profiles: Vec<&str> = config.profiles.keys().map(String::as_str).collect();
    let tables = score_tables(&devices, &config, &profiles)?;

    let mut reports = Vec::with_capacity(tables.len());
    for table in &tables {
        let path = out.join(format!("report_{}.json", table.profile_name));
        let bytes =
            emit_report(table, ReportFormat::Json).map_err(|e| CliError::Data(e.to_string()))?;
        fs::write(&path, bytes).map_err(io_err(&path))?;
        reports.push(path);
    }
    let plot = out.join("plot.csv");
    let bytes = emit_plot_data(&tables).map_err(|e| CliError::Data(e.to_string()))?;
    fs::write(&plot, bytes).map_err(io_err(&plot))?;

    Ok(DemoSummary {
        session_files,
        reports,
        plot,
    })
}
