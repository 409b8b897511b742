//! Command-line entry points. Results go to stdout as JSON, diagnostics to
//! stderr, and the exit code says which kind of failure happened.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::session::{log_digest, read_log_file, replay_session, EegSource, ServeError, ServeOptions, Server};
use crate::signal::{analyze_recording, BandDefinition, ChannelLayout, FilterMode, PipelineConfig};
use crate::sim::{simulate, SimError, SimulationOptions};
use crate::synth::{read_eeg_csv_file, GeneratorParams, SynthError, WorkloadScript};
use crate::task::{generate_sequence, GameConfig, TaskError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ENVIRONMENT: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Session logs are written under this directory, relative to the working
/// directory.
pub const SESSIONS_DIR: &str = "sessions";

#[derive(Debug, Parser)]
#[command(name = "pizza-mwl", version, about = "Back-to-Pizza N-back game with a live EEG workload monitor")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Host one live session over WebSocket until interrupted.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
        /// `synthetic` or `replay:<file.csv>`.
        #[arg(long, default_value = "synthetic")]
        eeg: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Game config JSON; absent fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a full session headless with a virtual player and synthetic EEG.
    Simulate {
        /// Workload script JSON; defaults to level 0 then level 1 from 60 s.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// `accuracy=<p>` with p in [0, 1].
        #[arg(long, default_value = "accuracy=0.9")]
        player: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Offline zero-phase analysis of an EEG CSV into workload JSON lines.
    Analyze {
        csv: PathBuf,
        /// `theta=<lo>-<hi>,alpha=<lo>-<hi>`; either may be omitted.
        #[arg(long)]
        bands: Option<String>,
        /// Layout name or layout JSON file; defaults to the file's own.
        #[arg(long)]
        layout: Option<String>,
        /// JSON-lines destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the order program for a config as JSON.
    GenSequence {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 60)]
        trials: usize,
        #[arg(long, default_value_t = 0.3)]
        target_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-run a session log and check every recorded output.
    ReplayLog { log: PathBuf },
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
    fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, message)
    }
    fn input(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, message)
    }
    fn env(message: impl Into<String>) -> Self {
        Self::new(EXIT_ENVIRONMENT, message)
    }
}

impl From<TaskError> for CliError {
    fn from(e: TaskError) -> Self {
        Self::config(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        Self::config(e.to_string())
    }
}

impl From<ServeError> for CliError {
    fn from(e: ServeError) -> Self {
        let code = match &e {
            ServeError::Bind { .. } | ServeError::Io(_) => EXIT_ENVIRONMENT,
            ServeError::Replay { .. } => EXIT_INPUT,
            ServeError::Config(_) | ServeError::Eeg(_) | ServeError::Pipeline(_) => EXIT_CONFIG,
        };
        Self::new(code, e.to_string())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Usage errors exit 2, as clap reports them.
pub fn run_from<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ENVIRONMENT } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(rendered.as_bytes()) } else { stdout.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match run(cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Serve { listen, eeg, seed, config } => serve(listen, &eeg, seed, config.as_deref(), stdout),
        Command::Simulate { script, config, player, seed } => {
            simulate_cmd(script.as_deref(), config.as_deref(), &player, seed, stdout)
        }
        Command::Analyze { csv, bands, layout, out } => {
            analyze_cmd(&csv, bands.as_deref(), layout.as_deref(), out.as_deref(), stdout, stderr)
        }
        Command::GenSequence { n, trials, target_rate, seed } => {
            let config = GameConfig { n_level: n, trial_count: trials, target_rate, seed, ..GameConfig::default() };
            let seq = generate_sequence(&config)?;
            emit(stdout, &serde_json::to_string(&seq).expect("plain data"))
        }
        Command::ReplayLog { log } => replay_log_cmd(&log, stdout),
    }
}

fn emit(stdout: &mut dyn Write, line: &str) -> Result<(), CliError> {
    writeln!(stdout, "{line}").and_then(|_| stdout.flush()).map_err(|e| CliError::env(format!("stdout: {e}")))
}

fn read_text(path: &Path, code: i32) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::new(code, format!("{}: {e}", path.display())))
}

pub fn load_game_config(path: Option<&Path>) -> Result<GameConfig, CliError> {
    let Some(path) = path else { return Ok(GameConfig::default()) };
    let text = read_text(path, EXIT_CONFIG)?;
    let config: GameConfig =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok(config)
}

fn load_script(path: Option<&Path>, duration_s: f64) -> Result<WorkloadScript, CliError> {
    match path {
        None => WorkloadScript::step(60.0, duration_s).map_err(|e| CliError::config(e.to_string())),
        Some(p) => {
            let text = read_text(p, EXIT_CONFIG)?;
            let script =
                WorkloadScript::from_json(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            script.validate().map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            Ok(script)
        }
    }
}

/// Parses `accuracy=<p>`.
pub fn parse_player(spec: &str) -> Result<f64, CliError> {
    let bad = || CliError::config(format!("--player expects accuracy=<p> with p in [0, 1], got '{spec}'"));
    let value = spec.strip_prefix("accuracy=").ok_or_else(bad)?;
    let p: f64 = value.trim().parse().map_err(|_| bad())?;
    if !(0.0..=1.0).contains(&p) {
        return Err(bad());
    }
    Ok(p)
}

/// Parses `theta=4-8,alpha=8-13` over the defaults.
pub fn parse_bands(spec: &str) -> Result<(BandDefinition, BandDefinition), CliError> {
    let mut theta = BandDefinition::theta();
    let mut alpha = BandDefinition::alpha();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || CliError::config(format!("--bands entry '{part}' is not name=<lo>-<hi>"));
        let (name, range) = part.split_once('=').ok_or_else(bad)?;
        let (lo, hi) = range.split_once('-').ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let band = BandDefinition::new(name.trim(), lo, hi).map_err(|e| CliError::config(e.to_string()))?;
        match name.trim() {
            "theta" => theta = band,
            "alpha" => alpha = band,
            other => return Err(CliError::config(format!("unknown band '{other}'; expected theta or alpha"))),
        }
    }
    Ok((theta, alpha))
}

fn load_layout(spec: &str) -> Result<ChannelLayout, CliError> {
    if let Some(layout) = ChannelLayout::by_name(spec) {
        return Ok(layout);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::config(format!("unknown layout '{spec}'")));
    }
    let layout: ChannelLayout = serde_json::from_str(&read_text(path, EXIT_CONFIG)?)
        .map_err(|e| CliError::config(format!("{spec}: {e}")))?;
    layout.validate().map_err(|e| CliError::config(format!("{spec}: {e}")))?;
    Ok(layout)
}

fn serve(
    listen: String,
    eeg: &str,
    seed: Option<u64>,
    config: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let mut config = load_game_config(config)?;
    let mut params = GeneratorParams::default();
    if let Some(s) = seed {
        config.seed = s;
        params.seed = s;
    }
    let eeg = match eeg {
        "synthetic" => EegSource::Synthetic { params, script: None },
        other => match other.strip_prefix("replay:") {
            Some(path) if !path.is_empty() => EegSource::Replay(PathBuf::from(path)),
            _ => return Err(CliError::config(format!("--eeg expects synthetic or replay:<file>, got '{other}'"))),
        },
    };
    let opts = ServeOptions {
        listen,
        eeg,
        config,
        pipeline: PipelineConfig::default(),
        sessions_dir: PathBuf::from(SESSIONS_DIR),
        session_id: None,
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::env(format!("runtime: {e}")))?;
    rt.block_on(async {
        let server = Server::bind(opts).await?;
        let line = json!({
            "event": "listening",
            "addr": server.local_addr().to_string(),
            "session_id": server.session_id(),
        });
        emit(stdout, &line.to_string())?;
        server
            .run(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn simulate_cmd(
    script: Option<&Path>,
    config: Option<&Path>,
    player: &str,
    seed: u64,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let accuracy = parse_player(player)?;
    let config = load_game_config(config)?;
    generate_sequence(&config)?;
    let script = load_script(script, config.session_duration_s)?;
    let mut opts = SimulationOptions::new(script, config, accuracy, seed);
    opts.wall_clock_unix_ms =
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
    let run = simulate(&opts)?;

    let dir = Path::new(SESSIONS_DIR);
    std::fs::create_dir_all(dir).map_err(|e| CliError::env(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{}.jsonl", run.summary.session_id));
    let file = File::create(&path).map_err(|e| CliError::env(format!("{}: {e}", path.display())))?;
    crate::session::write_log(file, &run.records).map_err(|e| CliError::env(format!("{}: {e}", path.display())))?;

    let mut out = serde_json::to_value(&run.summary).expect("plain data");
    out["log_path"] = json!(path.display().to_string());
    emit(stdout, &out.to_string())
}

fn analyze_cmd(
    csv: &Path,
    bands: Option<&str>,
    layout: Option<&str>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let recording = read_eeg_csv_file(csv).map_err(|e| match e {
        SynthError::Io(reason) => CliError::input(format!("{}: {reason}", csv.display())),
        other => CliError::input(format!("{}: {other}", csv.display())),
    })?;
    let mut config = PipelineConfig {
        layout: recording.layout.clone(),
        sampling_rate_hz: recording.sampling_rate_hz,
        filter_mode: FilterMode::ZeroPhase,
        ..PipelineConfig::default()
    };
    if let Some(spec) = layout {
        let l = load_layout(spec)?;
        if l.channel_names != recording.layout.channel_names {
            return Err(CliError::config(format!("layout '{}' does not match the file's channels", l.name)));
        }
        config.layout = l;
    }
    if let Some(spec) = bands {
        (config.theta, config.alpha) = parse_bands(spec)?;
    }
    config.validate().map_err(|e| CliError::config(e.to_string()))?;
    if recording.duration_s() < config.window_s {
        let _ = writeln!(
            stderr,
            "warning: {} holds {:.3} s of EEG, shorter than the {} s window; no samples produced",
            csv.display(),
            recording.duration_s(),
            config.window_s
        );
    }
    let samples = analyze_recording(config, &recording.chunks).map_err(|e| CliError::input(e.to_string()))?;

    match out {
        Some(path) => {
            let f = File::create(path).map_err(|e| CliError::env(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(f);
            for s in &samples {
                writeln!(w, "{}", serde_json::to_string(s).expect("plain data"))
                    .map_err(|e| CliError::env(format!("{}: {e}", path.display())))?;
            }
            w.flush().map_err(|e| CliError::env(format!("{}: {e}", path.display())))?;
            let summary = json!({ "samples": samples.len(), "out": path.display().to_string() });
            emit(stdout, &summary.to_string())
        }
        None => {
            for s in &samples {
                emit(stdout, &serde_json::to_string(s).expect("plain data"))?;
            }
            Ok(())
        }
    }
}

fn replay_log_cmd(path: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let records = read_log_file(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let state = replay_session(&records).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let line = json!({
        "ok": true,
        "records": records.len(),
        "digest": log_digest(&records),
        "state": state,
    });
    emit(stdout, &line.to_string())
}
