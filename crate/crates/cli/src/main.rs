use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use groupscope::dsl::{exemplar, parse_ontology, prelude, validate, AlarmLevel, Ontology};
use groupscope::engine::{EngineConfig, PrimitiveParams, PrimitiveRegistry};
use groupscope::eval::{evaluate, MatchConfig, MetricsReport};
use groupscope::pipeline::{event_record, recognize, track, RecognizeConfig, TrackConfig, TrackOutput};
use groupscope::synth::{generate, Scenario, SynthConfig};
use groupscope::tracker::{parse_lifecycle, write_lifecycle, TrackerParams};
use groupscope::{
    parse_context, parse_detections, parse_ground_truth, parse_groups, write_context, write_detections,
    write_events, write_ground_truth, write_groups, FrameDetections, SceneContext,
};

#[derive(Parser, Debug)]
#[command(name = "groupscope", version, about = "Group tracking and group event recognition from per-frame detections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Track groups; writes group rows and lifecycle events.
    Track(TrackArgs),
    /// Recognize events from previously tracked groups.
    Recognize(RecognizeArgs),
    /// Track and recognize in one go.
    Run(RunArgs),
    /// Score tracked groups against ground truth.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic scenario with matching ground truth.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Default)]
struct TrackerFlags {
    /// Sliding window length T, frames (also the output delay).
    #[arg(long)]
    window: Option<usize>,
    /// Mean-Shift bandwidth in the normalized feature space.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    link_threshold: Option<f64>,
    /// Speed normalization bound, m/s.
    #[arg(long)]
    max_speed: Option<f64>,
    #[arg(long)]
    w_dist: Option<f64>,
    #[arg(long)]
    w_speed: Option<f64>,
    #[arg(long)]
    w_dir: Option<f64>,
    #[arg(long)]
    incoherence_threshold: Option<f64>,
    /// Groups unseen for stale-factor × window frames are terminated.
    #[arg(long)]
    stale_factor: Option<usize>,
    /// Also emit the frames still inside the delay window at end of stream.
    #[arg(long)]
    flush: bool,
}

#[derive(Args, Debug, Default)]
struct EngineFlags {
    /// Scenario models layered over the built-in ontology.
    #[arg(long, value_name = "FILE")]
    scenarios: Option<PathBuf>,
    /// Only report events at or above this level.
    #[arg(long, value_name = "LEVEL")]
    min_alarm: Option<String>,
    /// Gap in frames bridged inside primitive intervals.
    #[arg(long)]
    max_gap: Option<u64>,
    /// Group_Stop speed threshold, m/s.
    #[arg(long)]
    stop_speed: Option<f64>,
    /// Group_Near_Equipment distance, m.
    #[arg(long)]
    near_distance: Option<f64>,
    /// Group_Lively speed standard deviation, m/s.
    #[arg(long)]
    lively_stddev: Option<f64>,
    /// Report primitive events too.
    #[arg(long)]
    primitives: bool,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, value_name = "FILE")]
    context: PathBuf,
    /// key=value parameters; flags win over the file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Outputs {
    /// Write one set of outputs per input into this directory.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Group rows (single input); stdout for `track` when omitted.
    #[arg(long, value_name = "FILE")]
    groups: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    lifecycle: Option<PathBuf>,
    /// Parallel sequences when several inputs are given.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct TrackArgs {
    #[arg(long, value_name = "FILE", num_args = 1.., required = true)]
    detections: Vec<PathBuf>,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    tracker: TrackerFlags,
    #[command(flatten)]
    out: Outputs,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, value_name = "FILE", num_args = 1.., required = true)]
    detections: Vec<PathBuf>,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    tracker: TrackerFlags,
    #[command(flatten)]
    engine: EngineFlags,
    #[command(flatten)]
    out: Outputs,
    /// Event rows (single input); stdout when omitted.
    #[arg(long, value_name = "FILE")]
    events: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RecognizeArgs {
    #[arg(long, value_name = "FILE")]
    detections: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Group rows written by `track`.
    #[arg(long, value_name = "FILE")]
    groups: PathBuf,
    /// Lifecycle rows written by `track`.
    #[arg(long, value_name = "FILE")]
    lifecycle: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineFlags,
    /// T used when tracking; sets the speed measurement window.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, value_name = "FILE")]
    events: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    groups: PathBuf,
    #[arg(long, value_name = "FILE")]
    ground_truth: PathBuf,
    #[arg(long)]
    jaccard_threshold: Option<f64>,
    /// Write the metrics as a CSV header and row.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// walk-together, split-after-N, merge-at-N, stop-near-equipment or fig4.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long, default_value_t = 2)]
    agents: usize,
    /// Position jitter standard deviation, m.
    #[arg(long, default_value_t = 0.001)]
    noise: f64,
    #[arg(long, default_value = "shop_window")]
    equipment_name: String,
    /// Detections output; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    detections: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    ground_truth: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    context: Option<PathBuf>,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const USAGE: u8 = 1;
const INVALID: u8 = 2;
const RUNTIME: u8 = 3;

trait ExitContext<T> {
    fn code(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitContext<T> for Result<T, E> {
    fn code(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .code(RUNTIME)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .code(RUNTIME),
        None => io::stdout().lock().write_all(text.as_bytes()).code(RUNTIME),
    }
}

/// `key = value` lines; `#` starts a comment. Keys match the long flag names.
fn load_config(path: Option<&Path>) -> Result<BTreeMap<String, String>, Failure> {
    const KEYS: &[&str] = &[
        "window",
        "tolerance",
        "link-threshold",
        "max-speed",
        "w-dist",
        "w-speed",
        "w-dir",
        "incoherence-threshold",
        "stale-factor",
        "flush",
        "min-alarm",
        "max-gap",
        "stop-speed",
        "near-distance",
        "lively-stddev",
        "primitives",
        "jaccard-threshold",
    ];
    let Some(path) = path else { return Ok(BTreeMap::new()) };
    let text = read(path)?;
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), i + 1))
            .code(INVALID)?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(anyhow!("{}:{}: unknown key '{}'", path.display(), i + 1, k.trim())).code(INVALID);
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// Flag, else config value, else default.
fn pick<T: FromStr>(flag: Option<T>, cfg: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, Failure> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(s) => s
            .parse()
            .map_err(|_| anyhow!("config: invalid value '{s}' for {key}"))
            .code(INVALID),
        None => Ok(default),
    }
}

fn switch(flag: bool, cfg: &BTreeMap<String, String>, key: &str) -> Result<bool, Failure> {
    Ok(flag || pick(None, cfg, key, false)?)
}

fn tracker_params(f: &TrackerFlags, cfg: &BTreeMap<String, String>) -> Result<TrackerParams, Failure> {
    let d = TrackerParams::default();
    let p = TrackerParams {
        window: pick(f.window, cfg, "window", d.window)?,
        tolerance: pick(f.tolerance, cfg, "tolerance", d.tolerance)?,
        link_threshold: pick(f.link_threshold, cfg, "link-threshold", d.link_threshold)?,
        max_speed: pick(f.max_speed, cfg, "max-speed", d.max_speed)?,
        w_dist: pick(f.w_dist, cfg, "w-dist", d.w_dist)?,
        w_speed: pick(f.w_speed, cfg, "w-speed", d.w_speed)?,
        w_dir: pick(f.w_dir, cfg, "w-dir", d.w_dir)?,
        incoherence_threshold: pick(f.incoherence_threshold, cfg, "incoherence-threshold", d.incoherence_threshold)?,
        stale_factor: pick(f.stale_factor, cfg, "stale-factor", d.stale_factor)?,
        ..d
    };
    p.validate().code(INVALID)?;
    Ok(p)
}

fn recognize_config(
    f: &EngineFlags,
    window: Option<usize>,
    cfg: &BTreeMap<String, String>,
) -> Result<RecognizeConfig, Failure> {
    let d = PrimitiveParams::default();
    let params = PrimitiveParams {
        stop_speed: pick(f.stop_speed, cfg, "stop-speed", d.stop_speed)?,
        near_distance: pick(f.near_distance, cfg, "near-distance", d.near_distance)?,
        lively_stddev: pick(f.lively_stddev, cfg, "lively-stddev", d.lively_stddev)?,
    };
    let level: String = pick(f.min_alarm.clone(), cfg, "min-alarm", AlarmLevel::NotUrgent.as_str().to_string())?;
    let min_alarm = AlarmLevel::parse(&level.to_ascii_uppercase())
        .ok_or_else(|| anyhow!("unknown alarm level '{level}' (NOTURGENT, URGENT, VERYURGENT)"))
        .code(INVALID)?;
    let window = pick(window, cfg, "window", TrackerParams::default().window)?;
    Ok(RecognizeConfig {
        engine: EngineConfig {
            max_gap: pick(f.max_gap, cfg, "max-gap", 0)?,
            params,
            ..EngineConfig::default()
        },
        min_alarm,
        include_primitives: switch(f.primitives, cfg, "primitives")?,
        speed_half_window: (window as u64 / 2).max(1),
    })
}

/// Prelude + built-in models, overlaid with the user's scenario file.
fn load_ontology(path: Option<&Path>) -> Result<Ontology, Failure> {
    let mut ont = prelude().overlay(&exemplar());
    if let Some(p) = path {
        let user = parse_ontology(&read(p)?)
            .map_err(|e| anyhow!("{}: {e}", p.display()))
            .code(INVALID)?;
        ont = ont.overlay(&user);
    }
    let diags = validate(&ont);
    if !diags.is_empty() {
        let list: Vec<String> = diags.iter().map(|d| format!("  {d}")).collect();
        return Err(anyhow!("scenario models do not validate:\n{}", list.join("\n"))).code(INVALID);
    }
    Ok(ont)
}

fn load_context(path: &Path) -> Result<SceneContext, Failure> {
    parse_context(&read(path)?)
        .map_err(|e| anyhow!("{}: {e}", path.display()))
        .code(INVALID)
}

fn load_detections(path: &Path) -> Result<Vec<FrameDetections>, Failure> {
    let stream = parse_detections(&read(path)?)
        .map_err(|e| anyhow!("{}: {e}", path.display()))
        .code(INVALID)?;
    for w in &stream.warnings {
        eprintln!("warning: {}: {w:?}", path.display());
    }
    Ok(stream.frames)
}

fn tracked_output(out: &TrackOutput) -> (String, String) {
    (write_groups(&out.groups), write_lifecycle(&out.lifecycle))
}

/// Output file for `input` inside `dir`: `<stem>.<suffix>`.
fn derived(dir: &Path, input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("sequence");
    dir.join(format!("{stem}.{suffix}"))
}

/// Runs `job` on every input, up to `jobs` at a time.
fn for_each_input<F>(inputs: &[PathBuf], jobs: usize, job: F) -> Result<(), Failure>
where
    F: Fn(&Path) -> Result<(), Failure> + Sync,
{
    let next = AtomicUsize::new(0);
    let failures: Mutex<Vec<(usize, Failure)>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, inputs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(input) = inputs.get(i) else { break };
                if let Err(f) = job(input) {
                    failures.lock().expect("failure list").push((i, f));
                }
            });
        }
    });
    let mut failures = failures.into_inner().expect("failure list");
    failures.sort_by_key(|(i, _)| *i);
    match failures.into_iter().next() {
        Some((_, f)) => Err(f),
        None => Ok(()),
    }
}

fn check_outputs(inputs: &[PathBuf], out: &Outputs, single_paths: bool) -> Result<(), Failure> {
    if inputs.len() > 1 && out.out_dir.is_none() {
        return Err(anyhow!("several --detections inputs need --out-dir")).code(USAGE);
    }
    if out.out_dir.is_some() && single_paths {
        return Err(anyhow!("--out-dir cannot be combined with per-file output paths")).code(USAGE);
    }
    if out.jobs == 0 {
        return Err(anyhow!("--jobs must be at least 1")).code(USAGE);
    }
    if let Some(dir) = &out.out_dir {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .code(RUNTIME)?;
    }
    Ok(())
}

fn cmd_track(a: TrackArgs) -> Result<(), Failure> {
    check_outputs(&a.detections, &a.out, a.out.groups.is_some() || a.out.lifecycle.is_some())?;
    let cfg = load_config(a.common.config.as_deref())?;
    let track_cfg = TrackConfig {
        params: tracker_params(&a.tracker, &cfg)?,
        flush: switch(a.tracker.flush, &cfg, "flush")?,
        ..TrackConfig::default()
    };
    let ctx = load_context(&a.common.context)?;
    for_each_input(&a.detections, a.out.jobs, |input| {
        let frames = load_detections(input)?;
        let out = track(&frames, &ctx, &track_cfg).code(RUNTIME)?;
        let (groups, lifecycle) = tracked_output(&out);
        match &a.out.out_dir {
            Some(dir) => {
                write_out(Some(&derived(dir, input, "groups.csv")), &groups)?;
                write_out(Some(&derived(dir, input, "lifecycle.csv")), &lifecycle)
            }
            None => {
                write_out(a.out.groups.as_deref(), &groups)?;
                match &a.out.lifecycle {
                    Some(p) => write_out(Some(p), &lifecycle),
                    None => Ok(()),
                }
            }
        }
    })
}

fn events_csv(ont: &Ontology, events: &[groupscope::engine::RecognizedEvent]) -> String {
    let records: Vec<_> = events.iter().map(|e| event_record(ont, e)).collect();
    write_events(&records)
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    check_outputs(
        &a.detections,
        &a.out,
        a.out.groups.is_some() || a.out.lifecycle.is_some() || a.events.is_some(),
    )?;
    let cfg = load_config(a.common.config.as_deref())?;
    let track_cfg = TrackConfig {
        params: tracker_params(&a.tracker, &cfg)?,
        flush: switch(a.tracker.flush, &cfg, "flush")?,
        ..TrackConfig::default()
    };
    let rec_cfg = recognize_config(&a.engine, Some(track_cfg.params.window), &cfg)?;
    let ont = load_ontology(a.engine.scenarios.as_deref())?;
    let ctx = load_context(&a.common.context)?;
    for_each_input(&a.detections, a.out.jobs, |input| {
        let frames = load_detections(input)?;
        let tracked = track(&frames, &ctx, &track_cfg).code(RUNTIME)?;
        let events = recognize(&frames, &tracked, &ctx, &ont, PrimitiveRegistry::builtin(), &rec_cfg).code(RUNTIME)?;
        let (groups, lifecycle) = tracked_output(&tracked);
        let events = events_csv(&ont, &events);
        match &a.out.out_dir {
            Some(dir) => {
                write_out(Some(&derived(dir, input, "groups.csv")), &groups)?;
                write_out(Some(&derived(dir, input, "lifecycle.csv")), &lifecycle)?;
                write_out(Some(&derived(dir, input, "events.csv")), &events)
            }
            None => {
                if let Some(p) = &a.out.groups {
                    write_out(Some(p), &groups)?;
                }
                if let Some(p) = &a.out.lifecycle {
                    write_out(Some(p), &lifecycle)?;
                }
                write_out(a.events.as_deref(), &events)
            }
        }
    })
}

fn cmd_recognize(a: RecognizeArgs) -> Result<(), Failure> {
    let cfg = load_config(a.common.config.as_deref())?;
    let rec_cfg = recognize_config(&a.engine, a.window, &cfg)?;
    let ont = load_ontology(a.engine.scenarios.as_deref())?;
    let ctx = load_context(&a.common.context)?;
    let frames = load_detections(&a.detections)?;
    let groups = parse_groups(&read(&a.groups)?)
        .map_err(|e| anyhow!("{}: {e}", a.groups.display()))
        .code(INVALID)?;
    let lifecycle = match &a.lifecycle {
        Some(p) => parse_lifecycle(&read(p)?)
            .map_err(|e| anyhow!("{}: {e}", p.display()))
            .code(INVALID)?,
        None => Vec::new(),
    };
    let tracked = TrackOutput { groups, lifecycle };
    let events = recognize(&frames, &tracked, &ctx, &ont, PrimitiveRegistry::builtin(), &rec_cfg).code(RUNTIME)?;
    write_out(a.events.as_deref(), &events_csv(&ont, &events))
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), Failure> {
    let cfg = load_config(a.config.as_deref())?;
    let threshold = pick(a.jaccard_threshold, &cfg, "jaccard-threshold", MatchConfig::default().jaccard_threshold)?;
    let match_cfg = MatchConfig::new(threshold).code(INVALID)?;
    let groups = parse_groups(&read(&a.groups)?)
        .map_err(|e| anyhow!("{}: {e}", a.groups.display()))
        .code(INVALID)?;
    let gt = parse_ground_truth(&read(&a.ground_truth)?)
        .map_err(|e| anyhow!("{}: {e}", a.ground_truth.display()))
        .code(INVALID)?;
    let report = evaluate(&groups, &gt, &match_cfg);
    let csv = format!("{}\n{}\n", MetricsReport::CSV_HEADER, report.csv_row());
    match &a.csv {
        Some(p) => {
            write_out(None, &format!("{report}"))?;
            write_out(Some(p), &csv)
        }
        None => write_out(None, &format!("{report}\n{csv}")),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<(), Failure> {
    let scenario: Scenario = a.scenario.parse().code(USAGE)?;
    if !(a.noise >= 0.0 && a.noise.is_finite()) || a.agents == 0 {
        return Err(anyhow!("--noise must be ≥ 0 and --agents ≥ 1")).code(INVALID);
    }
    let out = generate(&SynthConfig {
        scenario,
        seed: a.seed,
        frames: a.frames,
        agents: a.agents,
        position_noise: a.noise,
        equipment_name: a.equipment_name,
    });
    write_out(
        a.detections.as_deref(),
        &write_detections(out.frames.iter().flat_map(|f| &f.mobiles)),
    )?;
    if let Some(p) = &a.ground_truth {
        write_out(Some(p), &write_ground_truth(&out.ground_truth))?;
    }
    if let Some(p) = &a.context {
        write_out(Some(p), &write_context(&out.context))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Track(a) => cmd_track(a),
        Command::Recognize(a) => cmd_recognize(a),
        Command::Run(a) => cmd_run(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
