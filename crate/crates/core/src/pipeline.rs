//! Detections → group tracking → event recognition.
//!
//! Recognition only reads what tracking writes out (group rows, lifecycle
//! rows) plus the detections, so running the stages separately through files
//! gives the same events as running them in one go.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::classifier::{classify, default_class_models, ClassModel};
use crate::dsl::{AlarmLevel, Ontology, Value};
use crate::engine::{
    context_objects, Engine, EngineConfig, EngineError, FrameState, ObjectRef, PrimitiveRegistry,
    RecognizedEvent, SceneObject,
};
use crate::scene::{EventRecord, FrameDetections, FrameId, GroupRecord, MobileClass, MobileId, Point3, SceneContext};
use crate::tracker::{GroupId, GroupLifecycleEvent, GroupTracker, TrackerError, TrackerParams};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone)]
pub struct TrackConfig {
    pub params: TrackerParams,
    pub class_models: Vec<ClassModel>,
    /// Also report the frames still inside the delay window at end of stream.
    pub flush: bool,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            params: TrackerParams::default(),
            class_models: default_class_models(),
            flush: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecognizeConfig {
    pub engine: EngineConfig,
    pub min_alarm: AlarmLevel,
    /// Report primitive models alongside composite ones.
    pub include_primitives: bool,
    /// Frames each side of a frame used to measure group speed.
    pub speed_half_window: u64,
}

impl Default for RecognizeConfig {
    fn default() -> Self {
        Self {
            engine: EngineConfig::default(),
            min_alarm: AlarmLevel::NotUrgent,
            include_primitives: false,
            speed_half_window: TrackerParams::default().window as u64 / 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackOutput {
    pub groups: Vec<GroupRecord>,
    pub lifecycle: Vec<GroupLifecycleEvent>,
}

/// Assigns a class to every detection and drops NOISE.
pub fn classify_frames(frames: &[FrameDetections], models: &[ClassModel]) -> Vec<FrameDetections> {
    frames
        .iter()
        .map(|f| FrameDetections {
            frame: f.frame,
            mobiles: f
                .mobiles
                .iter()
                .filter_map(|m| {
                    let mut m = m.clone();
                    m.class = classify(&m, models);
                    (m.class != MobileClass::Noise).then_some(m)
                })
                .collect(),
        })
        .collect()
}

pub fn track(frames: &[FrameDetections], ctx: &SceneContext, cfg: &TrackConfig) -> Result<TrackOutput, PipelineError> {
    let mut tracker = GroupTracker::new(cfg.params.clone(), ctx)?;
    let mut steps = Vec::new();
    for f in classify_frames(frames, &cfg.class_models) {
        steps.extend(tracker.push_frame(f)?);
    }
    if cfg.flush {
        steps.extend(tracker.flush()?);
    }
    let mut out = TrackOutput::default();
    for s in steps {
        for g in s.snapshots {
            out.groups.push(GroupRecord {
                frame: g.frame,
                group_id: g.group_id,
                incoherence: g.incoherence.value,
                members: g.members,
            });
        }
        out.lifecycle.extend(s.events);
    }
    Ok(out)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Ground speed over the frames of `track` within `half` frames of `frame`.
fn windowed_speed(track: &BTreeMap<FrameId, Point3>, frame: FrameId, half: u64, fps: f64) -> Option<f64> {
    let lo = FrameId(frame.0.saturating_sub(half));
    let hi = FrameId(frame.0 + half);
    let (a, pa) = track.range(lo..=frame).next()?;
    let (b, pb) = track.range(frame..=hi).next_back()?;
    (b > a).then(|| pa.ground().distance(pb.ground()) * fps / (b.0 - a.0) as f64)
}

/// Per-frame engine input: group objects with their attributes, the context
/// objects, and the lifecycle events of that frame.
pub fn frame_states(
    frames: &[FrameDetections],
    out: &TrackOutput,
    ctx: &SceneContext,
    half_window: u64,
) -> Vec<FrameState> {
    let half = half_window.max(1);
    let mut mobiles: HashMap<MobileId, BTreeMap<FrameId, (Point3, Point3)>> = HashMap::new();
    for f in frames {
        for m in &f.mobiles {
            mobiles.entry(m.id).or_default().insert(f.frame, (m.position, m.size));
        }
    }
    let member_tracks: HashMap<MobileId, BTreeMap<FrameId, Point3>> = mobiles
        .iter()
        .map(|(id, t)| (*id, t.iter().map(|(f, (p, _))| (*f, *p)).collect()))
        .collect();

    let mut by_frame: BTreeMap<FrameId, Vec<&GroupRecord>> = BTreeMap::new();
    let mut centers: HashMap<GroupId, BTreeMap<FrameId, Point3>> = HashMap::new();
    for r in &out.groups {
        let ps: Vec<Point3> = r
            .members
            .iter()
            .filter_map(|m| mobiles.get(m)?.get(&r.frame).map(|(p, _)| *p))
            .collect();
        if let (Some(x), Some(y), Some(z)) = (
            mean(ps.iter().map(|p| p.x)),
            mean(ps.iter().map(|p| p.y)),
            mean(ps.iter().map(|p| p.z)),
        ) {
            centers.entry(r.group_id).or_default().insert(r.frame, Point3::new(x, y, z));
        }
        by_frame.entry(r.frame).or_default().push(r);
    }
    let mut lifecycle: BTreeMap<FrameId, Vec<GroupLifecycleEvent>> = BTreeMap::new();
    for e in &out.lifecycle {
        lifecycle.entry(e.frame).or_default().push(e.clone());
        by_frame.entry(e.frame).or_default();
    }

    let context = context_objects(ctx);
    let fps = ctx.frame_rate;
    by_frame
        .into_iter()
        .map(|(frame, records)| {
            let mut objects = Vec::new();
            for r in records {
                let Some(center) = centers.get(&r.group_id).and_then(|c| c.get(&frame)) else {
                    continue;
                };
                let members: Vec<(MobileId, Point3, Point3)> = r
                    .members
                    .iter()
                    .filter_map(|m| mobiles.get(m)?.get(&frame).map(|(p, s)| (*m, *p, *s)))
                    .collect();
                let speed = windowed_speed(&centers[&r.group_id], frame, half, fps).unwrap_or(0.0);
                let member_speeds: Vec<f64> = members
                    .iter()
                    .filter_map(|(m, _, _)| windowed_speed(&member_tracks[m], frame, half, fps))
                    .collect();
                let speed_std = mean(member_speeds.iter().copied())
                    .map(|mu| mean(member_speeds.iter().map(|s| (s - mu).powi(2))).unwrap_or(0.0).sqrt())
                    .unwrap_or(0.0);
                let mut dists = Vec::new();
                for (i, a) in members.iter().enumerate() {
                    for b in &members[i + 1..] {
                        dists.push(a.1.ground().distance(b.1.ground()));
                    }
                }
                let (lo_x, hi_x, lo_y, hi_y) = members.iter().fold(
                    (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
                    |(a, b, c, d), (_, p, _)| (a.min(p.x), b.max(p.x), c.min(p.y), d.max(p.y)),
                );
                let size = [
                    hi_x - lo_x + mean(members.iter().map(|m| m.2.x)).unwrap_or(0.0),
                    hi_y - lo_y + mean(members.iter().map(|m| m.2.y)).unwrap_or(0.0),
                    members.iter().map(|m| m.2.z).fold(0.0, f64::max),
                ];
                let trajectory: Vec<[f64; 3]> = centers[&r.group_id]
                    .range(FrameId(frame.0.saturating_sub(2 * half))..=frame)
                    .map(|(_, p)| [p.x, p.y, p.z])
                    .collect();
                objects.push(
                    SceneObject::new(ObjectRef::Group(r.group_id), "Group")
                        .with("Position", Value::Point3D([center.x, center.y, center.z]))
                        .with("Size", Value::Point3D(size))
                        .with("Speed", Value::Double(speed))
                        .with("SpeedStdDev", Value::Double(speed_std))
                        .with("NumberOfMobiles", Value::Int(members.len() as i64))
                        .with("AverageDistMobiles", Value::Double(mean(dists.into_iter()).unwrap_or(0.0)))
                        .with("Trajectory", Value::Point3DList(trajectory)),
                );
            }
            objects.extend(context.iter().cloned());
            FrameState {
                frame,
                objects,
                lifecycle: lifecycle.remove(&frame).unwrap_or_default(),
            }
        })
        .collect()
}

/// Runs the engine over `states` and returns the reportable events sorted by
/// start frame.
pub fn recognize_states(
    states: &[FrameState],
    ontology: &Ontology,
    registry: PrimitiveRegistry,
    cfg: &RecognizeConfig,
) -> Result<Vec<RecognizedEvent>, PipelineError> {
    let mut engine = Engine::new(ontology, registry, cfg.engine.clone())?;
    for s in states {
        engine.step(s)?;
    }
    engine.finish();
    let mut events: Vec<RecognizedEvent> = engine
        .events()
        .iter()
        .filter(|e| e.alarm >= cfg.min_alarm && (cfg.include_primitives || !engine.is_primitive(&e.model)))
        .cloned()
        .collect();
    events.sort_by(|a, b| {
        (a.interval.start, a.interval.end, &a.model, &a.bindings).cmp(&(
            b.interval.start,
            b.interval.end,
            &b.model,
            &b.bindings,
        ))
    });
    Ok(events)
}

pub fn recognize(
    frames: &[FrameDetections],
    tracked: &TrackOutput,
    ctx: &SceneContext,
    ontology: &Ontology,
    registry: PrimitiveRegistry,
    cfg: &RecognizeConfig,
) -> Result<Vec<RecognizedEvent>, PipelineError> {
    let states = frame_states(frames, tracked, ctx, cfg.speed_half_window);
    recognize_states(&states, ontology, registry, cfg)
}

pub fn run(
    frames: &[FrameDetections],
    ctx: &SceneContext,
    ontology: &Ontology,
    registry: PrimitiveRegistry,
    track_cfg: &TrackConfig,
    cfg: &RecognizeConfig,
) -> Result<(TrackOutput, Vec<RecognizedEvent>), PipelineError> {
    let tracked = track(frames, ctx, track_cfg)?;
    let events = recognize(frames, &tracked, ctx, ontology, registry, cfg)?;
    Ok((tracked, events))
}

/// Output row for `e`, with bindings in the model's declaration order.
pub fn event_record(ontology: &Ontology, e: &RecognizedEvent) -> EventRecord {
    let mut rec = e.to_record();
    if let Some(m) = ontology.model(&e.model) {
        let order: BTreeMap<&str, usize> = m
            .physical_objects
            .iter()
            .enumerate()
            .map(|(i, p)| (p.var.as_str(), i))
            .collect();
        rec.bindings.sort_by_key(|(v, _)| order.get(v.as_str()).copied().unwrap_or(usize::MAX));
    }
    rec
}

/// Group ids that appear in `out` at any frame.
pub fn group_ids(out: &TrackOutput) -> BTreeSet<GroupId> {
    out.groups.iter().map(|g| g.group_id).collect()
}
