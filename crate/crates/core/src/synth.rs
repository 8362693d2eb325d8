//! Seeded scenario generator: detections plus matching reference groups.
//!
//! Agents follow piecewise-linear paths on a 50 m × 40 m ground plane at
//! 25 fps. Detection ids are stable per agent and every detection links to
//! the same id one frame earlier; a track starting where others just ended
//! links to those.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::scene::{
    Equipment, FrameDetections, FrameId, GroundBounds, GroundTruthGroup, Mobile, MobileId, Point2, Point3,
    SceneContext, Zone,
};

pub const WALK_SPEED: f64 = 1.2;
pub const FPS: f64 = 25.0;
pub const SHOP_WINDOW: Point2 = Point2 { x: 25.0, y: 21.5 };
const PERSON: Point3 = Point3 { x: 0.5, y: 0.5, z: 1.7 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    WalkTogether,
    /// Two pairs walk together, then one pair turns away at this frame.
    SplitAfter(u64),
    /// Two group blobs fuse into one detection at this frame.
    MergeAt(u64),
    StopNearEquipment,
    /// Five tracks in three bundles; only one bundle is a group.
    Fig4,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("unknown scenario '{0}' (expected walk-together, split-after-N, merge-at-N, stop-near-equipment or fig4)")]
pub struct ScenarioParseError(String);

impl FromStr for Scenario {
    type Err = ScenarioParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ScenarioParseError(s.to_string());
        let num = |rest: &str| rest.parse::<u64>().map_err(|_| err());
        match s {
            "walk-together" => Ok(Scenario::WalkTogether),
            "stop-near-equipment" => Ok(Scenario::StopNearEquipment),
            "fig4" => Ok(Scenario::Fig4),
            _ => {
                if let Some(n) = s.strip_prefix("split-after-") {
                    Ok(Scenario::SplitAfter(num(n)?))
                } else if let Some(n) = s.strip_prefix("merge-at-") {
                    Ok(Scenario::MergeAt(num(n)?))
                } else {
                    Err(err())
                }
            }
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::WalkTogether => f.write_str("walk-together"),
            Scenario::SplitAfter(n) => write!(f, "split-after-{n}"),
            Scenario::MergeAt(n) => write!(f, "merge-at-{n}"),
            Scenario::StopNearEquipment => f.write_str("stop-near-equipment"),
            Scenario::Fig4 => f.write_str("fig4"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub scenario: Scenario,
    pub seed: u64,
    /// Stream length; `None` picks a length that fits the scenario.
    pub frames: Option<u64>,
    /// Walkers in the walk-together formation.
    pub agents: usize,
    /// Standard deviation of per-detection position jitter, m.
    pub position_noise: f64,
    pub equipment_name: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::WalkTogether,
            seed: 0,
            frames: None,
            agents: 2,
            position_noise: 0.001,
            equipment_name: "shop_window".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub context: SceneContext,
    pub frames: Vec<FrameDetections>,
    pub ground_truth: Vec<GroundTruthGroup>,
}

/// Piecewise-linear path, present from the first to the last waypoint.
#[derive(Debug, Clone)]
struct Path {
    id: MobileId,
    waypoints: Vec<(u64, Point2)>,
    size: Point3,
}

impl Path {
    fn sized(mut self, w: f64, d: f64) -> Path {
        self.size = Point3::new(w, d, PERSON.z);
        self
    }

    fn at(&self, frame: u64) -> Option<Point2> {
        let first = self.waypoints.first()?;
        let last = self.waypoints.last()?;
        if frame < first.0 || frame > last.0 {
            return None;
        }
        let i = self.waypoints.partition_point(|(f, _)| *f <= frame);
        let (f0, p0) = self.waypoints[i - 1];
        match self.waypoints.get(i) {
            Some(&(f1, p1)) => Some(p0.lerp(p1, (frame - f0) as f64 / (f1 - f0) as f64)),
            None => Some(p0),
        }
    }

    fn offset(&self, id: MobileId, d: Point2) -> Path {
        Path {
            id,
            size: self.size,
            waypoints: self
                .waypoints
                .iter()
                .map(|(f, p)| (*f, Point2::new(p.x + d.x, p.y + d.y)))
                .collect(),
        }
    }
}

fn step(frames: u64, speed: f64) -> f64 {
    frames as f64 * speed / FPS
}

fn straight(id: MobileId, start: Point2, velocity: Point2, from: u64, to: u64) -> Path {
    let dt = (to - from) as f64 / FPS;
    Path {
        id,
        size: PERSON,
        waypoints: vec![
            (from, start),
            (to, Point2::new(start.x + velocity.x * dt, start.y + velocity.y * dt)),
        ],
    }
}

/// Formation slot `i`: two columns, 0.5 m apart in both directions.
fn slot(i: usize) -> Point2 {
    Point2::new(0.5 * (i % 2) as f64, 0.5 * (i / 2) as f64)
}

fn context(equipment_name: &str) -> SceneContext {
    let mut ctx = SceneContext::new(
        GroundBounds {
            min: Point2::new(0.0, 0.0),
            max: Point2::new(50.0, 40.0),
        },
        FPS,
    );
    ctx.zones.push(Zone {
        name: "shop".into(),
        polygon: vec![
            Point2::new(20.0, 22.0),
            Point2::new(30.0, 22.0),
            Point2::new(30.0, 30.0),
            Point2::new(20.0, 30.0),
        ],
    });
    ctx.equipment.push(Equipment {
        name: equipment_name.to_string(),
        position: SHOP_WINDOW,
    });
    ctx
}

fn gt_over(gt: &mut BTreeMap<u64, GroundTruthGroup>, id: u64, frames: std::ops::Range<u64>, members: &[MobileId]) {
    let g = gt.entry(id).or_insert_with(|| GroundTruthGroup {
        gt_id: id,
        members: BTreeMap::new(),
    });
    let set: BTreeSet<MobileId> = members.iter().copied().collect();
    for f in frames {
        g.members.insert(FrameId(f), set.clone());
    }
}

fn scenario_paths(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (u64, Vec<Path>, BTreeMap<u64, GroundTruthGroup>) {
    let mut gt = BTreeMap::new();
    // small per-seed variation of the walking speed and starting point
    let speed = WALK_SPEED * rng.random_range(0.9..1.1);
    let y0 = 20.0 + rng.random_range(-1.0..1.0);
    let east = Point2::new(speed, 0.0);
    match cfg.scenario {
        Scenario::WalkTogether => {
            let n = cfg.frames.unwrap_or(200);
            let lead = straight(1, Point2::new(5.0, y0), east, 0, n - 1);
            let paths: Vec<Path> = (0..cfg.agents.max(1))
                .map(|i| lead.offset(i as MobileId + 1, slot(i)))
                .collect();
            let ids: Vec<MobileId> = paths.iter().map(|p| p.id).collect();
            if ids.len() > 1 {
                gt_over(&mut gt, 1, 0..n, &ids);
            }
            (n, paths, gt)
        }
        Scenario::SplitAfter(at) => {
            let n = cfg.frames.unwrap_or(at + 120);
            let lead = straight(1, Point2::new(5.0, y0 - 5.0), east, 0, n - 1);
            let turn = lead.at(at).expect("split frame inside the stream");
            let away = Point2::new(speed * 0.5, speed * 0.866);
            let branch = Path {
                id: 3,
                size: PERSON,
                waypoints: vec![
                    (0, Point2::new(5.0, y0 - 5.0)),
                    (at, turn),
                    (n - 1, Point2::new(turn.x + away.x * step(n - 1 - at, 1.0), turn.y + away.y * step(n - 1 - at, 1.0))),
                ],
            };
            let paths = vec![
                lead.offset(1, slot(0)),
                lead.offset(2, slot(1)),
                branch.offset(3, slot(2)),
                branch.offset(4, slot(3)),
            ];
            gt_over(&mut gt, 1, 0..at, &[1, 2, 3, 4]);
            gt_over(&mut gt, 1, at..n, &[1, 2]);
            gt_over(&mut gt, 2, at..n, &[3, 4]);
            (n, paths, gt)
        }
        Scenario::MergeAt(at) => {
            let n = cfg.frames.unwrap_or(at + 120);
            let join = (at / 2).max(1);
            let first = straight(1, Point2::new(5.0, y0), east, 0, at - 1).sized(1.2, 1.0);
            let meet = Point2::new(5.0 + step(at, speed), y0);
            // the second blob closes in from 1.2 m north, 1 m/s sideways
            let approach = Point2::new(speed, -1.0);
            let dt = (at - 1 - join) as f64 / FPS;
            let end = Point2::new(meet.x - approach.x / FPS, meet.y + 1.2 - approach.y / FPS);
            let second = Path {
                id: 2,
                size: PERSON,
                waypoints: vec![
                    (join, Point2::new(end.x - approach.x * dt, end.y - approach.y * dt)),
                    (at - 1, end),
                ],
            }
            .sized(1.2, 1.0);
            let merged = straight(3, Point2::new(meet.x, meet.y + 0.6), east, at, n - 1).sized(2.2, 1.6);
            let paths = vec![first, second, merged];
            gt_over(&mut gt, 1, 0..at, &[1]);
            gt_over(&mut gt, 2, join..at, &[2]);
            gt_over(&mut gt, 1, at..n, &[3]);
            (n, paths, gt)
        }
        Scenario::StopNearEquipment => {
            // walk until the pair's center is 0.25 m short of the equipment's x
            let start = Point2::new(18.0, SHOP_WINDOW.y - 1.5);
            let stop_x = SHOP_WINDOW.x - 0.5;
            let walk = ((stop_x - start.x) / speed * FPS).round() as u64;
            let stop_end = walk + 100;
            let n = cfg.frames.unwrap_or(stop_end + 60);
            let stop_at = Point2::new(start.x + step(walk, speed), start.y);
            let lead = Path {
                id: 1,
                size: PERSON,
                waypoints: vec![
                    (0, start),
                    (walk, stop_at),
                    (stop_end, stop_at),
                    (n - 1, Point2::new(stop_at.x + step(n - 1 - stop_end, speed), stop_at.y)),
                ],
            };
            let paths = vec![lead.offset(1, slot(0)), lead.offset(2, slot(1))];
            gt_over(&mut gt, 1, 0..n, &[1, 2]);
            (n, paths, gt)
        }
        Scenario::Fig4 => {
            let n = cfg.frames.unwrap_or(150);
            let half = n / 2;
            let lone = straight(1, Point2::new(8.0, 32.0), Point2::new(0.0, -speed), 0, n - 1);
            let pair = straight(2, Point2::new(5.0, y0 - 8.0), east, 0, n - 1);
            // one walker whose track is cut in two ids halfway
            let cut = straight(5, Point2::new(45.0, 35.0), Point2::new(-speed, 0.0), 0, n - 1);
            let cut_a = Path {
                id: 4,
                size: PERSON,
                waypoints: vec![(0, cut.at(0).unwrap()), (half, cut.at(half).unwrap())],
            };
            let cut_b = Path {
                id: 5,
                size: PERSON,
                waypoints: vec![(half + 1, cut.at(half + 1).unwrap()), (n - 1, cut.at(n - 1).unwrap())],
            };
            let paths = vec![lone, pair.offset(2, slot(0)), pair.offset(3, slot(1)), cut_a, cut_b];
            gt_over(&mut gt, 1, 0..n, &[2, 3]);
            (n, paths, gt)
        }
    }
}

/// Generates the scenario. The same configuration always yields the same
/// output.
pub fn generate(cfg: &SynthConfig) -> SynthOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, paths, gt) = scenario_paths(cfg, &mut rng);
    let jitter = Normal::new(0.0, cfg.position_noise.max(0.0)).expect("finite noise");
    let mut frames = Vec::with_capacity(n as usize);
    for f in 0..n {
        let mut mobiles = Vec::new();
        for p in &paths {
            let Some(pos) = p.at(f) else { continue };
            let position = Point3::new(pos.x + jitter.sample(&mut rng), pos.y + jitter.sample(&mut rng), 0.0);
            let size = Point3::new(
                p.size.x + rng.random_range(-0.05..0.05),
                p.size.y + rng.random_range(-0.05..0.05),
                p.size.z + rng.random_range(-0.1..0.1),
            );
            let mut m = Mobile::new(p.id, FrameId(f), position, size);
            // a track that starts next to tracks that just ended continues them
            let fathers: Vec<MobileId> = if f == 0 {
                Vec::new()
            } else if p.at(f - 1).is_some() {
                vec![p.id]
            } else {
                paths
                    .iter()
                    .filter(|q| q.id != p.id && q.waypoints.last().is_some_and(|(e, _)| e + 1 == f))
                    .filter(|q| q.at(f - 1).is_some_and(|qp| qp.distance(pos) < 1.5))
                    .map(|q| q.id)
                    .collect()
            };
            for father in fathers {
                m = m.with_father(father, (rng.random_range(0.8..1.0f64) * 100.0).round() / 100.0);
            }
            mobiles.push(m);
        }
        mobiles.sort_by_key(|m| m.id);
        frames.push(FrameDetections {
            frame: FrameId(f),
            mobiles,
        });
    }
    SynthOutput {
        context: context(&cfg.equipment_name),
        frames,
        ground_truth: gt.into_values().collect(),
    }
}
