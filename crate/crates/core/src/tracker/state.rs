use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

use super::incoherence::{group_incoherence, Incoherence};
use super::lifecycle::{GroupId, GroupLifecycleEvent, LifecycleKind};
use super::params::{ParamError, TrackerParams};
use super::window::{build_window, normalize, WindowTrajectory};
use crate::meanshift::{mean_shift, FeaturePoint, MeanShiftError};
use crate::scene::{
    FatherLink, FrameDetections, FrameId, GroundBounds, MobileClass, MobileId, Point2, SceneContext,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("frame {got} fed after frame {last}; frames must strictly increase")]
    OutOfOrder { last: FrameId, got: FrameId },
    #[error(transparent)]
    Clustering(#[from] MeanShiftError),
}

/// Running averages of the coherence statistics over the frames a group was
/// observed in.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupStats {
    pub distance_avg: f64,
    pub speed_std: f64,
    pub direction_std: f64,
    pub samples: u64,
}

impl GroupStats {
    fn add(&mut self, inc: &Incoherence) {
        self.samples += 1;
        let n = self.samples as f64;
        self.distance_avg += (inc.distance_avg - self.distance_avg) / n;
        self.speed_std += (inc.speed_std - self.speed_std) / n;
        self.direction_std += (inc.direction_std - self.direction_std) / n;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub id: GroupId,
    pub created_at: FrameId,
    pub last_member_frame: FrameId,
    pub members_by_frame: BTreeMap<FrameId, BTreeSet<MobileId>>,
    pub stats: GroupStats,
    /// Member -> first frame of its current run outside the group's main
    /// cluster.
    diverging_since: BTreeMap<MobileId, FrameId>,
}

impl Group {
    fn new(id: GroupId, frame: FrameId) -> Self {
        Self {
            id,
            created_at: frame,
            last_member_frame: frame,
            members_by_frame: BTreeMap::new(),
            stats: GroupStats::default(),
            diverging_since: BTreeMap::new(),
        }
    }

    pub fn members_at(&self, frame: FrameId) -> Option<&BTreeSet<MobileId>> {
        self.members_by_frame.get(&frame)
    }

    /// Older first: earlier creation, then smaller id.
    fn age_key(&self) -> (FrameId, GroupId) {
        (self.created_at, self.id)
    }
}

/// Group state reported for one delayed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSnapshot {
    pub frame: FrameId,
    pub group_id: GroupId,
    pub members: BTreeSet<MobileId>,
    pub incoherence: Incoherence,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepOutput {
    pub frame: FrameId,
    pub snapshots: Vec<GroupSnapshot>,
    pub events: Vec<GroupLifecycleEvent>,
}

#[derive(Debug, Clone)]
struct TrackPoint {
    position: Point2,
    class: MobileClass,
    fathers: Vec<FatherLink>,
}

/// Result of associating clusters with existing groups.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpdateOutcome {
    pub admitted: BTreeMap<MobileId, GroupId>,
    /// Per cluster, the members that were not admitted.
    pub unassigned: Vec<Vec<MobileId>>,
}

/// Sliding-window group tracker. Frames go in through [`push_frame`]; group
/// state comes out `window` frames later.
///
/// [`push_frame`]: GroupTracker::push_frame
#[derive(Debug, Clone)]
pub struct GroupTracker {
    params: TrackerParams,
    bounds: GroundBounds,
    frame_rate: f64,
    tracks: HashMap<MobileId, BTreeMap<FrameId, TrackPoint>>,
    frames: BTreeMap<FrameId, Vec<MobileId>>,
    membership: HashMap<(FrameId, MobileId), GroupId>,
    groups: BTreeMap<GroupId, Group>,
    next_id: GroupId,
    first_frame: Option<FrameId>,
    last_ingested: Option<FrameId>,
    next_to_process: Option<FrameId>,
}

impl GroupTracker {
    pub fn new(params: TrackerParams, context: &SceneContext) -> Result<Self, TrackerError> {
        params.validate()?;
        Ok(Self {
            params,
            bounds: context.ground_bounds,
            frame_rate: context.frame_rate,
            tracks: HashMap::new(),
            frames: BTreeMap::new(),
            membership: HashMap::new(),
            groups: BTreeMap::new(),
            next_id: 1,
            first_frame: None,
            last_ingested: None,
            next_to_process: None,
        })
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn groups(&self) -> impl Iterator<Item = &Group> {
        self.groups.values()
    }

    pub fn group(&self, id: GroupId) -> Option<&Group> {
        self.groups.get(&id)
    }

    pub fn group_of(&self, mobile: MobileId, frame: FrameId) -> Option<GroupId> {
        self.membership.get(&(frame, mobile)).copied()
    }

    /// Last frame whose groups have been reported, if any.
    pub fn processed_until(&self) -> Option<FrameId> {
        self.next_to_process.and_then(|f| f.offset(-1))
    }

    fn ingest(&mut self, det: FrameDetections) -> Result<(), TrackerError> {
        if let Some(last) = self.last_ingested {
            if det.frame <= last {
                return Err(TrackerError::OutOfOrder { last, got: det.frame });
            }
        }
        self.first_frame.get_or_insert(det.frame);
        self.next_to_process.get_or_insert(det.frame);
        self.last_ingested = Some(det.frame);
        let ids = det.mobiles.iter().map(|m| m.id).collect();
        for m in det.mobiles {
            self.tracks.entry(m.id).or_default().insert(
                m.frame,
                TrackPoint {
                    position: m.position.ground(),
                    class: m.class,
                    fathers: m.fathers,
                },
            );
        }
        self.frames.insert(det.frame, ids);
        Ok(())
    }

    /// Feeds frame `t_c` and reports every frame up to `t_c - window` that
    /// became ready.
    pub fn push_frame(&mut self, det: FrameDetections) -> Result<Vec<StepOutput>, TrackerError> {
        let current = det.frame;
        self.ingest(det)?;
        let mut out = Vec::new();
        let window = self.params.window as u64;
        while let Some(f) = self.next_to_process {
            if f.0 + window > current.0 {
                break;
            }
            out.push(self.process(f, f, self.params.window)?);
            self.next_to_process = Some(FrameId(f.0 + 1));
        }
        Ok(out)
    }

    /// Reports the trailing frames still inside the delay window. Their
    /// trajectory window is the last `window` frames of the stream.
    pub fn flush(&mut self) -> Result<Vec<StepOutput>, TrackerError> {
        let (Some(last), Some(first)) = (self.last_ingested, self.first_frame) else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        while let Some(f) = self.next_to_process {
            if f > last {
                break;
            }
            let start = FrameId(last.0.saturating_sub(self.params.window as u64 - 1).max(first.0).min(f.0));
            let len = (last.0 - start.0 + 1) as usize;
            out.push(self.process(f, start, len)?);
            self.next_to_process = Some(FrameId(f.0 + 1));
        }
        Ok(out)
    }

    fn mobiles_at(&self, frame: FrameId) -> Vec<MobileId> {
        self.frames.get(&frame).cloned().unwrap_or_default()
    }

    fn point(&self, id: MobileId, frame: FrameId) -> Option<&TrackPoint> {
        self.tracks.get(&id).and_then(|t| t.get(&frame))
    }

    /// Frame of the node a father link points at: the latest detection of
    /// `father` strictly before `son_frame`.
    fn father_frame(&self, father: MobileId, son_frame: FrameId) -> Option<FrameId> {
        self.tracks
            .get(&father)
            .and_then(|t| t.range(..son_frame).next_back())
            .map(|(f, _)| *f)
    }

    /// Nearest ancestor (not the node itself) that belongs to a group, found by
    /// following links with probability >= `link_threshold` back to
    /// `min_frame`. Ties at the same frame go to the higher path probability,
    /// then the smaller group id.
    fn ancestor_group(&self, id: MobileId, frame: FrameId, min_frame: FrameId) -> Option<GroupId> {
        let mut best: Option<(FrameId, f64, GroupId)> = None;
        let mut seen: HashSet<(FrameId, MobileId)> = HashSet::new();
        let mut stack = vec![(frame, id, 1.0f64)];
        while let Some((f, m, prob)) = stack.pop() {
            let Some(tp) = self.point(m, f) else { continue };
            for link in &tp.fathers {
                if link.probability < self.params.link_threshold {
                    continue;
                }
                let Some(ff) = self.father_frame(link.father, f) else { continue };
                if ff < min_frame || !seen.insert((ff, link.father)) {
                    continue;
                }
                let p = prob * link.probability;
                if let Some(&g) = self.membership.get(&(ff, link.father)) {
                    let better = match best {
                        None => true,
                        Some((bf, bp, bg)) => {
                            ff > bf || (ff == bf && (p > bp || (p == bp && g < bg)))
                        }
                    };
                    if better {
                        best = Some((ff, p, g));
                    }
                    // a nearer grouped ancestor hides the ones behind it
                    continue;
                }
                stack.push((ff, link.father, p));
            }
        }
        best.map(|(_, _, g)| g)
    }

    /// Probable group of mobile `id` detected at `frame`.
    pub fn probable_group(&self, id: MobileId, frame: FrameId) -> Option<GroupId> {
        let min = FrameId(frame.0.saturating_sub(self.params.window as u64));
        self.ancestor_group(id, frame, min)
    }

    fn window_of(&self, id: MobileId, start: FrameId, len: usize) -> Option<WindowTrajectory> {
        let track = self.tracks.get(&id)?;
        let end = FrameId(start.0 + len as u64);
        let obs: Vec<(FrameId, Point2)> = track.range(start..end).map(|(f, p)| (*f, p.position)).collect();
        build_window(id, &obs, start, len, self.frame_rate)
    }

    fn older(&self, a: GroupId, b: GroupId) -> GroupId {
        match (self.groups.get(&a), self.groups.get(&b)) {
            (Some(ga), Some(gb)) => {
                if ga.age_key() <= gb.age_key() {
                    a
                } else {
                    b
                }
            }
            (Some(_), None) => a,
            (None, Some(_)) => b,
            (None, None) => a.min(b),
        }
    }

    fn add_member(&mut self, group: GroupId, mobile: MobileId, frame: FrameId) {
        if let Some(g) = self.groups.get_mut(&group) {
            g.members_by_frame.entry(frame).or_default().insert(mobile);
            if frame > g.last_member_frame {
                g.last_member_frame = frame;
            }
            self.membership.insert((frame, mobile), group);
        }
    }

    /// Associates every cluster with the majority probable group of its
    /// members (ties to the oldest group) and admits members whose own
    /// probable group matches. A member that stays outside its group's main
    /// cluster for `window` frames is no longer admitted.
    pub fn update_groups(&mut self, frame: FrameId, clusters: &[Vec<MobileId>]) -> UpdateOutcome {
        let pg: Vec<Vec<Option<GroupId>>> = clusters
            .iter()
            .map(|c| c.iter().map(|&m| self.probable_group(m, frame)).collect())
            .collect();

        let mut associated: Vec<Option<GroupId>> = Vec::with_capacity(clusters.len());
        for groups in &pg {
            let mut counts: BTreeMap<GroupId, usize> = BTreeMap::new();
            for g in groups.iter().flatten() {
                *counts.entry(*g).or_default() += 1;
            }
            let mut best: Option<(usize, GroupId)> = None;
            for (&g, &n) in &counts {
                best = match best {
                    None => Some((n, g)),
                    Some((bn, bg)) if n > bn || (n == bn && self.older(g, bg) == g) => Some((n, g)),
                    keep => keep,
                };
            }
            associated.push(best.map(|(_, g)| g));
        }

        // candidate admissions per group, tagged with their cluster
        let mut per_group: BTreeMap<GroupId, Vec<(usize, MobileId)>> = BTreeMap::new();
        let mut unassigned: Vec<Vec<MobileId>> = vec![Vec::new(); clusters.len()];
        for (ci, cluster) in clusters.iter().enumerate() {
            for (k, &m) in cluster.iter().enumerate() {
                match (associated[ci], pg[ci][k]) {
                    (Some(g), Some(p)) if g == p => per_group.entry(g).or_default().push((ci, m)),
                    _ => unassigned[ci].push(m),
                }
            }
        }

        let limit = self.params.window as u64;
        let mut admitted = BTreeMap::new();
        for (g, cands) in per_group {
            // main cluster: most admitted members, then smallest member id
            let mut by_cluster: BTreeMap<usize, Vec<MobileId>> = BTreeMap::new();
            for &(ci, m) in &cands {
                by_cluster.entry(ci).or_default().push(m);
            }
            let main = by_cluster
                .iter()
                .max_by(|a, b| {
                    a.1.len()
                        .cmp(&b.1.len())
                        .then_with(|| b.1.iter().min().cmp(&a.1.iter().min()))
                })
                .map(|(ci, _)| *ci);
            let group = self.groups.get_mut(&g).expect("probable groups exist");
            let mut accepted = Vec::new();
            for (ci, m) in cands {
                if Some(ci) == main {
                    group.diverging_since.remove(&m);
                    accepted.push(m);
                    continue;
                }
                let since = *group.diverging_since.entry(m).or_insert(frame);
                if frame.0 - since.0 < limit {
                    accepted.push(m);
                } else {
                    unassigned[ci].push(m);
                }
            }
            for m in accepted {
                self.add_member(g, m, frame);
                admitted.insert(m, g);
            }
        }
        UpdateOutcome { admitted, unassigned }
    }

    /// Group of mobile `id` at `frame` as seen from the window starting at
    /// `origin`: its own membership, or the nearest grouped ancestor.
    fn window_group(&self, id: MobileId, frame: FrameId, origin: FrameId) -> Option<GroupId> {
        if let Some(&g) = self.membership.get(&(frame, id)) {
            return Some(g);
        }
        let min = FrameId(origin.0.saturating_sub(self.params.window as u64));
        self.ancestor_group(id, frame, min)
    }

    fn absorb(&mut self, survivor: GroupId, loser: GroupId) {
        let Some(lost) = self.groups.remove(&loser) else { return };
        for (frame, members) in &lost.members_by_frame {
            for &m in members {
                self.membership.insert((*frame, m), survivor);
            }
        }
        let g = self.groups.get_mut(&survivor).expect("survivor exists");
        for (frame, members) in lost.members_by_frame {
            g.members_by_frame.entry(frame).or_default().extend(members);
        }
        g.last_member_frame = g.last_member_frame.max(lost.last_member_frame);
        for (m, since) in lost.diverging_since {
            g.diverging_since.entry(m).or_insert(since);
        }
    }

    /// Merges two groups when mobiles of each, inside the window
    /// `[origin, origin + len)`, share a son later in the same window.
    pub fn merge_groups(&mut self, origin: FrameId, len: usize) -> Vec<GroupLifecycleEvent> {
        let mut events = Vec::new();
        let end = FrameId(origin.0 + len as u64);
        let sons: Vec<(FrameId, MobileId)> = self
            .frames
            .range(FrameId(origin.0 + 1)..end)
            .flat_map(|(f, ids)| ids.iter().map(move |id| (*f, *id)))
            .collect();
        for (sf, sid) in sons {
            let fathers: Vec<(FrameId, MobileId)> = match self.point(sid, sf) {
                Some(tp) => tp
                    .fathers
                    .iter()
                    .filter(|l| l.probability >= self.params.link_threshold)
                    .filter_map(|l| self.father_frame(l.father, sf).map(|ff| (ff, l.father)))
                    .filter(|(ff, _)| *ff >= origin)
                    .collect(),
                None => continue,
            };
            if fathers.len() < 2 {
                continue;
            }
            let mut involved: Vec<GroupId> = fathers
                .iter()
                .filter_map(|&(ff, fid)| self.window_group(fid, ff, origin))
                .collect();
            involved.sort_unstable();
            involved.dedup();
            while involved.len() >= 2 {
                let (a, b) = (involved[0], involved[1]);
                let survivor = self.older(a, b);
                let loser = if survivor == a { b } else { a };
                self.absorb(survivor, loser);
                events.push(GroupLifecycleEvent {
                    kind: LifecycleKind::Merged,
                    frame: origin,
                    groups: vec![survivor, loser],
                });
                involved.retain(|g| *g != loser);
            }
        }
        events
    }

    fn new_group(&mut self, frame: FrameId, members: &[MobileId]) -> GroupId {
        let id = self.next_id;
        self.next_id += 1;
        self.groups.insert(id, Group::new(id, frame));
        for &m in members {
            self.add_member(id, m, frame);
        }
        id
    }

    /// Registers a group with the given members at `frame`, bypassing the
    /// creation criteria. Used to resume from known state.
    pub fn seed_group(&mut self, frame: FrameId, members: &[MobileId]) -> GroupId {
        self.new_group(frame, members)
    }

    /// Records `mobile` as a member of `group` at `frame`.
    pub fn assign(&mut self, group: GroupId, mobile: MobileId, frame: FrameId) {
        self.add_member(group, mobile, frame);
    }

    fn is_lone_group_candidate(&self, m: MobileId, frame: FrameId, start: FrameId, len: usize) -> bool {
        let Some(track) = self.tracks.get(&m) else { return false };
        if track.get(&frame).map(|p| p.class) != Some(MobileClass::GroupOfPersons) {
            return false;
        }
        let end = FrameId(start.0 + len as u64);
        let stays_group_sized = track
            .range(start..end)
            .all(|(_, p)| p.class == MobileClass::GroupOfPersons);
        if stays_group_sized {
            return true;
        }
        let here = track[&frame].position;
        let radius = self.params.near_fraction * self.bounds.diagonal();
        self.mobiles_at(frame)
            .iter()
            .filter(|&&o| o != m)
            .filter_map(|&o| self.point(o, frame))
            .any(|p| p.position.distance(here) < radius)
    }

    /// Creates groups from the not-yet-grouped members of each cluster: two or
    /// more mobiles, or a lone GROUP_OF_PERSONS mobile, kept when their
    /// incoherence is below the threshold.
    pub fn create_groups(
        &mut self,
        frame: FrameId,
        unassigned: &[Vec<MobileId>],
        windows: &BTreeMap<MobileId, WindowTrajectory>,
        window_start: FrameId,
        window_len: usize,
    ) -> Vec<GroupLifecycleEvent> {
        let mut events = Vec::new();
        for cluster in unassigned {
            let free: Vec<MobileId> = cluster
                .iter()
                .copied()
                .filter(|&m| self.probable_group(m, frame).is_none() && self.group_of(m, frame).is_none())
                .collect();
            let accept = match free.len() {
                0 => false,
                1 => self.is_lone_group_candidate(free[0], frame, window_start, window_len),
                _ => {
                    let trajs: Vec<&WindowTrajectory> = free.iter().filter_map(|m| windows.get(m)).collect();
                    group_incoherence(&trajs, &self.params).value < self.params.incoherence_threshold
                }
            };
            if accept {
                let id = self.new_group(frame, &free);
                events.push(GroupLifecycleEvent {
                    kind: LifecycleKind::Created,
                    frame,
                    groups: vec![id],
                });
            }
        }
        events
    }

    /// Purges membership older than `stale_factor * window` frames and erases
    /// groups with no member since then.
    pub fn terminate_groups(&mut self, frame: FrameId) -> Vec<GroupLifecycleEvent> {
        let stale = self.params.stale_frames();
        let horizon = FrameId(frame.0.saturating_sub(stale));
        let mut events = Vec::new();
        let dead: Vec<GroupId> = self
            .groups
            .values()
            .filter(|g| frame.0 > g.last_member_frame.0 + stale)
            .map(|g| g.id)
            .collect();
        for id in dead {
            self.groups.remove(&id);
            events.push(GroupLifecycleEvent {
                kind: LifecycleKind::Terminated,
                frame,
                groups: vec![id],
            });
        }
        for g in self.groups.values_mut() {
            g.members_by_frame = g.members_by_frame.split_off(&horizon);
        }
        self.membership.retain(|(f, _), g| *f >= horizon && self.groups.contains_key(g));

        // raw detections are needed a further window back for ancestor search
        let keep_from = FrameId(horizon.0.saturating_sub(self.params.window as u64));
        self.frames = self.frames.split_off(&keep_from);
        self.tracks.retain(|_, t| {
            *t = t.split_off(&keep_from);
            !t.is_empty()
        });
        let alive: HashSet<MobileId> = self.tracks.keys().copied().collect();
        for g in self.groups.values_mut() {
            g.diverging_since.retain(|m, _| alive.contains(m));
        }
        events
    }

    fn split_events(&self, frame: FrameId) -> Vec<GroupLifecycleEvent> {
        let alive: HashSet<MobileId> = self.mobiles_at(frame).into_iter().collect();
        let mut out = Vec::new();
        for g in self.groups.values() {
            let Some(now) = g.members_by_frame.get(&frame) else { continue };
            let Some((_, before)) = g.members_by_frame.range(..frame).next_back() else { continue };
            let left = before
                .iter()
                .any(|m| !now.contains(m) && alive.contains(m) && self.group_of(*m, frame) != Some(g.id));
            if left {
                out.push(GroupLifecycleEvent {
                    kind: LifecycleKind::Split,
                    frame,
                    groups: vec![g.id],
                });
            }
        }
        out
    }

    /// One tracking step for delayed frame `frame` using the trajectory window
    /// `[start, start + len)`.
    fn process(&mut self, frame: FrameId, start: FrameId, len: usize) -> Result<StepOutput, TrackerError> {
        let mobiles = self.mobiles_at(frame);
        let mut windows: BTreeMap<MobileId, WindowTrajectory> = BTreeMap::new();
        for &m in &mobiles {
            if let Some(w) = self.window_of(m, start, len) {
                windows.insert(m, w);
            }
        }

        let mut clusters: Vec<Vec<MobileId>> = Vec::new();
        if !windows.is_empty() {
            let points: Vec<FeaturePoint> = windows
                .values()
                .map(|w| normalize(w, &self.bounds, self.params.max_speed))
                .collect();
            clusters.extend(
                mean_shift(&points, self.params.tolerance)?
                    .into_iter()
                    .map(|c| c.members),
            );
        }
        // mobiles without a usable window still get a chance to stay in
        // their group
        clusters.extend(mobiles.iter().filter(|m| !windows.contains_key(m)).map(|&m| vec![m]));

        let outcome = self.update_groups(frame, &clusters);
        let merge_len = (start.0 + len as u64).saturating_sub(frame.0) as usize;
        let mut events = self.merge_groups(frame, merge_len);
        events.extend(self.create_groups(frame, &outcome.unassigned, &windows, start, len));
        let mut split = self.split_events(frame);
        split.extend(events);
        let mut events = split;
        events.extend(self.terminate_groups(frame));

        let mut snapshots = Vec::new();
        let params = self.params.clone();
        for g in self.groups.values_mut() {
            let Some(members) = g.members_by_frame.get(&frame) else { continue };
            let trajs: Vec<&WindowTrajectory> = members.iter().filter_map(|m| windows.get(m)).collect();
            let inc = group_incoherence(&trajs, &params);
            g.stats.add(&inc);
            snapshots.push(GroupSnapshot {
                frame,
                group_id: g.id,
                members: members.clone(),
                incoherence: inc,
            });
        }
        Ok(StepOutput {
            frame,
            snapshots,
            events,
        })
    }
}
