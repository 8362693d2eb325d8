//! Tracking quality against reference groups.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::scene::{FrameId, GroundTruthGroup, GroupRecord, MobileId};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("jaccard threshold must be in (0, 1], got {0}")]
pub struct MatchConfigError(pub f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub jaccard_threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { jaccard_threshold: 0.5 }
    }
}

impl MatchConfig {
    pub fn new(jaccard_threshold: f64) -> Result<Self, MatchConfigError> {
        if jaccard_threshold > 0.0 && jaccard_threshold <= 1.0 {
            Ok(Self { jaccard_threshold })
        } else {
            Err(MatchConfigError(jaccard_threshold))
        }
    }
}

pub fn jaccard(a: &BTreeSet<MobileId>, b: &BTreeSet<MobileId>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// One accepted (tracked, reference) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub frame: FrameId,
    pub tracked: u64,
    pub gt: u64,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matching {
    pub pairs: Vec<MatchPair>,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    /// Frames in which each reference group exists.
    pub gt_frames: BTreeMap<u64, u64>,
}

/// Greedy one-to-one matching per frame, highest Jaccard first (ties by
/// tracked id, then reference id). Only frames in `frames` are scored.
pub fn match_frames(
    tracked: &[GroupRecord],
    gt: &[GroundTruthGroup],
    cfg: &MatchConfig,
    frames: Option<(FrameId, FrameId)>,
) -> Matching {
    let in_range = |f: FrameId| frames.is_none_or(|(a, b)| a <= f && f <= b);
    let mut by_frame: BTreeMap<FrameId, (Vec<(u64, &BTreeSet<MobileId>)>, Vec<(u64, &BTreeSet<MobileId>)>)> =
        BTreeMap::new();
    for r in tracked.iter().filter(|r| in_range(r.frame)) {
        by_frame.entry(r.frame).or_default().0.push((r.group_id, &r.members));
    }
    let mut m = Matching::default();
    for g in gt {
        for (f, members) in g.members.iter().filter(|(f, _)| in_range(**f)) {
            by_frame.entry(*f).or_default().1.push((g.gt_id, members));
            *m.gt_frames.entry(g.gt_id).or_default() += 1;
        }
    }
    for (frame, (ts, gs)) in by_frame {
        let mut candidates = Vec::new();
        for (t, tm) in &ts {
            for (g, gm) in &gs {
                let j = jaccard(tm, gm);
                if j >= cfg.jaccard_threshold {
                    candidates.push((j, *t, *g, *tm, *gm));
                }
            }
        }
        // ties go by member content, so renaming groups never changes the matching
        candidates.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| a.3.cmp(b.3))
                .then_with(|| a.4.cmp(b.4))
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut used_t = BTreeSet::new();
        let mut used_g = BTreeSet::new();
        for (j, t, g, _, _) in candidates {
            if used_t.contains(&t) || used_g.contains(&g) {
                continue;
            }
            used_t.insert(t);
            used_g.insert(g);
            m.pairs.push(MatchPair {
                frame,
                tracked: t,
                gt: g,
                jaccard: j,
            });
        }
        m.tp += used_t.len() as u64;
        m.fp += (ts.len() - used_t.len()) as u64;
        m.fn_ += (gs.len() - used_g.len()) as u64;
    }
    m
}

/// Precision and sensitivity; each is 1 when its denominator is 0.
pub fn precision_sensitivity(tp: u64, fp: u64, fn_: u64) -> (f64, f64) {
    let ratio = |d: u64| if d == 0 { 1.0 } else { tp as f64 / d as f64 };
    (ratio(tp + fp), ratio(tp + fn_))
}

fn reciprocal_mean(ids: &BTreeMap<u64, BTreeSet<u64>>) -> Option<f64> {
    if ids.is_empty() {
        return None;
    }
    Some(ids.values().map(|s| 1.0 / s.len() as f64).sum::<f64>() / ids.len() as f64)
}

/// Mean over matched reference groups of 1 / (distinct tracked ids matched to
/// it). `None` when nothing matched.
pub fn fragmentation(m: &Matching) -> Option<f64> {
    let mut ids: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for p in &m.pairs {
        ids.entry(p.gt).or_default().insert(p.tracked);
    }
    reciprocal_mean(&ids)
}

/// Mean over matched tracked groups of 1 / (distinct reference ids matched
/// to it). `None` when nothing matched.
pub fn purity(m: &Matching) -> Option<f64> {
    let mut ids: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for p in &m.pairs {
        ids.entry(p.tracked).or_default().insert(p.gt);
    }
    reciprocal_mean(&ids)
}

/// Mean over reference groups of matched frames / frames present. 1 when
/// there is no reference group.
pub fn tracking_time(m: &Matching) -> f64 {
    if m.gt_frames.is_empty() {
        return 1.0;
    }
    let mut matched: BTreeMap<u64, u64> = BTreeMap::new();
    for p in &m.pairs {
        *matched.entry(p.gt).or_default() += 1;
    }
    m.gt_frames
        .iter()
        .map(|(g, n)| matched.get(g).copied().unwrap_or(0) as f64 / *n as f64)
        .sum::<f64>()
        / m.gt_frames.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub precision: f64,
    pub sensitivity: f64,
    pub fragmentation: Option<f64>,
    pub tracking_time: f64,
    pub purity: Option<f64>,
}

impl MetricsReport {
    pub fn from_matching(m: &Matching) -> Self {
        let (precision, sensitivity) = precision_sensitivity(m.tp, m.fp, m.fn_);
        Self {
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
            precision,
            sensitivity,
            fragmentation: fragmentation(m),
            tracking_time: tracking_time(m),
            purity: purity(m),
        }
    }

    pub const CSV_HEADER: &'static str = "tp,fp,fn,precision,sensitivity,fragmentation,tracking_time,purity";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.4}"));
        format!(
            "{},{},{},{:.4},{:.4},{},{:.4},{}",
            self.tp,
            self.fp,
            self.fn_,
            self.precision,
            self.sensitivity,
            opt(self.fragmentation),
            self.tracking_time,
            opt(self.purity)
        )
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
        writeln!(f, "{:<14}{:>8}", "TP", self.tp)?;
        writeln!(f, "{:<14}{:>8}", "FP", self.fp)?;
        writeln!(f, "{:<14}{:>8}", "FN", self.fn_)?;
        writeln!(f, "{:<14}{:>8.2}", "precision", self.precision)?;
        writeln!(f, "{:<14}{:>8.2}", "sensitivity", self.sensitivity)?;
        writeln!(f, "{:<14}{:>8}", "fragmentation", opt(self.fragmentation))?;
        writeln!(f, "{:<14}{:>8.2}", "tracking time", self.tracking_time)?;
        write!(f, "{:<14}{:>8}", "purity", opt(self.purity))
    }
}

/// Scores `tracked` over the frames it covers: reference frames after the
/// last reported frame are left out, since the tracker reports with a delay.
pub fn evaluate(tracked: &[GroupRecord], gt: &[GroundTruthGroup], cfg: &MatchConfig) -> MetricsReport {
    evaluate_until(tracked, gt, cfg, tracked.iter().map(|r| r.frame).max())
}

/// Scores frames up to `last` (all frames when `None`).
pub fn evaluate_until(
    tracked: &[GroupRecord],
    gt: &[GroundTruthGroup],
    cfg: &MatchConfig,
    last: Option<FrameId>,
) -> MetricsReport {
    let range = last.map(|l| (FrameId(0), l));
    MetricsReport::from_matching(&match_frames(tracked, gt, cfg, range))
}
