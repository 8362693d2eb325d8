//! Per-track trajectory over the tracking window and its normalized feature.

use crate::meanshift::FeaturePoint;
use crate::scene::{FrameId, GroundBounds, MobileId, Point2};

/// Positions and speeds of one track over `len` consecutive frames.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTrajectory {
    pub owner: MobileId,
    pub start: FrameId,
    pub positions: Vec<Point2>,
    /// `speeds[i] = (positions[i + 1] - positions[i]) * frame_rate`, m/s.
    pub speeds: Vec<Point2>,
    /// True where the position comes from a real detection.
    pub observed_mask: Vec<bool>,
}

impl WindowTrajectory {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn speed_magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.speeds.iter().map(|s| s.x.hypot(s.y))
    }
}

/// Builds the window `[start, start + len)` from a track's observations.
///
/// Missing frames between two observations are linearly interpolated. Frames
/// before the first or after the last observation repeat the nearest
/// observation and stay unmarked in `observed_mask`. Returns `None` when fewer
/// than two observations fall inside the window.
pub fn build_window(
    owner: MobileId,
    observations: &[(FrameId, Point2)],
    start: FrameId,
    len: usize,
    frame_rate: f64,
) -> Option<WindowTrajectory> {
    let end = start.0 + len as u64;
    let mut obs: Vec<(usize, Point2)> = observations
        .iter()
        .filter(|(f, _)| f.0 >= start.0 && f.0 < end)
        .map(|(f, p)| ((f.0 - start.0) as usize, *p))
        .collect();
    obs.sort_by_key(|(i, _)| *i);
    obs.dedup_by_key(|(i, _)| *i);
    if obs.len() < 2 {
        return None;
    }

    let mut positions = Vec::with_capacity(len);
    let mut mask = vec![false; len];
    let mut next = 0usize;
    for i in 0..len {
        while next < obs.len() && obs[next].0 < i {
            next += 1;
        }
        let p = if next < obs.len() && obs[next].0 == i {
            mask[i] = true;
            obs[next].1
        } else if next == 0 {
            obs[0].1
        } else if next == obs.len() {
            obs[obs.len() - 1].1
        } else {
            let (i0, p0) = obs[next - 1];
            let (i1, p1) = obs[next];
            p0.lerp(p1, (i - i0) as f64 / (i1 - i0) as f64)
        };
        positions.push(p);
    }
    let speeds = positions
        .windows(2)
        .map(|w| Point2::new((w[1].x - w[0].x) * frame_rate, (w[1].y - w[0].y) * frame_rate))
        .collect();
    Some(WindowTrajectory {
        owner,
        start,
        positions,
        speeds,
        observed_mask: mask,
    })
}

fn unit(v: f64, min: f64, max: f64) -> f64 {
    ((v - min) / (max - min)).clamp(0.0, 1.0)
}

/// Maps a window to a point of dimension 2(2·len − 1) in `[0, 1]`.
///
/// Layout: `x0, y0, ..., x_{T-1}, y_{T-1}` followed by the speed components.
/// Positions are scaled by the ground bounds. Each speed vector is first
/// clamped to `max_speed` in magnitude, then every component is mapped by its
/// absolute value onto `[0, max_speed]`.
pub fn normalize(w: &WindowTrajectory, bounds: &GroundBounds, max_speed: f64) -> FeaturePoint {
    let mut coords = Vec::with_capacity(2 * w.positions.len() + 2 * w.speeds.len());
    for p in &w.positions {
        coords.push(unit(p.x, bounds.min.x, bounds.max.x));
        coords.push(unit(p.y, bounds.min.y, bounds.max.y));
    }
    for s in &w.speeds {
        let mag = s.x.hypot(s.y);
        let scale = if mag > max_speed { max_speed / mag } else { 1.0 };
        coords.push(unit((s.x * scale).abs(), 0.0, max_speed));
        coords.push(unit((s.y * scale).abs(), 0.0, max_speed));
    }
    FeaturePoint::new(w.owner, coords)
}
