use thiserror::Error;

use crate::meanshift::DEFAULT_TOLERANCE;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid tracker parameter {name}: {reason}")]
pub struct ParamError {
    pub name: &'static str,
    pub reason: String,
}

/// Tunables of the group tracker. Defaults are the values used in the
/// published experiments where one exists.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerParams {
    /// Window length and output delay, in frames.
    pub window: usize,
    /// Mean-Shift neighborhood radius in normalized feature space.
    pub tolerance: f64,
    /// Minimum father/son link probability to follow a link.
    pub link_threshold: f64,
    /// Speed normalization ceiling, m/s.
    pub max_speed: f64,
    pub w_dist: f64,
    pub w_speed: f64,
    pub w_dir: f64,
    /// A candidate group is kept only when its incoherence is below this.
    pub incoherence_threshold: f64,
    /// Groups without members for `stale_factor * window` frames are erased.
    pub stale_factor: usize,
    /// Below this speed (m/s) a member contributes no heading.
    pub stationary_speed: f64,
    /// "Close to other objects" radius for lone GROUP_OF_PERSONS creation, as
    /// a fraction of the ground-bounds diagonal.
    pub near_fraction: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            window: 20,
            tolerance: DEFAULT_TOLERANCE,
            link_threshold: 0.6,
            max_speed: 10.0,
            w_dist: 7.0,
            w_speed: 5.0,
            w_dir: 5.0,
            incoherence_threshold: 15.0,
            stale_factor: 5,
            stationary_speed: 0.05,
            near_fraction: 0.1,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let err = |name, reason: &str| {
            Err(ParamError {
                name,
                reason: reason.to_string(),
            })
        };
        if self.window < 2 {
            return err("window", "must be >= 2");
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return err("tolerance", "must be > 0");
        }
        if !(self.link_threshold > 0.0 && self.link_threshold <= 1.0) {
            return err("link_threshold", "must lie in (0, 1]");
        }
        if !(self.max_speed > 0.0 && self.max_speed.is_finite()) {
            return err("max_speed", "must be > 0");
        }
        for (name, w) in [("w_dist", self.w_dist), ("w_speed", self.w_speed), ("w_dir", self.w_dir)] {
            if !(w >= 0.0 && w.is_finite()) {
                return err(name, "must be >= 0");
            }
        }
        if !(self.incoherence_threshold > 0.0) {
            return err("incoherence_threshold", "must be > 0");
        }
        if self.stale_factor < 1 {
            return err("stale_factor", "must be >= 1");
        }
        if !(self.stationary_speed >= 0.0) {
            return err("stationary_speed", "must be >= 0");
        }
        if !(self.near_fraction >= 0.0) {
            return err("near_fraction", "must be >= 0");
        }
        Ok(())
    }

    /// Feature dimension for a window of `len` frames: 2(2·len − 1).
    pub fn feature_dim(len: usize) -> usize {
        2 * (2 * len - 1)
    }

    pub fn stale_frames(&self) -> u64 {
        (self.stale_factor * self.window) as u64
    }
}
