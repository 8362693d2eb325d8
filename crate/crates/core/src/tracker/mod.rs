//! Group tracking over a sliding window of individual trajectories.

mod incoherence;
mod lifecycle;
mod params;
mod state;
mod window;

pub use incoherence::{circular_std, group_incoherence, Incoherence};
pub use lifecycle::{parse_lifecycle, write_lifecycle, GroupId, GroupLifecycleEvent, LifecycleKind};
pub use params::{ParamError, TrackerParams};
pub use state::{Group, GroupSnapshot, GroupStats, GroupTracker, StepOutput, TrackerError, UpdateOutcome};
pub use window::{build_window, normalize, WindowTrajectory};

#[cfg(test)]
mod tests;
