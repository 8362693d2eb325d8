//! Group tracking and scenario recognition over per-frame object detections.

pub mod classifier;
pub mod dsl;
pub mod engine;
pub mod eval;
pub mod meanshift;
pub mod pipeline;
pub mod scene;
pub mod synth;
pub mod tracker;

pub use scene::*;
