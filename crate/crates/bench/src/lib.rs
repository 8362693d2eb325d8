//! Fixtures shared by the benchmarks under `benches/`.

use groupscope::dsl::{exemplar, prelude, Ontology};
use groupscope::meanshift::FeaturePoint;
use groupscope::synth::{generate, Scenario, SynthConfig, SynthOutput};

/// A synthetic scene of `frames` frames.
pub fn scene(scenario: Scenario, frames: u64) -> SynthOutput {
    generate(&SynthConfig {
        scenario,
        frames: Some(frames),
        ..SynthConfig::default()
    })
}

pub fn ontology() -> Ontology {
    prelude().overlay(&exemplar())
}

/// `n` points in the unit cube of `dim` dimensions, on a fixed lattice walk.
pub fn points(n: usize, dim: usize) -> Vec<FeaturePoint> {
    (0..n)
        .map(|i| {
            let coords = (0..dim)
                .map(|d| ((i * 7919 + d * 104_729) % 1000) as f64 / 1000.0)
                .collect();
            FeaturePoint::new(i as u64 + 1, coords)
        })
        .collect()
}
