//! Shared fixtures for the benchmarks.

use tvstokes_core::io::{add_noise, synth, SyntheticKind, SyntheticSpec};
use tvstokes_core::{ScalarField, Shape};

/// Four-level staircase of the given size with `sigma = 0.1` noise, seed 7.
pub fn noisy_staircase(side: usize) -> ScalarField {
    let spec = SyntheticSpec {
        kind: SyntheticKind::Staircase,
        shape: Shape::new(side, side),
        levels: 4,
    };
    add_noise(&synth(&spec).expect("valid spec"), 0.1, 7).expect("valid sigma")
}
