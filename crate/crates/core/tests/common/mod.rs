#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, FileFailurePersistence, RngSeed};
use spin_snr_core::{BlochState, RelaxationPair};

/// Seeded runner: the same cases on every run.
pub fn seeded(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed_b10c),
        failure_persistence: Some(Box::new(FileFailurePersistence::Off)),
        ..Config::default()
    }
}

pub const REFERENCE_PAIRS: [(f64, f64); 3] = [(1.9, 0.5), (1.8, 1.0), (1.69, 1.5)];

/// Physically admissible `(Γ, γ)`: `2Γ ≥ γ`.
pub fn admissible_pair() -> impl Strategy<Value = RelaxationPair> {
    (0.05f64..3.0, 1e-3f64..5.0).prop_map(|(g1, extra)| RelaxationPair::new(0.5 * g1 + extra, g1).unwrap())
}

/// Pairs with a magic plane inside the disk (`Γ > 3γ/2`).
pub fn magic_pair() -> impl Strategy<Value = RelaxationPair> {
    (0.05f64..3.0, 1e-2f64..4.0).prop_map(|(g1, extra)| RelaxationPair::new(1.5 * g1 + extra, g1).unwrap())
}

/// Points of the open half-disk `y > 0`, `r < r_max`.
pub fn half_disk_point(r_max: f64) -> impl Strategy<Value = BlochState> {
    (1e-3f64..r_max, -1.5f64..1.5).prop_map(|(r, theta)| BlochState::from_polar(r, theta))
}

/// Anywhere in the open disk.
pub fn disk_point(r_max: f64) -> impl Strategy<Value = BlochState> {
    (0.0f64..r_max, -std::f64::consts::PI..std::f64::consts::PI).prop_map(|(r, t)| BlochState::from_polar(r, t))
}
