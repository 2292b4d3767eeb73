//! Shared fixtures for the benchmarks.

use selroute::{NetworkConfig, SelectionRegion};

/// Baseline network (λ = 1, α = 3, β = 10 dB) at transmit probability `p`.
pub fn baseline(p: f64) -> NetworkConfig {
    NetworkConfig::baseline(p).expect("baseline parameters are valid")
}

/// A representative selection region (`φ = π/3`, `r_m = 0.3`).
pub fn reference_region() -> SelectionRegion {
    SelectionRegion::new(std::f64::consts::PI / 3.0, 0.3).expect("valid region")
}
