//! Shared fixtures for the benchmarks.

use clickdyn::Params;

/// Double-well configuration used across the benchmarks.
pub fn double_well() -> Params {
    Params::new(1.5, 1.0)
}
