//! Fixtures shared by the benchmarks.

use lensjet_core::{BoundaryDistanceDataset, StripMetric, WarpFunction};

pub fn exp_strip() -> StripMetric {
    StripMetric::new(WarpFunction::exp_decay(1.0, 1.0).expect("valid warp"))
}

/// The standard recovery window at `x0 = 0`.
pub fn exp_window() -> BoundaryDistanceDataset {
    BoundaryDistanceDataset::oracle_with_window(exp_strip(), 0.0, 0.05)
}
