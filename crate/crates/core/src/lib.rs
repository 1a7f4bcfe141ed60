//! Numerical tools for warped strips `f(y) dx^2 + dy^2`: geodesics and lens
//! data, equimeasurable rearrangements, localized boundary distance data and
//! recovery of boundary jets from it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod descriptor;
pub mod equimeasurable;
pub mod error;
pub mod geodesic;
pub mod interp;
pub mod jet;
pub mod lens;
pub mod ode;
pub mod quad;
pub mod series;
pub mod warp;

pub use boundary::{BoundaryDistanceDataset, FdPolicy, Verdict};
pub use descriptor::WarpDescriptor;
pub use error::{Error, Result};
pub use geodesic::{Chord, ExitEvent, GeodesicState};
pub use jet::{JetOrder, JetReport, TwoPointNormalData};
pub use lens::{LensDiscrepancy, LensMethod, LensRecord, LensTable};
pub use warp::{JetComparison, JetVector, Side, StripMetric, WarpFunction};
