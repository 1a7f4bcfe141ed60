//! A lens-equivalent pair on the strip of width 14: a profile `f1` with an
//! affine start and a flat peak, and its rearrangement `f2` whose superlevel
//! sets are centred intervals of the same widths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lens::{
    build_lens_table, chebyshev_grid, compare_lens, equimeasurable_check, LensDiscrepancy,
    LensMethod,
};
use crate::series::Real;
use crate::warp::{jet_compare, AnalyticProfile, JetComparison, Side, StripMetric, WarpFunction};

/// Width of the strip carrying the pair.
pub const STRIP_WIDTH: f64 = 14.0;

/// Samples of `[0, 3]` used for `f2` unless asked otherwise.
pub const DEFAULT_F2_SAMPLES: usize = 2048;

/// Parameters of `f1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section5Params {
    /// Where the descent starts blending into the plateau; values below 4
    /// break the symmetry about 3 and are rejected by [`build_f1`].
    pub blend_start: f64,
}

impl Default for Section5Params {
    fn default() -> Self {
        Section5Params { blend_start: 4.0 }
    }
}

fn sigma<T: Real>(t: &T) -> T {
    if t.value() <= 0.0 {
        t.lift(0.0)
    } else {
        (-t.recip()).exp()
    }
}

/// Smooth step, 0 for `t <= 0`, 1 for `t >= 1`.
fn smooth_step<T: Real>(t: T) -> T {
    if t.value() <= 0.0 {
        return t.lift(0.0);
    }
    if t.value() >= 1.0 {
        return t.lift(1.0);
    }
    let a = sigma(&t);
    let b = sigma(&t.rsub(1.0));
    a.clone() / (a + b)
}

impl Section5Params {
    /// Value at the peak `x = 3`.
    pub fn peak(&self) -> f64 {
        4.0
    }

    /// Rising branch on `[0, 3]`: `1 + x` blended into a flat top.
    fn rise<T: Real>(x: T) -> T {
        if x.value() <= 1.0 {
            return x + 1.0;
        }
        let s = smooth_step((x.clone() - 1.0) * 0.5);
        x.clone() + 1.0 + s * x.rsub(3.0)
    }

    pub fn eval<T: Real>(&self, x: T) -> T {
        let v = x.value();
        if v > 7.0 {
            return self.eval(x.rsub(STRIP_WIDTH));
        }
        if v <= 3.0 {
            return Self::rise(x);
        }
        if v > 6.0 {
            return x.lift(1.0);
        }
        let b = self.blend_start;
        let a = Self::rise(x.rsub(6.0)) - 1.0;
        let beta = smooth_step((x - b) * (1.0 / (6.0 - b)));
        beta.rsub(1.0) * a + 1.0
    }

    /// Formula joins, including the mirrored ones.
    pub fn breakpoints(&self) -> Vec<f64> {
        let b = self.blend_start;
        let mut v = vec![
            0.0,
            1.0,
            3.0,
            b,
            6.0,
            7.0,
            8.0,
            STRIP_WIDTH - b,
            11.0,
            13.0,
            STRIP_WIDTH,
        ];
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// `f1` together with its parameters.
#[derive(Debug, Clone)]
pub struct Section5Profile {
    pub params: Section5Params,
    pub warp: WarpFunction,
}

impl Section5Profile {
    pub fn peak(&self) -> f64 {
        self.params.peak()
    }

    fn f(&self, x: f64) -> f64 {
        self.params.eval(x)
    }

    fn slope(&self, x: f64) -> f64 {
        self.warp.value_slope(x).1
    }
}

fn violation(clause: &str, detail: String) -> Error {
    Error::ConstraintViolation(format!("{clause}: {detail}"))
}

/// Sample points of `[a, b]`, endpoints included.
fn samples(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |i| a + (b - a) * i as f64 / n as f64)
}

fn check_constraints(p: &Section5Profile) -> Result<()> {
    let n = 2000;
    let peak = p.peak();
    for x in samples(0.0, 1.0, n) {
        let g = (p.f(x) - (x + 1.0)).abs();
        if g > 1e-12 {
            return Err(violation(
                "f(x) = x + 1 on [0, 1]",
                format!("gap {g:e} at {x}"),
            ));
        }
    }
    // strictness is checked where f is distinguishable from its flat values
    for x in samples(1.0, 3.0, n).take(n) {
        let (v, d) = (p.f(x), p.slope(x));
        if d < 0.0 || (d == 0.0 && v < peak) {
            return Err(violation("f' > 0 on [1, 3)", format!("f'({x}) = {d:e}")));
        }
    }
    if p.slope(3.0).abs() > 1e-12 {
        return Err(violation(
            "f'(3) = 0",
            format!("f'(3) = {:e}", p.slope(3.0)),
        ));
    }
    for t in samples(0.0, 1.0, n) {
        let g = (p.f(3.0 + t) - p.f(3.0 - t)).abs();
        if g > 1e-12 {
            return Err(violation(
                "f(3 + t) = f(3 - t) on [0, 1]",
                format!("gap {g:e} at t = {t}"),
            ));
        }
    }
    for x in samples(3.0, 6.0, n).skip(1).take(n - 1) {
        let (v, d) = (p.f(x), p.slope(x));
        if d > 0.0 || (d == 0.0 && v > 1.0 && v < peak) {
            return Err(violation("f' < 0 on (3, 6)", format!("f'({x}) = {d:e}")));
        }
    }
    for x in samples(6.0, 7.0, n) {
        if p.f(x) != 1.0 {
            return Err(violation("f = 1 on [6, 7]", format!("f({x}) = {}", p.f(x))));
        }
    }
    for t in samples(0.0, 7.0, n) {
        let g = (p.f(7.0 + t) - p.f(7.0 - t)).abs();
        if g > 1e-12 {
            return Err(violation(
                "f(7 + t) = f(7 - t) on [0, 7]",
                format!("gap {g:e} at t = {t}"),
            ));
        }
    }
    Ok(())
}

/// Build `f1` and check every clause of its constraint list.
pub fn build_f1(params: Section5Params) -> Result<Section5Profile> {
    if !(params.blend_start > 3.0 && params.blend_start < 6.0) {
        return Err(violation(
            "descent blend",
            format!("blend start {} outside (3, 6)", params.blend_start),
        ));
    }
    let warp = WarpFunction::analytic("sec5-f1", STRIP_WIDTH, AnalyticProfile::Section5(params))?;
    let p = Section5Profile { params, warp };
    check_constraints(&p)?;
    Ok(p)
}

/// Bisect a monotone predicate: returns the switch point in `[lo, hi]`
/// where `keep_lo(x)` stops holding.
fn bisect(mut lo: f64, mut hi: f64, keep_lo: impl Fn(f64) -> bool) -> f64 {
    loop {
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi || hi - lo <= 1e-15 {
            return 0.5 * (lo + hi);
        }
        if keep_lo(m) {
            lo = m;
        } else {
            hi = m;
        }
    }
}

/// Width of `{x in [0, 6] : f1(x) >= y}` for `1 <= y <= peak`.
pub fn layer_width(p: &Section5Profile, y: f64) -> Result<f64> {
    let peak = p.peak();
    if !(1.0..=peak).contains(&y) {
        return Err(Error::InvalidInput(format!(
            "level {y} outside [1, {peak}]"
        )));
    }
    if y == peak {
        return Ok(0.0);
    }
    let l = if p.f(0.0) >= y {
        0.0
    } else {
        bisect(0.0, 3.0, |x| p.f(x) < y)
    };
    let r = if p.f(6.0) >= y {
        6.0
    } else {
        bisect(3.0, 6.0, |x| p.f(x) >= y)
    };
    Ok(r - l)
}

/// Rearranged profile `f2`, sampled at `n_samples + 1` points of `[0, 3]`
/// and extended by the reflections about 3 and 7.
pub fn build_f2(p: &Section5Profile, n_samples: usize) -> Result<WarpFunction> {
    if n_samples < 256 {
        return Err(Error::InvalidInput(format!(
            "need at least 256 samples, got {n_samples}"
        )));
    }
    let peak = p.peak();
    let n = n_samples;
    let xs: Vec<f64> = (0..=n).map(|i| 3.0 * i as f64 / n as f64).collect();
    let ys: Vec<f64> = xs
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            if i == 0 {
                return 1.0;
            }
            if i == n {
                return peak;
            }
            let target = 6.0 - 2.0 * x;
            bisect(1.0, peak, |y| {
                layer_width(p, y).is_ok_and(|h| h > target)
            })
        })
        .collect();
    if let Some(i) = ys.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::RootFinding(format!(
            "rearranged profile decreases near x = {} (layer widths not monotone)",
            xs[i]
        )));
    }
    let mut half: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    half.extend(xs.iter().zip(&ys).rev().skip(1).map(|(x, y)| (6.0 - x, *y)));
    let m = (n / 3).max(4);
    half.extend((1..=m).map(|j| (6.0 + j as f64 / m as f64, 1.0)));
    let mut pts = half.clone();
    pts.extend(
        half.iter()
            .rev()
            .skip(1)
            .map(|(x, y)| (STRIP_WIDTH - x, *y)),
    );
    // exact endpoint
    if let Some(last) = pts.last_mut() {
        last.0 = STRIP_WIDTH;
    }
    WarpFunction::sampled("sec5-f2", STRIP_WIDTH, &pts)
}

/// Three-point one-sided difference at `y = 0`.
pub fn one_sided_slope(w: &WarpFunction, h: f64) -> f64 {
    (-3.0 * w.value(0.0) + 4.0 * w.value(h) - w.value(2.0 * h)) / (2.0 * h)
}

/// Settings for [`verify_section5`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub levels: usize,
    pub directions: usize,
    pub fd_step: f64,
    pub equimeasure_tol: f64,
    pub lens_tol: f64,
    pub slope_tol_f1: f64,
    pub slope_tol_f2: f64,
    pub jet_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            levels: 256,
            directions: 51,
            fd_step: 1e-3,
            equimeasure_tol: 1e-6,
            lens_tol: 1e-6,
            slope_tol_f1: 1e-6,
            slope_tol_f2: 1e-4,
            jet_tol: 1e-4,
        }
    }
}

/// Verification of the pair; failures are carried, not raised.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Section5Report {
    pub peak: f64,
    pub equimeasure_gap: f64,
    pub equimeasure_worst_level: f64,
    pub levels: usize,
    pub f1_slope_at_0: f64,
    pub f2_slope_at_0: f64,
    pub lens: Option<LensDiscrepancy>,
    pub lens_error: Option<String>,
    pub directions: usize,
    /// First order at which the boundary jets at `y = 0` differ.
    pub jet_first_difference: Option<usize>,
    pub jet_f1: Vec<f64>,
    pub jet_f2: Vec<f64>,
    pub equimeasure_ok: bool,
    pub f1_slope_ok: bool,
    pub f2_slope_ok: bool,
    pub lens_ok: bool,
    pub jets_differ_at_order_1: bool,
    pub passed: bool,
}

pub fn verify_section5(
    p: &Section5Profile,
    f2: &WarpFunction,
    opts: &VerifyOptions,
) -> Result<Section5Report> {
    let eq = equimeasurable_check(&p.warp, f2, opts.levels, opts.equimeasure_tol)?;
    let s1 = one_sided_slope(&p.warp, opts.fd_step);
    let s2 = one_sided_slope(f2, opts.fd_step);
    let grid = chebyshev_grid(opts.directions, 0.99);
    let m1 = StripMetric::new(p.warp.clone());
    let m2 = StripMetric::new(f2.clone());
    let lens = build_lens_table(&m1, &grid, LensMethod::Quadrature)
        .and_then(|a| Ok((a, build_lens_table(&m2, &grid, LensMethod::Quadrature)?)))
        .and_then(|(a, b)| compare_lens(&a, &b));
    let j1 = m1.ground_truth_jet(Side::Bottom, 2)?;
    let j2 = m2.ground_truth_jet(Side::Bottom, 2)?;
    let first = match jet_compare(&j1, &j2, opts.jet_tol)? {
        JetComparison::FirstDifference(k) => Some(k),
        JetComparison::Equal => None,
    };
    let f1_slope_ok = (s1 - 1.0).abs() <= opts.slope_tol_f1;
    let f2_slope_ok = s2.abs() <= opts.slope_tol_f2;
    let lens_ok = lens.as_ref().is_ok_and(|d| d.max() <= opts.lens_tol);
    let jets_differ_at_order_1 = first == Some(1);
    Ok(Section5Report {
        peak: p.peak(),
        equimeasure_gap: eq.max_gap,
        equimeasure_worst_level: eq.worst_level,
        levels: eq.levels,
        f1_slope_at_0: s1,
        f2_slope_at_0: s2,
        lens: lens.as_ref().ok().copied(),
        lens_error: lens.as_ref().err().map(|e| e.to_string()),
        directions: grid.len(),
        jet_first_difference: first,
        jet_f1: j1.values,
        jet_f2: j2.values,
        equimeasure_ok: eq.pass,
        f1_slope_ok,
        f2_slope_ok,
        lens_ok,
        jets_differ_at_order_1,
        passed: eq.pass && f1_slope_ok && f2_slope_ok && lens_ok && jets_differ_at_order_1,
    })
}
