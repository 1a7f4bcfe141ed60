//! Lens data of strips and the sublevel-measure machinery behind lens
//! equivalence of equimeasurable warps.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{
    chord_same_side, crossing_integrals_for, default_ode_options, integrate_to_boundary,
    GeodesicState,
};
use crate::warp::{Side, StripMetric, WarpFunction};

/// How exit data are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LensMethod {
    Quadrature,
    Ode,
}

impl FromStr for LensMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadrature" => Ok(LensMethod::Quadrature),
            "ode" => Ok(LensMethod::Ode),
            other => Err(Error::InvalidInput(format!(
                "unknown lens method '{other}'"
            ))),
        }
    }
}

/// One entering geodesic, reduced to tangential components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensRecord {
    pub entry_u: f64,
    #[serde(rename = "T")]
    pub length: f64,
    pub delta_x: f64,
    pub exit_side: Side,
    pub exit_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensTable {
    pub warp: String,
    pub entry_side: Side,
    pub method: LensMethod,
    pub grid: Vec<f64>,
    pub records: Vec<LensRecord>,
    /// Largest Clairaut drift over the table (ODE method only).
    pub max_clairaut_drift: Option<f64>,
}

/// Sup discrepancies between two lens tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensDiscrepancy {
    pub max_dt: f64,
    pub max_ddx: f64,
    pub max_du: f64,
}

impl LensDiscrepancy {
    pub fn max(&self) -> f64 {
        self.max_dt.max(self.max_ddx).max(self.max_du)
    }
}

/// `n` Chebyshev points in `(-bound, bound)`, increasing.
pub fn chebyshev_grid(n: usize, bound: f64) -> Vec<f64> {
    (0..n)
        .map(|i| -bound * (std::f64::consts::PI * (2 * i + 1) as f64 / (2 * n) as f64).cos())
        .collect()
}

/// `n` equally spaced points on `[a, b]`.
pub fn uniform_grid(n: usize, a: f64, b: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn record(m: &StripMetric, u: f64, method: LensMethod, side: Side) -> Result<(LensRecord, f64)> {
    let w = m.warp();
    let y_in = m.side_coordinate(side);
    let f_in = w.value(y_in);
    if !(u.abs() * f_in.sqrt() < 1.0) {
        return Err(Error::Grazing { clairaut: u * f_in });
    }
    match method {
        LensMethod::Quadrature => {
            let c = u * f_in;
            if side == Side::Bottom && c * c >= w.range().0 {
                // turns back before reaching the far side
                let ch = chord_same_side(m, c.abs())?;
                let rec = LensRecord {
                    entry_u: u,
                    length: ch.length,
                    delta_x: ch.displacement.copysign(u),
                    exit_side: side,
                    exit_u: u,
                };
                return Ok((rec, 0.0));
            }
            // the integrals see only the values of f, not the crossing direction
            let (t, dx) = crossing_integrals_for(m, c)?;
            let exit = side.opposite();
            let f_out = w.value(m.side_coordinate(exit));
            Ok((
                LensRecord {
                    entry_u: u,
                    length: t,
                    delta_x: dx,
                    exit_side: exit,
                    exit_u: u * f_in / f_out,
                },
                0.0,
            ))
        }
        LensMethod::Ode => {
            let vy = (1.0 - f_in * u * u).sqrt();
            let vy = if side == Side::Bottom { vy } else { -vy };
            let e = integrate_to_boundary(
                m,
                &GeodesicState::new(0.0, y_in, u, vy),
                &default_ode_options(m),
            )?;
            Ok((
                LensRecord {
                    entry_u: u,
                    length: e.length,
                    delta_x: e.exit_x,
                    exit_side: e.exit_side,
                    exit_u: e.exit_vx,
                },
                e.clairaut_drift,
            ))
        }
    }
}

/// Lens table for geodesics entering from `y = 0`.
pub fn build_lens_table(m: &StripMetric, grid: &[f64], method: LensMethod) -> Result<LensTable> {
    build_lens_table_from(m, grid, method, Side::Bottom)
}

pub fn build_lens_table_from(
    m: &StripMetric,
    grid: &[f64],
    method: LensMethod,
    side: Side,
) -> Result<LensTable> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput(
            "direction grid must be strictly increasing".into(),
        ));
    }
    let rows: Vec<(LensRecord, f64)> = grid
        .par_iter()
        .map(|&u| record(m, u, method, side))
        .collect::<Result<_>>()?;
    let drift = rows.iter().fold(0.0f64, |a, r| a.max(r.1));
    Ok(LensTable {
        warp: m.warp().name().to_string(),
        entry_side: side,
        method,
        grid: grid.to_vec(),
        records: rows.into_iter().map(|r| r.0).collect(),
        max_clairaut_drift: (method == LensMethod::Ode).then_some(drift),
    })
}

pub fn compare_lens(a: &LensTable, b: &LensTable) -> Result<LensDiscrepancy> {
    if a.grid != b.grid || a.entry_side != b.entry_side {
        return Err(Error::GridMismatch(format!(
            "tables '{}' and '{}' use different direction grids or sides",
            a.warp, b.warp
        )));
    }
    let mut d = LensDiscrepancy {
        max_dt: 0.0,
        max_ddx: 0.0,
        max_du: 0.0,
    };
    for (r, s) in a.records.iter().zip(&b.records) {
        if r.exit_side != s.exit_side {
            d.max_dt = f64::INFINITY;
        }
        d.max_dt = d.max_dt.max((r.length - s.length).abs());
        d.max_ddx = d.max_ddx.max((r.delta_x - s.delta_x).abs());
        d.max_du = d.max_du.max((r.exit_u - s.exit_u).abs());
    }
    Ok(d)
}

impl LensTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["entry_u", "T", "delta_x", "exit_side", "exit_u"])?;
        for r in &self.records {
            wtr.write_record([
                format!("{:.16e}", r.entry_u),
                format!("{:.16e}", r.length),
                format!("{:.16e}", r.delta_x),
                r.exit_side.label().to_string(),
                format!("{:.16e}", r.exit_u),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Measure of `{y in [0, L] : f(y) <= r}`.
pub fn sublevel_measure(w: &WarpFunction, r: f64) -> f64 {
    sublevel_on(w, r, &w.scan_grid(8192))
}

fn sublevel_on(w: &WarpFunction, r: f64, grid: &[f64]) -> f64 {
    let inside = |y: f64| w.value(y) <= r;
    // boundary between `a` (state sa) and `b` (the other state)
    let cross = |mut a: f64, mut b: f64, sa: bool| loop {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            return 0.5 * (a + b);
        }
        if inside(m) == sa {
            a = m;
        } else {
            b = m;
        }
    };
    let mut total = 0.0;
    let mut pa = inside(grid[0]);
    for c in grid.windows(2) {
        let (a, b) = (c[0], c[1]);
        let pb = inside(b);
        total += match (pa, pb) {
            (true, true) => b - a,
            (true, false) => cross(a, b, true) - a,
            (false, true) => b - cross(a, b, false),
            (false, false) => {
                let m = 0.5 * (a + b);
                if inside(m) {
                    cross(m, b, true) - cross(a, m, false)
                } else {
                    0.0
                }
            }
        };
        pa = pb;
    }
    total
}

/// Outcome of an equimeasurability sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquimeasureReport {
    pub pass: bool,
    pub max_gap: f64,
    pub worst_level: f64,
    pub levels: usize,
}

/// `n` levels at cell midpoints of a uniform partition of `[lo, hi]`, so the
/// sweep never sits exactly on an extreme value of `f`.
pub fn level_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64)
        .collect()
}

/// Sublevel measures of one or two warps at the given levels.
pub fn sublevel_sweep(ws: &[&WarpFunction], levels: &[f64]) -> Vec<Vec<f64>> {
    let grids: Vec<Vec<f64>> = ws.iter().map(|w| w.scan_grid(8192)).collect();
    levels
        .par_iter()
        .map(|&r| {
            ws.iter()
                .zip(&grids)
                .map(|(w, g)| sublevel_on(w, r, g))
                .collect()
        })
        .collect()
}

pub fn equimeasurable_check(
    w1: &WarpFunction,
    w2: &WarpFunction,
    n_levels: usize,
    tol: f64,
) -> Result<EquimeasureReport> {
    if (w1.length() - w2.length()).abs() > 1e-12 * w1.length() {
        return Err(Error::InvalidInput(format!(
            "strip widths differ ({} vs {})",
            w1.length(),
            w2.length()
        )));
    }
    let (a1, b1) = w1.range();
    let (a2, b2) = w2.range();
    let levels = level_grid(a1.min(a2), b1.max(b2), n_levels.max(1));
    let m = sublevel_sweep(&[w1, w2], &levels);
    let (mut gap, mut worst) = (0.0f64, levels[0]);
    for (r, v) in levels.iter().zip(&m) {
        let g = (v[0] - v[1]).abs();
        if g > gap {
            gap = g;
            worst = *r;
        }
    }
    Ok(EquimeasureReport {
        pass: gap <= tol,
        max_gap: gap,
        worst_level: worst,
        levels: levels.len(),
    })
}

/// Exit time as a Stieltjes sum against the level distribution of `f`.
pub fn distribution_integral(w: &WarpFunction, u0: f64, n_levels: usize) -> Result<f64> {
    let c = u0 * w.value(0.0);
    let c2 = c * c;
    let (lo, hi) = w.range();
    if c2 >= lo {
        return Err(Error::Grazing { clairaut: c });
    }
    let phi = |t: f64| 1.0 / (1.0 - c2 / t).sqrt();
    let n = n_levels.max(1);
    let edges: Vec<f64> = (0..=n)
        .map(|i| {
            if i == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / n as f64
            }
        })
        .collect();
    let grid = w.scan_grid(8192);
    let m: Vec<f64> = edges
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            if i == n {
                w.length()
            } else {
                sublevel_on(w, t, &grid)
            }
        })
        .collect();
    // atom at the minimum (plateaus), then midpoint cells
    let mut total = phi(lo) * m[0];
    for i in 0..n {
        total += phi(0.5 * (edges[i] + edges[i + 1])) * (m[i + 1] - m[i]);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::crossing_time;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn flat_single_record() {
        let m = StripMetric::new(WarpFunction::flat(1.0).unwrap());
        let t = build_lens_table(&m, &[0.0], LensMethod::Quadrature).unwrap();
        close(t.records[0].length, 1.0, 1e-14);
        close(t.records[0].delta_x, 0.0, 0.0);
        assert_eq!(t.records[0].exit_side, Side::Top);
    }

    #[test]
    fn methods_agree_on_cos1() {
        let m = StripMetric::new(WarpFunction::cos1());
        let g = chebyshev_grid(21, 0.99);
        let q = build_lens_table(&m, &g, LensMethod::Quadrature).unwrap();
        let o = build_lens_table(&m, &g, LensMethod::Ode).unwrap();
        assert!(compare_lens(&q, &o).unwrap().max() <= 1e-7);
        assert!(o.max_clairaut_drift.unwrap() <= 1e-9);
    }

    #[test]
    fn cos_pair_is_lens_equivalent() {
        let g = chebyshev_grid(101, 0.99);
        let a = build_lens_table(
            &StripMetric::new(WarpFunction::cos1()),
            &g,
            LensMethod::Quadrature,
        )
        .unwrap();
        let b = build_lens_table(
            &StripMetric::new(WarpFunction::cos2()),
            &g,
            LensMethod::Quadrature,
        )
        .unwrap();
        let d = compare_lens(&a, &b).unwrap();
        assert!(d.max() <= 1e-8, "{d:?}");
        assert_eq!(compare_lens(&a, &a).unwrap().max(), 0.0);
        let f = build_lens_table(
            &StripMetric::new(WarpFunction::flat(2.0 * PI).unwrap()),
            &g,
            LensMethod::Quadrature,
        )
        .unwrap();
        assert!(compare_lens(&a, &f).unwrap().max_dt > 1.0);
    }

    #[test]
    fn returning_geodesics_use_chords() {
        let m = StripMetric::new(WarpFunction::exp_decay(1.0, 1.0).unwrap());
        let g = [-0.9, 0.3, 0.9];
        let q = build_lens_table(&m, &g, LensMethod::Quadrature).unwrap();
        let o = build_lens_table(&m, &g, LensMethod::Ode).unwrap();
        assert_eq!(q.records[0].exit_side, Side::Bottom);
        assert_eq!(q.records[1].exit_side, Side::Top);
        assert!(q.records[0].delta_x < 0.0);
        assert!(compare_lens(&q, &o).unwrap().max() < 1e-8);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let m = StripMetric::new(WarpFunction::cos1());
        let a = build_lens_table(&m, &[0.0, 0.1], LensMethod::Quadrature).unwrap();
        let b = build_lens_table(&m, &[0.0, 0.2], LensMethod::Quadrature).unwrap();
        assert!(matches!(compare_lens(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn top_entry_matches_bottom_for_symmetric_warps() {
        let m = StripMetric::new(WarpFunction::cos2());
        let g = chebyshev_grid(11, 0.9);
        let a = build_lens_table(&m, &g, LensMethod::Ode).unwrap();
        let b = build_lens_table_from(&m, &g, LensMethod::Ode, Side::Top).unwrap();
        for (r, s) in a.records.iter().zip(&b.records) {
            close(r.length, s.length, 1e-9);
            close(r.delta_x, s.delta_x, 1e-9);
        }
    }

    #[test]
    fn sublevel_closed_forms() {
        close(sublevel_measure(&WarpFunction::cos1(), 2.0), PI, 1e-9);
        close(sublevel_measure(&WarpFunction::cos2(), 2.0), PI, 1e-9);
        close(
            sublevel_measure(&WarpFunction::cos1(), 2.5),
            2.0 * (-0.5f64).acos(),
            1e-9,
        );
        assert_eq!(sublevel_measure(&WarpFunction::cos1(), 0.5), 0.0);
    }

    #[test]
    fn equimeasurable_cos_pair() {
        let r =
            equimeasurable_check(&WarpFunction::cos1(), &WarpFunction::cos2(), 256, 1e-8).unwrap();
        assert!(r.pass, "{r:?}");
        let r =
            equimeasurable_check(&WarpFunction::cos1(), &WarpFunction::cos1(), 64, 0.0).unwrap();
        assert_eq!(r.max_gap, 0.0);
        let r = equimeasurable_check(
            &WarpFunction::cos1(),
            &WarpFunction::flat(2.0 * PI).unwrap(),
            64,
            1e-8,
        )
        .unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn distribution_integral_converges() {
        let w = WarpFunction::cos1();
        close(
            distribution_integral(&w, 0.0, 100).unwrap(),
            2.0 * PI,
            1e-12,
        );
        let m = StripMetric::new(w.clone());
        let t = crossing_time(&m, 0.5).unwrap();
        close(distribution_integral(&w, 0.5, 10_000).unwrap(), t, 1e-5);
        let a = distribution_integral(&w, 0.5, 500).unwrap();
        let b = distribution_integral(&WarpFunction::cos2(), 0.5, 500).unwrap();
        close(a, b, 1e-12);
    }

    #[test]
    fn csv_layout() {
        let m = StripMetric::new(WarpFunction::flat(1.0).unwrap());
        let t = build_lens_table(&m, &[-0.5, 0.5], LensMethod::Quadrature).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "entry_u,T,delta_x,exit_side,exit_u");
        assert!(lines.next().unwrap().starts_with("-5.0000000000000000e-1,"));
    }
}
