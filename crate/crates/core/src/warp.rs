//! Warp profiles `f(y)` and the strip metric `g = f(y) dx^2 + dy^2` on
//! `R x [0, L]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::equimeasurable::Section5Params;
use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::series::{Dual, Real, Series};

/// Highest derivative order served for sampled warps.
pub const SAMPLED_MAX_ORDER: usize = 2;

/// Slack allowed when checking that a coordinate lies in `[0, L]`.
const DOMAIN_SLACK: f64 = 1e-12;

/// One of the two boundary lines of the strip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "y=0")]
    Bottom,
    #[serde(rename = "y=L")]
    Top,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::Bottom => "y=0",
            Side::Top => "y=L",
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Bottom => Side::Top,
            Side::Top => Side::Bottom,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Closed-form warp profiles.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticProfile {
    /// `f = c`.
    Constant(f64),
    /// `f = 2 - cos(k y)`.
    Cosine { freq: f64 },
    /// `f = a e^{-y}`.
    ExpDecay { scale: f64 },
    /// `f = (1 - y)^2`.
    Quadratic,
    /// `f = 1 - tanh(y)`.
    TanhDrop,
    /// The piecewise smooth profile with a linear start, a flat peak and a
    /// plateau, mirrored about the middle of the strip.
    Section5(Section5Params),
}

impl AnalyticProfile {
    pub fn eval<T: Real>(&self, y: T) -> T {
        match self {
            AnalyticProfile::Constant(c) => y.lift(*c),
            AnalyticProfile::Cosine { freq } => (y * *freq).cos().rsub(2.0),
            AnalyticProfile::ExpDecay { scale } => (-y).exp() * *scale,
            AnalyticProfile::Quadratic => {
                let t = y.rsub(1.0);
                t.clone() * t
            }
            AnalyticProfile::TanhDrop => y.tanh().rsub(1.0),
            AnalyticProfile::Section5(p) => p.eval(y),
        }
    }

    /// `f(y) - f(0)` without cancellation for small `y`.
    fn increment(&self, y: f64) -> f64 {
        match self {
            AnalyticProfile::Constant(_) => 0.0,
            AnalyticProfile::Cosine { freq } => {
                let s = (0.5 * freq * y).sin();
                2.0 * s * s
            }
            AnalyticProfile::ExpDecay { scale } => scale * (-y).exp_m1(),
            AnalyticProfile::Quadratic => y * (y - 2.0),
            AnalyticProfile::TanhDrop => -y.tanh(),
            AnalyticProfile::Section5(p) => {
                if y <= 1.0 {
                    y
                } else {
                    p.eval(y) - 1.0
                }
            }
        }
    }
}

impl AnalyticProfile {
    /// `f(y0 + t) - f(y0)` using the offset `t` exactly.
    fn difference(&self, y0: f64, t: f64) -> f64 {
        match self {
            AnalyticProfile::Constant(_) => 0.0,
            AnalyticProfile::Cosine { freq } => {
                2.0 * (freq * (y0 + 0.5 * t)).sin() * (0.5 * freq * t).sin()
            }
            AnalyticProfile::ExpDecay { scale } => scale * (-y0).exp() * (-t).exp_m1(),
            AnalyticProfile::Quadratic => t * (2.0 * y0 + t - 2.0),
            AnalyticProfile::TanhDrop => -t.sinh() / ((y0 + t).cosh() * y0.cosh()),
            AnalyticProfile::Section5(p) => {
                if y0 <= 1.0 && y0 + t <= 1.0 {
                    t
                } else if t.abs() < 0.05 {
                    // Taylor polynomial about y0 without its constant term
                    let c = p.eval(Series::variable(y0, 12));
                    c.coeffs()[1..]
                        .iter()
                        .rev()
                        .fold(0.0, |acc, a| (acc + a) * t)
                } else {
                    p.eval(y0 + t) - p.eval(y0)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum WarpKind {
    Analytic(AnalyticProfile),
    Sampled(MonotoneCubic),
}

/// A warp profile on `[0, L]`.
#[derive(Debug, Clone)]
pub struct WarpFunction {
    name: String,
    length: f64,
    kind: WarpKind,
}

impl WarpFunction {
    pub fn analytic(
        name: impl Into<String>,
        length: f64,
        profile: AnalyticProfile,
    ) -> Result<Self> {
        let w = WarpFunction {
            name: name.into(),
            length,
            kind: WarpKind::Analytic(profile),
        };
        w.validate()?;
        Ok(w)
    }

    /// Sampled warp from `(y, f)` pairs; the grid must span `[0, L]` exactly.
    pub fn sampled(name: impl Into<String>, length: f64, points: &[(f64, f64)]) -> Result<Self> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        if xs.first() != Some(&0.0) || xs.last() != Some(&length) {
            return Err(Error::InvalidWarp(format!(
                "sampled grid must cover [0, {length}] exactly"
            )));
        }
        if xs.len() < 5 {
            return Err(Error::InvalidWarp(
                "sampled warp needs at least 5 points".into(),
            ));
        }
        let interp = MonotoneCubic::new(xs, ys).map_err(|e| Error::InvalidWarp(e.to_string()))?;
        let w = WarpFunction {
            name: name.into(),
            length,
            kind: WarpKind::Sampled(interp),
        };
        w.validate()?;
        Ok(w)
    }

    pub fn flat(length: f64) -> Result<Self> {
        Self::analytic("flat", length, AnalyticProfile::Constant(1.0))
    }

    /// `2 - cos(y)` on `[0, 2 pi]`.
    pub fn cos1() -> Self {
        Self::analytic("cos1", 2.0 * PI, AnalyticProfile::Cosine { freq: 1.0 }).unwrap()
    }

    /// `2 - cos(2y)` on `[0, 2 pi]`.
    pub fn cos2() -> Self {
        Self::analytic("cos2", 2.0 * PI, AnalyticProfile::Cosine { freq: 2.0 }).unwrap()
    }

    pub fn exp_decay(length: f64, scale: f64) -> Result<Self> {
        Self::analytic("exp-decay", length, AnalyticProfile::ExpDecay { scale })
    }

    pub fn quadratic(length: f64) -> Result<Self> {
        Self::analytic("quadratic", length, AnalyticProfile::Quadratic)
    }

    pub fn tanh_drop(length: f64) -> Result<Self> {
        Self::analytic("tanh", length, AnalyticProfile::TanhDrop)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn kind(&self) -> &WarpKind {
        &self.kind
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.kind, WarpKind::Sampled(_))
    }

    fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(Error::InvalidWarp(format!(
                "strip width {} must be positive",
                self.length
            )));
        }
        let n = 2048;
        for i in 0..=n {
            let y = self.length * i as f64 / n as f64;
            let v = self.value(y);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidWarp(format!("f({y}) = {v} is not positive")));
            }
        }
        if let WarpKind::Sampled(s) = &self.kind {
            if s.ys().iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidWarp("sampled values must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn check_domain(&self, y: f64) -> Result<()> {
        if y < -DOMAIN_SLACK || y > self.length + DOMAIN_SLACK || y.is_nan() {
            Err(Error::OutOfDomain {
                value: y,
                length: self.length,
            })
        } else {
            Ok(())
        }
    }

    /// `f(y)`. No domain check; sampled warps extend their end cubics.
    pub fn value(&self, y: f64) -> f64 {
        match &self.kind {
            WarpKind::Analytic(p) => p.eval(y),
            WarpKind::Sampled(s) => s.eval(y).0,
        }
    }

    /// `(f(y), f'(y))`. For sampled warps the slope is the interpolant's own
    /// derivative, so geodesic dynamics stay consistent with `f`.
    pub fn value_slope(&self, y: f64) -> (f64, f64) {
        match &self.kind {
            WarpKind::Analytic(p) => {
                let d = p.eval(Dual::variable(y));
                (d.v, d.d)
            }
            WarpKind::Sampled(s) => s.eval(y),
        }
    }

    /// `f(y) - f(0)`, accurate for small `y` on analytic presets.
    pub fn increment(&self, y: f64) -> f64 {
        match &self.kind {
            WarpKind::Analytic(p) => p.increment(y),
            WarpKind::Sampled(s) => s.eval(y).0 - s.ys()[0],
        }
    }

    /// `f(y0 + t) - f(y0)`, keeping full relative accuracy for small `t`
    /// on analytic presets.
    pub fn difference(&self, y0: f64, t: f64) -> f64 {
        match &self.kind {
            WarpKind::Analytic(p) => p.difference(y0, t),
            WarpKind::Sampled(s) => s.eval(y0 + t).0 - s.eval(y0).0,
        }
    }

    /// Derivatives `f^(k)(y)` for `k = 0..=order`.
    pub fn derivatives(&self, y: f64, order: usize) -> Result<Vec<f64>> {
        self.check_domain(y)?;
        match &self.kind {
            WarpKind::Analytic(p) => Ok(p.eval(Series::variable(y, order)).derivatives()),
            WarpKind::Sampled(s) => {
                if order > SAMPLED_MAX_ORDER {
                    return Err(Error::UnsupportedDerivative {
                        order,
                        max: SAMPLED_MAX_ORDER,
                    });
                }
                let (v, d) = s.eval(y);
                let mut out = vec![v, d, s.sample_derivative(y, 2)];
                out.truncate(order + 1);
                Ok(out)
            }
        }
    }

    pub fn derivative(&self, y: f64, order: usize) -> Result<f64> {
        Ok(self.derivatives(y, order)?[order])
    }

    /// Points where the profile changes formula (sampled knots or piece
    /// joins), always including `0` and `L`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = match &self.kind {
            WarpKind::Sampled(s) => s.xs().to_vec(),
            WarpKind::Analytic(AnalyticProfile::Section5(p)) => p
                .breakpoints()
                .into_iter()
                .filter(|b| *b > 0.0 && *b < self.length)
                .chain([0.0, self.length])
                .collect(),
            WarpKind::Analytic(_) => vec![0.0, self.length],
        };
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Scan grid used for root isolation and extrema: breakpoints refined
    /// so that no cell is wider than `L / min_cells`.
    pub fn scan_grid(&self, min_cells: usize) -> Vec<f64> {
        let bps = self.breakpoints();
        let max_w = self.length / min_cells as f64;
        let mut grid = vec![bps[0]];
        for w in bps.windows(2) {
            let m = ((w[1] - w[0]) / max_w).ceil().max(1.0) as usize;
            for j in 1..=m {
                grid.push(if j == m {
                    w[1]
                } else {
                    w[0] + (w[1] - w[0]) * j as f64 / m as f64
                });
            }
        }
        grid
    }

    /// Minimum and maximum of `f` on `[0, L]`.
    pub fn range(&self) -> (f64, f64) {
        let grid = self.scan_grid(4096);
        let vals: Vec<f64> = grid.iter().map(|&y| self.value(y)).collect();
        let (imin, _) = vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let (imax, _) = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let refine = |i: usize, sign: f64| {
            let lo = grid[i.saturating_sub(1)];
            let hi = grid[(i + 1).min(grid.len() - 1)];
            let best = golden_min(|y| sign * self.value(y), lo, hi);
            sign * best.min(sign * vals[i])
        };
        (refine(imin, 1.0), refine(imax, -1.0))
    }
}

/// Golden-section minimum value of `f` over `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd).min(f(a)).min(f(b))
}

/// The warped strip metric.
#[derive(Debug, Clone)]
pub struct StripMetric {
    warp: WarpFunction,
}

/// Christoffel symbols of the strip metric; index 1 is `x`, 2 is `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Christoffel {
    pub g2_11: f64,
    pub g1_12: f64,
    pub g2_22: f64,
    pub g2_12: f64,
    pub g1_22: f64,
    pub g1_11: f64,
}

/// Boundary jet `d^k g_11 / dn^k` along the inward normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetVector {
    pub side: Side,
    pub values: Vec<f64>,
}

/// Outcome of comparing two jets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetComparison {
    FirstDifference(usize),
    Equal,
}

impl StripMetric {
    pub fn new(warp: WarpFunction) -> Self {
        StripMetric { warp }
    }

    pub fn warp(&self) -> &WarpFunction {
        &self.warp
    }

    pub fn length(&self) -> f64 {
        self.warp.length
    }

    pub fn side_coordinate(&self, side: Side) -> f64 {
        match side {
            Side::Bottom => 0.0,
            Side::Top => self.warp.length,
        }
    }

    /// `(g_xx, g_xy, g_yy)`.
    pub fn metric_components(&self, y: f64) -> Result<(f64, f64, f64)> {
        self.warp.check_domain(y)?;
        Ok((self.warp.value(y), 0.0, 1.0))
    }

    pub fn christoffel(&self, y: f64) -> Result<Christoffel> {
        self.warp.check_domain(y)?;
        let (f, df) = self.warp.value_slope(y);
        Ok(Christoffel {
            g2_11: -0.5 * df,
            g1_12: 0.5 * df / f,
            g2_22: 0.0,
            g2_12: 0.0,
            g1_22: 0.0,
            g1_11: 0.0,
        })
    }

    /// `II(d_x, d_x) / g_xx` with respect to the inward unit normal. Positive
    /// means the side is non-concave.
    pub fn second_fundamental_form(&self, side: Side) -> f64 {
        let y = self.side_coordinate(side);
        let (f, df) = self.warp.value_slope(y);
        match side {
            Side::Bottom => -df / (2.0 * f),
            Side::Top => df / (2.0 * f),
        }
    }

    /// Inward normal derivatives of `g_11` at a side, orders `0..=order`.
    pub fn ground_truth_jet(&self, side: Side, order: usize) -> Result<JetVector> {
        let y = self.side_coordinate(side);
        let mut values = self.warp.derivatives(y, order)?;
        if side == Side::Top {
            for (k, v) in values.iter_mut().enumerate() {
                if k % 2 == 1 {
                    *v = -*v;
                }
            }
        }
        Ok(JetVector { side, values })
    }
}

/// Smallest order at which the jets differ by more than `tol`.
pub fn jet_compare(a: &JetVector, b: &JetVector, tol: f64) -> Result<JetComparison> {
    if a.values.len() != b.values.len() || a.side != b.side {
        return Err(Error::InvalidInput(format!(
            "jets differ in order or side ({} vs {})",
            a.values.len(),
            b.values.len()
        )));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .position(|(x, y)| (x - y).abs() > tol)
        .map_or(JetComparison::Equal, JetComparison::FirstDifference))
}
