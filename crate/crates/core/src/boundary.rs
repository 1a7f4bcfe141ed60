//! Localized boundary distance data near a base point on `y = 0`.
//!
//! A dataset answers two-point queries `tau(x1, x2)` (the distance through the
//! strip) and `mu(x1, x2)` (the distance along the boundary line) for points
//! within `eps` of the base point. It is either backed by the chord solver or
//! by a table read from disk.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{chord_between, Chord};
use crate::interp::TensorSpline;
use crate::warp::StripMetric;

/// Finite-difference step policy shared by the dataset and jet recovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdPolicy {
    /// Tangential steps are `beta * |x - y|`.
    pub beta: f64,
    /// Outer step of order `k` is `outer[k] * eps / (1 + beta)^k`.
    pub outer: Vec<f64>,
    /// Richardson estimates of order `k` may differ by at most `unstable_tol[k]`.
    pub unstable_tol: Vec<f64>,
    /// Smallest accepted `1 - g^11 (d tau)^2`.
    pub transversal_tol: f64,
}

impl Default for FdPolicy {
    fn default() -> Self {
        FdPolicy {
            beta: 0.25,
            outer: vec![0.5, 0.8, 0.8, 0.9, 0.9],
            unstable_tol: vec![1e-8, 1e-5, 1e-3, 0.1, 0.5],
            transversal_tol: 1e-10,
        }
    }
}

impl FdPolicy {
    pub fn outer_step(&self, eps: f64, k: usize) -> f64 {
        let frac = self
            .outer
            .get(k)
            .or(self.outer.last())
            .copied()
            .unwrap_or(0.5);
        frac * eps / (1.0 + self.beta).powi(k as i32)
    }

    pub fn unstable_tol(&self, k: usize) -> f64 {
        self.unstable_tol
            .get(k)
            .or(self.unstable_tol.last())
            .copied()
            .unwrap_or(1.0)
    }
}

/// Sidecar metadata of a tabulated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub x0: f64,
    pub eps: f64,
    pub g11: f64,
}

#[derive(Debug)]
enum Source {
    Oracle {
        metric: StripMetric,
        cache: RwLock<HashMap<(u64, u64), Option<Chord>>>,
    },
    Tabulated {
        spline: TensorSpline,
    },
}

/// Outcome of [`detect_nonconcave`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NonconcaveEvidence,
    NoEvidence,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::NonconcaveEvidence => "nonconcave-evidence",
            Verdict::NoEvidence => "no-evidence",
        }
    }
}

/// Distance data in the window `|x - x0| <= eps` of the side `y = 0`.
#[derive(Debug)]
pub struct BoundaryDistanceDataset {
    x0: f64,
    eps: f64,
    g11: f64,
    policy: FdPolicy,
    source: Source,
}

impl BoundaryDistanceDataset {
    /// Chord-solver backed data with the default window `0.05 L`.
    pub fn oracle(metric: StripMetric, x0: f64) -> Self {
        let eps = 0.05 * metric.length();
        Self::oracle_with_window(metric, x0, eps)
    }

    pub fn oracle_with_window(metric: StripMetric, x0: f64, eps: f64) -> Self {
        let g11 = metric.warp().value(0.0);
        BoundaryDistanceDataset {
            x0,
            eps,
            g11,
            policy: FdPolicy::default(),
            source: Source::Oracle {
                metric,
                cache: RwLock::new(HashMap::new()),
            },
        }
    }

    /// Data given on the uniform grid `x0 - eps + i * 2 eps / (n - 1)`;
    /// `values[i][j]` is `tau` between grid points `i` and `j`.
    pub fn tabulated(meta: TableMeta, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.len();
        if n < 4 || values.iter().any(|r| r.len() != n) {
            return Err(Error::GridMismatch(format!(
                "distance table must be square with n >= 4 (got {n} rows)"
            )));
        }
        if !(meta.eps > 0.0 && meta.g11 > 0.0) {
            return Err(Error::InvalidInput("eps and g11 must be positive".into()));
        }
        // tau has a kink on the diagonal; its square does not
        let rho = values
            .iter()
            .map(|r| r.iter().map(|t| t * t).collect())
            .collect();
        let step = 2.0 * meta.eps / (n - 1) as f64;
        let spline = TensorSpline::new(meta.x0 - meta.eps, step, rho)?;
        Ok(BoundaryDistanceDataset {
            x0: meta.x0,
            eps: meta.eps,
            g11: meta.g11,
            policy: FdPolicy::default(),
            source: Source::Tabulated { spline },
        })
    }

    /// Read `x1,x2,tau` rows and the JSON sidecar next to `path`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let meta: TableMeta = serde_json::from_reader(File::open(sidecar_path(path))?)?;
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x1", "x2", "tau"] {
            return Err(Error::InvalidInput(format!(
                "expected header x1,x2,tau, found {:?}",
                headers
            )));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("bad number {:?}: {e}", &rec[i])))
            };
            rows.push((parse(0)?, parse(1)?, parse(2)?));
        }
        let n = (rows.len() as f64).sqrt().round() as usize;
        if n * n != rows.len() || n < 4 {
            return Err(Error::GridMismatch(format!(
                "{} rows do not form a square grid",
                rows.len()
            )));
        }
        let step = 2.0 * meta.eps / (n - 1) as f64;
        let index = |x: f64| -> Result<usize> {
            let t = (x - (meta.x0 - meta.eps)) / step;
            let i = t.round();
            if (t - i).abs() > 1e-6 || i < 0.0 || i as usize >= n {
                return Err(Error::GridMismatch(format!(
                    "coordinate {x} is not on the uniform window grid"
                )));
            }
            Ok(i as usize)
        };
        let mut values = vec![vec![f64::NAN; n]; n];
        for (x1, x2, t) in rows {
            values[index(x1)?][index(x2)?] = t;
        }
        if values.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::GridMismatch(
                "distance table has missing entries".into(),
            ));
        }
        Self::tabulated(meta, values)
    }

    pub fn with_policy(mut self, policy: FdPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn g11(&self) -> f64 {
        self.g11
    }

    pub fn policy(&self) -> &FdPolicy {
        &self.policy
    }

    pub fn metric(&self) -> Option<&StripMetric> {
        match &self.source {
            Source::Oracle { metric, .. } => Some(metric),
            Source::Tabulated { .. } => None,
        }
    }

    pub fn meta(&self) -> TableMeta {
        TableMeta {
            x0: self.x0,
            eps: self.eps,
            g11: self.g11,
        }
    }

    fn check_window(&self, x1: f64, x2: f64) -> Result<()> {
        let slack = self.eps * (1.0 + 1e-12);
        if (x1 - self.x0).abs() > slack
            || (x2 - self.x0).abs() > slack
            || !x1.is_finite()
            || !x2.is_finite()
        {
            return Err(Error::OutOfWindow { x1, x2 });
        }
        Ok(())
    }

    /// The chord joining the two points, if one exists (oracle mode only).
    pub fn chord(&self, x1: f64, x2: f64) -> Result<Option<Chord>> {
        self.check_window(x1, x2)?;
        let Source::Oracle { metric, cache } = &self.source else {
            return Ok(None);
        };
        let key = (x1.min(x2).to_bits(), x1.max(x2).to_bits());
        if let Some(c) = cache.read().unwrap().get(&key) {
            return Ok(*c);
        }
        let chord = match chord_between(metric, x1.min(x2), x1.max(x2)) {
            Ok(c) => Some(c),
            Err(Error::NoChord(_)) => None,
            Err(e) => return Err(e),
        };
        cache.write().unwrap().insert(key, chord);
        Ok(chord)
    }

    pub fn mu(&self, x1: f64, x2: f64) -> f64 {
        self.g11.sqrt() * (x1 - x2).abs()
    }

    pub fn tau(&self, x1: f64, x2: f64) -> Result<f64> {
        Ok(self.mu(x1, x2) - self.deficit(x1, x2)?)
    }

    /// `mu - tau`, which is never negative. The oracle computes it without
    /// forming the difference, so it keeps full relative accuracy for close
    /// points.
    pub fn deficit(&self, x1: f64, x2: f64) -> Result<f64> {
        self.check_window(x1, x2)?;
        if x1 == x2 {
            return Ok(0.0);
        }
        match &self.source {
            Source::Oracle { .. } => Ok(self.chord(x1, x2)?.map_or(0.0, |c| c.deficit.max(0.0))),
            Source::Tabulated { spline } => {
                // evaluate on the symmetrized interpolant
                let rho = 0.5 * (spline.eval(x1, x2) + spline.eval(x2, x1));
                Ok((self.mu(x1, x2) - rho.max(0.0).sqrt()).max(0.0))
            }
        }
    }

    /// `tau^2`.
    pub fn rho(&self, x1: f64, x2: f64) -> Result<f64> {
        let t = self.tau(x1, x2)?;
        Ok(t * t)
    }

    /// Uniform window grid with `n` nodes.
    pub fn window_grid(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| self.x0 - self.eps + 2.0 * self.eps * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Tabulate `tau` on the uniform window grid with `n` nodes.
    pub fn tabulate(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        use rayon::prelude::*;
        if n < 4 {
            return Err(Error::InvalidInput(
                "tabulation needs at least 4 nodes".into(),
            ));
        }
        let grid = self.window_grid(n);
        let mut values: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if j <= i {
                            Ok(0.0)
                        } else {
                            self.tau(grid[i], grid[j])
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        for i in 0..n {
            for j in 0..i {
                values[i][j] = values[j][i];
            }
        }
        Ok(values)
    }

    /// Write a tabulation as `x1,x2,tau` CSV plus the JSON sidecar.
    pub fn export_csv(&self, path: &Path, n: usize) -> Result<()> {
        let values = self.tabulate(n)?;
        let grid = self.window_grid(n);
        let mut out = std::io::BufWriter::new(File::create(path)?);
        writeln!(out, "x1,x2,tau")?;
        for (i, row) in values.iter().enumerate() {
            for (j, t) in row.iter().enumerate() {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", grid[i], grid[j], t)?;
            }
        }
        out.flush()?;
        let mut side = File::create(sidecar_path(path))?;
        serde_json::to_writer_pretty(&mut side, &self.meta())?;
        writeln!(side)?;
        Ok(())
    }
}

/// `data.csv` -> `data.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Derivative of order 1 or 2 of `f` at `s`: central differences with steps
/// `h` and `h/2`, combined by one Richardson step.
pub fn fd_derivative<F>(f: F, s: f64, order: usize, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let stencil = |h: f64| -> Result<f64> {
        match order {
            1 => Ok((f(s + h)? - f(s - h)?) / (2.0 * h)),
            2 => Ok((f(s + h)? - 2.0 * f(s)? + f(s - h)?) / (h * h)),
            _ => Err(Error::UnsupportedDerivative { order, max: 2 }),
        }
    };
    let coarse = stencil(h)?;
    let fine = stencil(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Which point of a pair is moved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    First,
    Second,
}

/// What is being differenced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Tau,
    Rho,
}

/// Tangential derivative of `tau` or `rho` in one slot (orders 1 and 2).
pub fn fd_partial(
    ds: &BoundaryDistanceDataset,
    q: Quantity,
    slot: Slot,
    order: usize,
    x: f64,
    y: f64,
    h: f64,
) -> Result<f64> {
    let eval = |s: f64| {
        let (a, b) = match slot {
            Slot::First => (s, y),
            Slot::Second => (x, s),
        };
        match q {
            Quantity::Tau => ds.tau(a, b),
            Quantity::Rho => ds.rho(a, b),
        }
    };
    let s = match slot {
        Slot::First => x,
        Slot::Second => y,
    };
    fd_derivative(eval, s, order, h)
}

/// `d/dx (mu - tau)(x, y)` at `x != y` with steps `beta |x - y|`.
///
/// The deficit behaves like `|x - y|^3` near the diagonal; the difference is
/// taken on `deficit / |x - y|^3`.
pub fn deficit_slope(ds: &BoundaryDistanceDataset, x: f64, y: f64) -> Result<f64> {
    let r = x - y;
    if r == 0.0 {
        return Err(Error::InvalidInput(
            "tangential derivative needs distinct points".into(),
        ));
    }
    let h = ds.policy.beta * r.abs();
    let e = |s: f64| Ok(ds.deficit(s, y)? / (s - y).abs().powi(3));
    let e0 = e(x)?;
    let de = fd_derivative(e, x, 1, h)?;
    Ok(de * r.abs().powi(3) + 3.0 * e0 * r * r.abs())
}

/// `d tau / dx1` at a pair `x != y`.
pub fn tangential_derivative_tau(ds: &BoundaryDistanceDataset, x: f64, y: f64) -> Result<f64> {
    Ok(ds.g11.sqrt() * (x - y).signum() - deficit_slope(ds, x, y)?)
}

/// `1 - g^11 (d tau / dx1)^2`, formed without cancellation.
pub fn transversality(ds: &BoundaryDistanceDataset, x: f64, y: f64) -> Result<f64> {
    let delta = (x - y).signum() * deficit_slope(ds, x, y)? / ds.g11.sqrt();
    Ok(delta * (2.0 - delta))
}

/// Inward normal derivative of `tau` in the first slot.
pub fn normal_derivative_tau(ds: &BoundaryDistanceDataset, x: f64, y: f64) -> Result<f64> {
    let gap = transversality(ds, x, y)?;
    if gap <= ds.policy.transversal_tol {
        return Err(Error::NonTransversal(gap));
    }
    Ok(-gap.sqrt())
}

/// Scan pairs of a 9-point window grid for `mu - tau > tol`.
pub fn detect_nonconcave(
    ds: &BoundaryDistanceDataset,
    tol: f64,
) -> Result<(Verdict, Option<(f64, f64, f64)>)> {
    let grid = ds.window_grid(9);
    let mut best: Option<(f64, f64, f64)> = None;
    for (i, &a) in grid.iter().enumerate() {
        for &b in &grid[i + 1..] {
            let gap = ds.mu(a, b) - ds.tau(a, b)?;
            if best.is_none_or(|(_, _, g)| gap > g) {
                best = Some((a, b, gap));
            }
        }
    }
    match best {
        Some(w) if w.2 > tol => Ok((Verdict::NonconcaveEvidence, Some(w))),
        _ => Ok((Verdict::NoEvidence, None)),
    }
}

/// `|g^11 (d tau/dx1)^2 + (d tau/dxn)^2 - 1|` with the tangential derivative
/// from finite differences and the normal one from the chord itself. `None`
/// for tabulated data or pairs without a chord.
pub fn eikonal_residual(ds: &BoundaryDistanceDataset, x: f64, y: f64) -> Result<Option<f64>> {
    let Some(chord) = ds.chord(x, y)? else {
        return Ok(None);
    };
    if ds.metric().is_none() {
        return Ok(None);
    }
    let w = chord.normal_speed;
    Ok(Some((w * w - transversality(ds, x, y)?).abs()))
}
