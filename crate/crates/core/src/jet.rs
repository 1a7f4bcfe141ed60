//! Recovery of the boundary jet `d^k g_11 / dn^k` at the base point of a
//! boundary distance dataset.
//!
//! Write `D[i][j](a, b)` for `d^i/ds^i d^j/dt^j tau((a, s), (b, t))` at
//! `s = t = 0`. Differentiating the eikonal equation
//! `g^11(s) (d_a tau)^2 + (d_s tau)^2 = 1` expresses every `D[i][j]` through
//! lower orders, tangential derivatives of lower orders, and the jet of
//! `g^11` below order `i`. Tangential derivatives come from finite
//! differences of the distance data only.
//!
//! `D[i][j]` blows up like `|a - b|^(1 - i - j)` near the diagonal, so the
//! differences are taken on `|a - b|^(i + j - 1) D[i][j]`, which is smooth.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{
    deficit_slope, detect_nonconcave, eikonal_residual, tangential_derivative_tau,
    BoundaryDistanceDataset, Verdict,
};
use crate::error::{Error, Result};
use crate::series::binomial;
use crate::warp::Side;

/// Derivatives of `1/g` from derivatives of `g`.
pub fn reciprocal_derivatives(g: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(g.len());
    for m in 0..g.len() {
        if m == 0 {
            out.push(1.0 / g[0]);
            continue;
        }
        let s: f64 = (1..=m).map(|l| binomial(m, l) * g[l] * out[m - l]).sum();
        out.push(-s / g[0]);
    }
    out
}

/// Memoized evaluation of the two-point normal derivatives of `tau`.
pub struct NormalDerivatives<'a> {
    ds: &'a BoundaryDistanceDataset,
    ginv: Vec<f64>,
    beta: f64,
    d_memo: HashMap<(usize, usize, u64, u64), f64>,
    p_memo: HashMap<(usize, usize, u64, u64), f64>,
}

impl<'a> NormalDerivatives<'a> {
    /// `jet[m]` is `d^m g_11 / dn^m` at the boundary; orders up to
    /// `jet.len()` become available.
    pub fn new(ds: &'a BoundaryDistanceDataset, jet: &[f64]) -> Self {
        NormalDerivatives {
            ds,
            ginv: reciprocal_derivatives(jet),
            beta: ds.policy().beta,
            d_memo: HashMap::new(),
            p_memo: HashMap::new(),
        }
    }

    /// `D[i][j](a, b)`.
    pub fn d(&mut self, i: usize, j: usize, a: f64, b: f64) -> Result<f64> {
        if i == 0 && j == 0 {
            return self.ds.tau(a, b);
        }
        if i == 0 {
            return self.d(j, 0, b, a);
        }
        let key = (i, j, a.to_bits(), b.to_bits());
        if let Some(v) = self.d_memo.get(&key) {
            return Ok(*v);
        }
        if a == b {
            return Err(Error::InvalidInput(
                "normal derivatives need distinct points".into(),
            ));
        }
        if i > self.ginv.len() {
            return Err(Error::InvalidInput(format!(
                "order {} needs the jet up to order {}",
                i + j,
                i - 1
            )));
        }
        let v = if (i, j) == (1, 0) {
            let g = self.ginv[0];
            let delta = (a - b).signum() * deficit_slope(self.ds, a, b)? * g.sqrt();
            let gap = delta * (2.0 - delta);
            if gap <= self.ds.policy().transversal_tol {
                return Err(Error::NonTransversal(gap));
            }
            -gap.sqrt()
        } else {
            let (m, n) = (i - 1, j);
            let mut sum = 0.0;
            for al in 0..=m {
                if self.ginv[al] == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for p in 0..=m - al {
                    for q in 0..=n {
                        inner += binomial(m - al, p)
                            * binomial(n, q)
                            * self.p(p, q, a, b)?
                            * self.p(m - al - p, n - q, a, b)?;
                    }
                }
                sum += binomial(m, al) * self.ginv[al] * inner;
            }
            for p in 0..=m {
                for q in 0..=n {
                    if (p, q) == (m, n) || (p, q) == (0, 0) {
                        continue;
                    }
                    sum += binomial(m, p)
                        * binomial(n, q)
                        * self.d(p + 1, q, a, b)?
                        * self.d(m - p + 1, n - q, a, b)?;
                }
            }
            let d10 = self.d(1, 0, a, b)?;
            -sum / (2.0 * d10)
        };
        self.d_memo.insert(key, v);
        Ok(v)
    }

    /// `d/da D[i][j](a, b)`.
    pub fn p(&mut self, i: usize, j: usize, a: f64, b: f64) -> Result<f64> {
        let key = (i, j, a.to_bits(), b.to_bits());
        if let Some(v) = self.p_memo.get(&key) {
            return Ok(*v);
        }
        let r = a - b;
        if r == 0.0 {
            return Err(Error::InvalidInput(
                "tangential derivatives need distinct points".into(),
            ));
        }
        if (i, j) == (0, 0) {
            let v = tangential_derivative_tau(self.ds, a, b)?;
            self.p_memo.insert(key, v);
            return Ok(v);
        }
        let k = (i + j) as i32;
        let h = self.beta * r.abs();
        let mut e = |s: f64| -> Result<f64> { Ok((s - b).abs().powi(k - 1) * self.d(i, j, s, b)?) };
        let e0 = e(a)?;
        let c1 = (e(a + h)? - e(a - h)?) / (2.0 * h);
        let c2 = (e(a + 0.5 * h)? - e(a - 0.5 * h)?) / h;
        let de = (4.0 * c2 - c1) / 3.0;
        let v = de * r.abs().powi(1 - k) + (1 - k) as f64 * e0 * r.abs().powi(-k) * r.signum();
        self.p_memo.insert(key, v);
        Ok(v)
    }

    /// `d^i/ds^i d^j/dt^j rho` with `rho = tau^2`.
    pub fn rho(&mut self, i: usize, j: usize, a: f64, b: f64) -> Result<f64> {
        let mut s = 0.0;
        for p in 0..=i {
            for q in 0..=j {
                s += binomial(i, p)
                    * binomial(j, q)
                    * self.d(p, q, a, b)?
                    * self.d(i - p, j - q, a, b)?;
            }
        }
        Ok(s)
    }

    /// `sum_i binom(k, i) d^i/ds^i d^(k-i)/dt^(k-i) rho`: the k-th derivative
    /// of `rho` when both points move inward together.
    pub fn coincident_sum(&mut self, k: usize, a: f64, b: f64) -> Result<f64> {
        let mut s = 0.0;
        for i in 0..=k {
            s += binomial(k, i) * self.rho(i, k - i, a, b)?;
        }
        Ok(s)
    }
}

/// Normal derivatives at one boundary pair, up to second order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointNormalData {
    pub x: f64,
    pub y: f64,
    pub tau: f64,
    pub tau_x: f64,
    pub tau_y: f64,
    pub tau_xx: f64,
    pub tau_xy: f64,
    pub tau_yy: f64,
    pub rho_x: f64,
    pub rho_y: f64,
    pub rho_xx: f64,
    pub rho_xy: f64,
    pub rho_yy: f64,
}

/// First and second normal derivatives of `tau` and `rho` at `(x, y)`, given
/// the recovered first normal derivative `c1` of `g_11`.
pub fn second_normal_derivatives(
    ds: &BoundaryDistanceDataset,
    x: f64,
    y: f64,
    c1: f64,
) -> Result<TwoPointNormalData> {
    let mut nd = NormalDerivatives::new(ds, &[ds.g11(), c1]);
    let g = 1.0 / ds.g11();
    let dg = -c1 / (ds.g11() * ds.g11());
    let tau = ds.tau(x, y)?;
    let px = nd.p(0, 0, x, y)?;
    let py = nd.p(0, 0, y, x)?;
    let tau_x = nd.d(1, 0, x, y)?;
    let tau_y = nd.d(1, 0, y, x)?;
    // only d_xn d_xn tau is unknown in the differentiated eikonal equation
    let tau_xx = -(dg * px * px + 2.0 * g * px * nd.p(1, 0, x, y)?) / (2.0 * tau_x);
    let tau_yy = -(dg * py * py + 2.0 * g * py * nd.p(1, 0, y, x)?) / (2.0 * tau_y);
    // moving y inward: g^11 (d_x1 d_yn tau)(d_x1 tau) + (d_xn d_yn tau)(d_xn tau) = 0
    let tau_xy = -g * px * nd.p(0, 1, x, y)? / tau_x;
    Ok(TwoPointNormalData {
        x,
        y,
        tau,
        tau_x,
        tau_y,
        tau_xx,
        tau_xy,
        tau_yy,
        rho_x: 2.0 * tau * tau_x,
        rho_y: 2.0 * tau * tau_y,
        rho_xx: 2.0 * tau_x * tau_x + 2.0 * tau * tau_xx,
        rho_xy: 2.0 * tau_x * tau_y + 2.0 * tau * tau_xy,
        rho_yy: 2.0 * tau_y * tau_y + 2.0 * tau * tau_yy,
    })
}

/// One recovered order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageEstimate {
    pub value: f64,
    /// Outer step `h` of the stencil.
    pub step: f64,
    /// Difference between the extrapolations from steps `h` and `0.8 h`.
    pub richardson_gap: f64,
}

/// `(W(h) + W(-h)) / (2 h^2)` for a function `W` of the offset from `x0`
/// that vanishes at zero.
pub fn even_stencil<F>(w: F, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    Ok((w(h)? + w(-h)?) / (2.0 * h * h))
}

/// Extrapolate `E(h) = value + sum_p a_p h^p` over the given powers `p`
/// (least squares when there are more levels than unknowns).
pub fn extrapolate(levels: &[(f64, f64)], powers: &[i32]) -> f64 {
    let a = DMatrix::from_fn(levels.len(), powers.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            levels[i].0.powi(powers[j - 1])
        }
    });
    let rhs = DVector::from_iterator(levels.len(), levels.iter().map(|l| l.1));
    let sol = a
        .svd(true, true)
        .solve(&rhs, 0.0)
        .expect("singular vectors were requested");
    sol[0]
}

/// Error terms of the order-`k` stencil. Order 1 only sees the exactly known
/// boundary metric and has the plain even expansion. Higher orders consume
/// recovered values, whose errors leave `W(0) != 0` and add a `1/h^2` term.
fn error_powers(k: usize) -> &'static [i32] {
    if k <= 1 {
        &[2, 4]
    } else {
        &[-2, 2]
    }
}

fn richardson_stage<F>(w: F, h: f64, order: usize, tol: f64) -> Result<StageEstimate>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let steps: Vec<f64> = [1.0, 0.8]
        .iter()
        .flat_map(|&c| [c * h, 0.5 * c * h, 0.25 * c * h])
        .collect();
    let offsets: Vec<f64> = steps.iter().flat_map(|&s| [s, -s]).collect();
    let vals: Vec<f64> = offsets.par_iter().map(|&s| w(s)).collect::<Result<_>>()?;
    let levels: Vec<(f64, f64)> = steps
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, (vals[2 * i] + vals[2 * i + 1]) / (2.0 * s * s)))
        .collect();
    let powers = error_powers(order);
    let value = extrapolate(&levels[..3], powers);
    let check = extrapolate(&levels[3..], powers);
    let gap = (value - check).abs();
    if !(gap <= tol) {
        return Err(Error::FdUnstable { order, gap });
    }
    Ok(StageEstimate {
        value,
        step: h,
        richardson_gap: gap,
    })
}

/// `g_11` at the base point from the boundary distance.
pub fn recover_c0(ds: &BoundaryDistanceDataset) -> f64 {
    let h = 0.5 * ds.eps();
    let x0 = ds.x0();
    let q = |h: f64| (ds.mu(x0, x0 + h) / h).powi(2);
    (4.0 * q(0.5 * h) - q(h)) / 3.0
}

fn require_chords(ds: &BoundaryDistanceDataset, h: f64) -> Result<()> {
    if ds.metric().is_some() {
        for s in [h, -h] {
            if ds.chord(ds.x0() + s, ds.x0())?.is_none() {
                return Err(Error::ConcaveWindow(ds.x0()));
            }
        }
    }
    Ok(())
}

/// First normal derivative of `g_11` from `U(s) = (d_xn rho + d_yn rho)(x0 + s, x0)`.
pub fn recover_c1(ds: &BoundaryDistanceDataset) -> Result<StageEstimate> {
    let h = ds.policy().outer_step(ds.eps(), 1);
    require_chords(ds, h)?;
    let x0 = ds.x0();
    let u = |s: f64| -> Result<f64> {
        let mut nd = NormalDerivatives::new(ds, &[ds.g11()]);
        let tau = ds.tau(x0 + s, x0)?;
        Ok(2.0 * tau * (nd.d(1, 0, x0 + s, x0)? + nd.d(0, 1, x0 + s, x0)?))
    };
    richardson_stage(u, h, 1, ds.policy().unstable_tol(1)).map_err(|e| match e {
        Error::NonTransversal(_) => Error::ConcaveWindow(x0),
        other => other,
    })
}

/// Second normal derivative of `g_11` from
/// `V(s) = (d_xn xn rho + 2 d_xn yn rho + d_yn yn rho)(x0 + s, x0)`.
pub fn recover_c2(ds: &BoundaryDistanceDataset, c1: f64) -> Result<StageEstimate> {
    let h = ds.policy().outer_step(ds.eps(), 2);
    require_chords(ds, h)?;
    let x0 = ds.x0();
    let v = |s: f64| -> Result<f64> {
        let t = second_normal_derivatives(ds, x0 + s, x0, c1)?;
        Ok(t.rho_xx + 2.0 * t.rho_xy + t.rho_yy)
    };
    richardson_stage(v, h, 2, ds.policy().unstable_tol(2))
}

/// Order-`k` normal derivative of `g_11` given `prior[m]` for `m < k`.
pub fn recover_ck(ds: &BoundaryDistanceDataset, prior: &[f64], k: usize) -> Result<StageEstimate> {
    if k == 0 || prior.len() < k {
        return Err(Error::InvalidInput(format!(
            "order {k} needs {k} prior jet values, got {}",
            prior.len()
        )));
    }
    let h = ds.policy().outer_step(ds.eps(), k);
    require_chords(ds, h)?;
    let x0 = ds.x0();
    let w = |s: f64| -> Result<f64> {
        let mut nd = NormalDerivatives::new(ds, &prior[..k]);
        nd.coincident_sum(k, x0 + s, x0)
    };
    richardson_stage(w, h, k, ds.policy().unstable_tol(k))
}

/// Unstabilized stencil value `(W(h) + W(-h)) / (2 h^2)` of order `k`.
pub fn stencil_estimate(
    ds: &BoundaryDistanceDataset,
    prior: &[f64],
    k: usize,
    h: f64,
) -> Result<f64> {
    let x0 = ds.x0();
    even_stencil(
        |s| {
            let mut nd = NormalDerivatives::new(ds, &prior[..k]);
            nd.coincident_sum(k, x0 + s, x0)
        },
        h,
    )
}

/// Recovered entries of a symmetric `n x n` matrix from quadratic-form
/// samples `q = v^T F v`.
pub fn recover_symmetric_tensor(samples: &[(Vec<f64>, f64)], n: usize) -> Result<DMatrix<f64>> {
    let unknowns = n * (n + 1) / 2;
    if n == 0 || samples.len() < unknowns {
        return Err(Error::InvalidInput(format!(
            "need at least {unknowns} samples, got {}",
            samples.len()
        )));
    }
    let mut a = DMatrix::<f64>::zeros(samples.len(), unknowns);
    let mut rhs = DVector::<f64>::zeros(samples.len());
    for (row, (v, q)) in samples.iter().enumerate() {
        if v.len() != n {
            return Err(Error::InvalidInput(format!(
                "sample vector has length {}, expected {n}",
                v.len()
            )));
        }
        let mut col = 0;
        for i in 0..n {
            for j in i..n {
                a[(row, col)] = if i == j {
                    v[i] * v[i]
                } else {
                    2.0 * v[i] * v[j]
                };
                col += 1;
            }
        }
        rhs[row] = *q;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if cond > 1e12 {
        return Err(Error::DegenerateDirections(cond));
    }
    let x = svd
        .solve(&rhs, 0.0)
        .map_err(|_| Error::DegenerateDirections(cond))?;
    let mut f = DMatrix::<f64>::zeros(n, n);
    let mut col = 0;
    for i in 0..n {
        for j in i..n {
            f[(i, j)] = x[col];
            f[(j, i)] = x[col];
            col += 1;
        }
    }
    Ok(f)
}

/// One line of a [`JetReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetOrder {
    pub k: usize,
    pub value: f64,
    pub truth: Option<f64>,
    pub abs_err: Option<f64>,
    pub step: f64,
    pub richardson_gap: f64,
}

/// Result of [`run_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetReport {
    pub x0: f64,
    pub eps: f64,
    pub source: String,
    pub orders: Vec<JetOrder>,
    pub verdict: Verdict,
    pub eikonal_residual_max: Option<f64>,
    /// Why recovery stopped before the requested order, if it did.
    pub stopped: Option<String>,
}

impl JetReport {
    pub fn values(&self) -> Vec<f64> {
        self.orders.iter().map(|o| o.value).collect()
    }
}

/// Pairs tested for the eikonal residual and concavity.
const DETECT_TOL: f64 = 1e-9;

/// Run concavity detection and recover orders `0..=max_order`.
pub fn run_pipeline(ds: &BoundaryDistanceDataset, max_order: usize) -> Result<JetReport> {
    let truth = match ds.metric() {
        Some(m) => Some(m.ground_truth_jet(Side::Bottom, max_order)?.values),
        None => None,
    };
    let order_line = |k: usize, est: StageEstimate| {
        let t = truth.as_ref().map(|t| t[k]);
        JetOrder {
            k,
            value: est.value,
            truth: t,
            abs_err: t.map(|t| (est.value - t).abs()),
            step: est.step,
            richardson_gap: est.richardson_gap,
        }
    };
    let c0 = recover_c0(ds);
    let mut report = JetReport {
        x0: ds.x0(),
        eps: ds.eps(),
        source: if ds.metric().is_some() {
            "oracle".into()
        } else {
            "tabulated".into()
        },
        orders: vec![order_line(
            0,
            StageEstimate {
                value: c0,
                step: 0.5 * ds.eps(),
                richardson_gap: 0.0,
            },
        )],
        verdict: Verdict::NoEvidence,
        eikonal_residual_max: None,
        stopped: None,
    };
    let (verdict, _) = detect_nonconcave(ds, DETECT_TOL)?;
    report.verdict = verdict;
    if verdict == Verdict::NoEvidence {
        if max_order > 0 {
            report.stopped =
                Some("no evidence of a non-concave boundary point in the window".into());
        }
        return Ok(report);
    }
    if ds.metric().is_some() {
        let grid = ds.window_grid(9);
        let mut worst = 0.0f64;
        let beta = ds.policy().beta;
        for &a in &grid {
            for &b in &grid {
                // the tangential stencil moves `a` by up to `beta |a - b|`
                if a == b || (a - ds.x0()).abs() + beta * (a - b).abs() > ds.eps() {
                    continue;
                }
                if let Some(r) = eikonal_residual(ds, a, b)? {
                    worst = worst.max(r);
                }
            }
        }
        report.eikonal_residual_max = Some(worst);
    }
    let mut jet = vec![c0];
    for k in 1..=max_order {
        let est = match k {
            1 => recover_c1(ds),
            2 => recover_c2(ds, jet[1]),
            _ => recover_ck(ds, &jet, k),
        };
        match est {
            Ok(est) => {
                jet.push(est.value);
                report.orders.push(order_line(k, est));
            }
            Err(e) if e.is_numerical() => {
                report.stopped = Some(format!("order {k}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}
