//! Geodesics of the warped strip.
//!
//! Two independent routes are provided: direct integration of the geodesic
//! equations with boundary events, and quadrature of the first integrals
//! that follow from conservation of the Clairaut constant `c = x' f(y)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate_until, OdeOptions, State};
use crate::quad::{integrate, integrate_cells, QuadOptions};
use crate::warp::{Side, StripMetric};

/// Position and coordinate velocity of a geodesic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl GeodesicState {
    pub fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        GeodesicState { x, y, vx, vy }
    }

    /// Unit-speed state at a point with launch angle `theta` measured from
    /// the `x` axis in an orthonormal frame.
    pub fn from_angle(m: &StripMetric, x: f64, y: f64, theta: f64) -> Self {
        let f = m.warp().value(y);
        GeodesicState {
            x,
            y,
            vx: theta.cos() / f.sqrt(),
            vy: theta.sin(),
        }
    }

    /// `f vx^2 + vy^2 - 1`.
    pub fn speed_residual(&self, m: &StripMetric) -> f64 {
        m.warp().value(self.y) * self.vx * self.vx + self.vy * self.vy - 1.0
    }

    fn to_array(self) -> State {
        [self.x, self.y, self.vx, self.vy]
    }

    fn from_array(s: State) -> Self {
        GeodesicState {
            x: s[0],
            y: s[1],
            vx: s[2],
            vy: s[3],
        }
    }
}

/// Where and how a geodesic leaves the strip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitEvent {
    pub length: f64,
    pub exit_x: f64,
    pub exit_side: Side,
    pub exit_vx: f64,
    pub exit_vy: f64,
    pub clairaut_drift: f64,
}

pub fn clairaut(m: &StripMetric, s: &GeodesicState) -> f64 {
    s.vx * m.warp().value(s.y)
}

fn geodesic_rhs(m: &StripMetric) -> impl Fn(&State) -> State + '_ {
    move |s: &State| {
        let (f, df) = m.warp().value_slope(s[1]);
        [s[2], s[3], -(df / f) * s[2] * s[3], 0.5 * df * s[2] * s[2]]
    }
}

/// Default integration options for a strip: steps no longer than `L/16`,
/// nor than the knot spacing of a sampled warp, whose curvature jumps at
/// every knot.
pub fn default_ode_options(m: &StripMetric) -> OdeOptions {
    let mut h_max = m.length() / 16.0;
    if m.warp().is_sampled() {
        let knots = m.warp().breakpoints();
        h_max = knots.windows(2).fold(h_max, |h, w| h.min(w[1] - w[0]));
    }
    OdeOptions {
        h_max,
        ..OdeOptions::default()
    }
}

fn check_unit_speed(m: &StripMetric, s: &GeodesicState) -> Result<()> {
    let r = s.speed_residual(m);
    if r.abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "initial state is not unit speed (residual {r:e})"
        )));
    }
    Ok(())
}

/// Integrate until the geodesic first reaches `y = 0` or `y = L`.
pub fn integrate_to_boundary(
    m: &StripMetric,
    s0: &GeodesicState,
    opts: &OdeOptions,
) -> Result<ExitEvent> {
    check_unit_speed(m, s0)?;
    let l = m.length();
    m.warp().check_domain(s0.y)?;
    let on_bottom = s0.y <= 0.0;
    let on_top = s0.y >= l;
    if (on_bottom && s0.vy <= 0.0) || (on_top && s0.vy >= 0.0) {
        return Err(Error::InvalidInput(
            "boundary state must point into the strip".into(),
        ));
    }
    let y0 = s0.y.clamp(0.0, l);
    let c0 = clairaut(m, s0);
    let bottom = |s: &State| s[1];
    let top = move |s: &State| l - s[1];
    let mut drift = 0.0f64;
    let hit = integrate_until(
        geodesic_rhs(m),
        [s0.x, y0, s0.vx, s0.vy],
        &[&bottom, &top],
        opts,
        |s| drift = drift.max((s[2] * m.warp().value(s[1]) - c0).abs()),
    )?;
    let side = if hit.index == 0 {
        Side::Bottom
    } else {
        Side::Top
    };
    let target = m.side_coordinate(side);
    let mut st = GeodesicState::from_array(hit.state);
    // one Newton step onto the boundary line
    let dt = (target - st.y) / st.vy;
    let rhs = geodesic_rhs(m)(&hit.state);
    st.x += st.vx * dt;
    st.vx += rhs[2] * dt;
    st.vy += rhs[3] * dt;
    st.y = target;
    drift = drift.max((clairaut(m, &st) - c0).abs());
    Ok(ExitEvent {
        length: hit.t + dt,
        exit_x: st.x,
        exit_side: side,
        exit_vx: st.vx,
        exit_vy: st.vy,
        clairaut_drift: drift,
    })
}

fn crossing_quad_options() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-14,
        max_intervals: 4000,
    }
}

/// Exit time and displacement of the geodesic entering at `y = 0` with
/// tangential velocity `u0`, by quadrature. Returns `(T, dx)`.
pub fn crossing_integrals(m: &StripMetric, u0: f64) -> Result<(f64, f64)> {
    crossing_integrals_for(m, u0 * m.warp().value(0.0))
}

/// Crossing integrals for Clairaut constant `c`.
pub fn crossing_integrals_for(m: &StripMetric, c: f64) -> Result<(f64, f64)> {
    let w = m.warp();
    let c2 = c * c;
    let (fmin, _) = w.range();
    if c2 >= fmin {
        return Err(Error::Grazing { clairaut: c });
    }
    let integrand = |y: f64| {
        let f = w.value(y);
        let d = f - c2;
        if !(d > 0.0) {
            return Err(Error::Grazing { clairaut: c });
        }
        let s = (f / d).sqrt();
        Ok([s, c / f * s])
    };
    let [t, dx] = integrate_cells(integrand, &w.breakpoints(), &crossing_quad_options())?;
    Ok((t, dx))
}

pub fn crossing_time(m: &StripMetric, u0: f64) -> Result<f64> {
    Ok(crossing_integrals(m, u0)?.0)
}

pub fn crossing_displacement(m: &StripMetric, u0: f64) -> Result<f64> {
    Ok(crossing_integrals(m, u0)?.1)
}

/// A geodesic leaving `y = 0` and returning to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chord {
    pub clairaut: f64,
    /// `dy/dt` at the boundary.
    pub normal_speed: f64,
    /// Turning depth `y*`.
    pub depth: f64,
    pub length: f64,
    pub displacement: f64,
    /// `length - clairaut * displacement`, integrated on its own.
    pub excess: f64,
    /// `sqrt f(0) * displacement - length`: how much shorter the chord is than
    /// the boundary segment.
    pub deficit: f64,
}

impl Chord {
    fn trivial(f0: f64) -> Self {
        Chord {
            clairaut: f0.sqrt(),
            normal_speed: 0.0,
            depth: 0.0,
            length: 0.0,
            displacement: 0.0,
            excess: 0.0,
            deficit: 0.0,
        }
    }
}

/// First `y > 0` with `f(y) - f(0) + gap <= 0`, bracketed on a grid that is
/// geometric near the boundary and uniform further in.
fn turning_depth(m: &StripMetric, gap: f64) -> Result<f64> {
    let w = m.warp();
    let l = m.length();
    let g = |y: f64| w.increment(y) + gap;
    let cell = l / 4096.0;
    let mut lo = 0.0;
    let mut hi = f64::NAN;
    let mut y = l * 1e-15;
    while y < l {
        if g(y) <= 0.0 {
            hi = y;
            break;
        }
        lo = y;
        y = if y < cell { 2.0 * y } else { (y + cell).min(l) };
        if y >= l && g(l) <= 0.0 {
            hi = l;
            break;
        }
    }
    if hi.is_nan() {
        return Err(Error::NoTurningPoint(w.value(0.0) - gap));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let depth = 0.5 * (lo + hi);
    let slope = w.value_slope(depth).1;
    if slope.abs() < 1e-8 {
        return Err(Error::DegenerateTurning {
            depth,
            slope: slope.abs(),
        });
    }
    Ok(depth)
}

fn chord_from_gap(m: &StripMetric, gap: f64) -> Result<Chord> {
    let w = m.warp();
    let f0 = w.value(0.0);
    if gap == 0.0 {
        return Ok(Chord::trivial(f0));
    }
    let depth = turning_depth(m, gap)?;
    // Use the chord that turns exactly at the computed depth: its constant
    // differs from the requested one only by rounding, and the integrand
    // then vanishes exactly at the turning point.
    let gap = -w.increment(depth);
    let c = w.value(depth).sqrt();
    let integrand = |u: f64| {
        let y = depth - u * u;
        let d = w.difference(depth, -u * u);
        if !(d > 0.0) {
            return Ok([0.0, 0.0]);
        }
        let s = 4.0 * u / d.sqrt();
        let sf = w.value(y).sqrt();
        Ok([s * sf, s * c / sf])
    };
    let opts = QuadOptions {
        abs_tol: 1e-16,
        rel_tol: 2e-15,
        max_intervals: 400,
    };
    let [length, displacement] = integrate(integrand, 0.0, depth.sqrt(), &opts)?;
    // 2 int sqrt((f - c^2) / f) dy has no endpoint singularity and is small,
    // so it keeps full relative accuracy where length and c * displacement
    // nearly cancel
    let excess_integrand = |u: f64| {
        let d = w.difference(depth, -u * u);
        if !(d > 0.0) {
            return Ok([0.0]);
        }
        Ok([4.0 * u * (d / w.value(depth - u * u)).sqrt()])
    };
    let fine = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-15,
        max_intervals: 400,
    };
    let [excess] = integrate(excess_integrand, 0.0, depth.sqrt(), &fine)?;
    let deficit = gap / (f0.sqrt() + c) * displacement - excess;
    Ok(Chord {
        clairaut: c,
        normal_speed: (gap / f0).sqrt(),
        depth,
        length,
        displacement,
        excess,
        deficit,
    })
}

/// Same-side chord with Clairaut constant `c` (`0 <= c < sqrt f(0)`).
pub fn chord_same_side(m: &StripMetric, c: f64) -> Result<Chord> {
    let f0 = m.warp().value(0.0);
    if !(c >= 0.0 && c * c < f0) {
        return Err(Error::InvalidInput(format!(
            "Clairaut constant {c} outside [0, sqrt f(0))"
        )));
    }
    chord_from_gap(m, f0 - c * c)
}

/// Same-side chord launched with normal speed `w = dy/dt` in `(0, 1)`.
///
/// Parametrizing by `w` keeps shallow chords accurate: the gap
/// `f(0) - c^2 = f(0) w^2` is formed without cancellation.
pub fn chord_with_normal_speed(m: &StripMetric, w: f64) -> Result<Chord> {
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::InvalidInput(format!(
            "normal speed {w} outside (0, 1)"
        )));
    }
    let f0 = m.warp().value(0.0);
    chord_from_gap(m, f0 * w * w)
}

/// The chord joining `x1` and `x2` on `y = 0`. Its `length` is taken as
/// `c d + excess`, which absorbs the residual mismatch in displacement to
/// first order.
pub fn chord_between(m: &StripMetric, x1: f64, x2: f64) -> Result<Chord> {
    let d = (x2 - x1).abs();
    let f0 = m.warp().value(0.0);
    if d == 0.0 {
        return Ok(Chord::trivial(f0));
    }
    let df0 = m.warp().value_slope(0.0).1;
    let no_chord = |e: Error| match e {
        Error::NoTurningPoint(_) | Error::DegenerateTurning { .. } => Error::NoChord(d),
        other => other,
    };
    let disp = |w: f64| chord_with_normal_speed(m, w).map_err(no_chord);
    let guess = if df0 < 0.0 {
        d * df0.abs() / (4.0 * f0.sqrt())
    } else {
        0.1
    };
    let mut hi = (1.5 * guess).min(0.5);
    let mut chi = disp(hi)?;
    while chi.displacement < d {
        if hi >= 0.999_999 {
            return Err(Error::NoChord(d));
        }
        hi = (2.0 * hi).min(0.999_999);
        chi = disp(hi)?;
    }
    let mut lo = 0.5 * hi;
    let mut clo = disp(lo)?;
    while clo.displacement >= d {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::NoChord(d));
        }
        clo = disp(lo)?;
    }
    // Illinois regula falsi on X(w) - d
    let (mut flo, mut fhi) = (clo.displacement - d, chi.displacement - d);
    let mut side = 0i8;
    let mut best = if -flo < fhi { clo } else { chi };
    for _ in 0..200 {
        let w = (lo * fhi - hi * flo) / (fhi - flo);
        let w = if w > lo && w < hi { w } else { 0.5 * (lo + hi) };
        let ch = disp(w)?;
        let r = ch.displacement - d;
        if r.abs() < (best.displacement - d).abs() {
            best = ch;
        }
        if r.abs() <= 4.0 * f64::EPSILON * d || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if r < 0.0 {
            lo = w;
            flo = r;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = w;
            fhi = r;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    // stationary in the Clairaut constant, so root-finding residue enters
    // only at second order
    let mut out = best;
    let gap = f0 * out.normal_speed * out.normal_speed;
    out.length = out.clairaut * d + out.excess;
    out.deficit = gap / (f0.sqrt() + out.clairaut) * d - out.excess;
    out.displacement = d;
    Ok(out)
}

/// Shooting options for [`interior_distance`].
#[derive(Debug, Clone, Copy)]
pub struct ShootingOptions {
    pub ode: OdeOptions,
    /// Arrival mismatch in `y` accepted as converged.
    pub tol: f64,
    pub max_iter: usize,
}

impl ShootingOptions {
    pub fn for_metric(m: &StripMetric) -> Self {
        ShootingOptions {
            ode: OdeOptions {
                rtol: 1e-13,
                atol: 1e-15,
                h_max: m.length() / 32.0,
                t_max: 1e3,
                event_tol: 1e-14,
            },
            tol: 1e-13,
            max_iter: 200,
        }
    }
}

enum Arrival {
    Reached { y: f64, length: f64 },
    Below,
    Above,
}

fn shoot(
    m: &StripMetric,
    p: (f64, f64),
    xq: f64,
    theta: f64,
    opts: &OdeOptions,
) -> Result<Arrival> {
    let l = m.length();
    let s0 = GeodesicState::from_angle(m, p.0, p.1, theta);
    let reach = move |s: &State| xq - s[0];
    let bottom = |s: &State| s[1];
    let top = move |s: &State| l - s[1];
    let hit = match integrate_until(
        geodesic_rhs(m),
        s0.to_array(),
        &[&reach, &bottom, &top],
        opts,
        |_| {},
    ) {
        Ok(h) => h,
        Err(Error::Trapped(_)) => return Ok(Arrival::Below),
        Err(e) => return Err(e),
    };
    match hit.index {
        0 => {
            let s = hit.state;
            let dt = (xq - s[0]) / s[2];
            Ok(Arrival::Reached {
                y: s[1] + s[3] * dt,
                length: hit.t + dt,
            })
        }
        1 => Ok(Arrival::Below),
        _ => Ok(Arrival::Above),
    }
}

/// Distance between interior points by shooting over the launch angle.
pub fn interior_distance(
    m: &StripMetric,
    p: (f64, f64),
    q: (f64, f64),
    opts: &ShootingOptions,
) -> Result<f64> {
    m.warp().check_domain(p.1)?;
    m.warp().check_domain(q.1)?;
    let dx = q.0 - p.0;
    if dx == 0.0 {
        return Ok((q.1 - p.1).abs());
    }
    // reflect so the target lies to the right
    let (p, q) = if dx < 0.0 {
        ((-p.0, p.1), (-q.0, q.1))
    } else {
        (p, q)
    };
    let fp = m.warp().value(p.1);
    let theta0 = (q.1 - p.1).atan2(fp.sqrt() * (q.0 - p.0));
    let lim = std::f64::consts::FRAC_PI_2 - 1e-9;
    let eval = |th: f64| -> Result<(f64, Option<f64>)> {
        Ok(match shoot(m, p, q.0, th, &opts.ode)? {
            Arrival::Reached { y, length } => (y - q.1, Some(length)),
            Arrival::Below => (-f64::INFINITY, None),
            Arrival::Above => (f64::INFINITY, None),
        })
    };
    let mut iters = 0;
    let (mut a, mut b) = (theta0, theta0);
    let (r0, len0) = eval(theta0)?;
    if let Some(len) = len0.filter(|_| r0.abs() <= opts.tol) {
        return Ok(len);
    }
    let (mut ra, mut rb) = (r0, r0);
    let mut step = 0.05;
    while !(ra < 0.0 && rb > 0.0) {
        iters += 1;
        if iters > opts.max_iter {
            return Err(Error::ShootingFailed(
                "could not bracket the launch angle".into(),
            ));
        }
        if ra >= 0.0 {
            a = (a - step).max(-lim);
            ra = eval(a)?.0;
        }
        if rb <= 0.0 {
            b = (b + step).min(lim);
            rb = eval(b)?.0;
        }
        step *= 2.0;
    }
    // bisection until both ends arrive, then secant with bracketing safeguard
    let mut last = None;
    while iters < opts.max_iter {
        iters += 1;
        let th = if ra.is_finite() && rb.is_finite() {
            let s = b - rb * (b - a) / (rb - ra);
            if s > a && s < b {
                s
            } else {
                0.5 * (a + b)
            }
        } else {
            0.5 * (a + b)
        };
        let (r, len) = eval(th)?;
        if let Some(len) = len {
            if r.abs() <= opts.tol || b - a <= 1e-15 {
                return Ok(len);
            }
        }
        // Illinois rule: halve the far residual when one end moves twice running
        let low = r < 0.0;
        if last == Some(low) {
            if low {
                rb *= 0.5;
            } else {
                ra *= 0.5;
            }
        }
        last = Some(low);
        if low {
            a = th;
            ra = r;
        } else {
            b = th;
            rb = r;
        }
    }
    Err(Error::ShootingFailed(format!(
        "no convergence within {} iterations",
        opts.max_iter
    )))
}

/// Compare `2|v|^2` against the second difference of `rho(c(t), c(0))`
/// along the coordinate line `c(t) = p + t v`. Returns `(lhs, rhs)`.
pub fn hessian_rho_check(
    m: &StripMetric,
    p: (f64, f64),
    v: (f64, f64),
    h: f64,
) -> Result<(f64, f64)> {
    let f = m.warp().value(p.1);
    let lhs = 2.0 * (f * v.0 * v.0 + v.1 * v.1);
    let opts = ShootingOptions::for_metric(m);
    let plus = interior_distance(m, (p.0 + h * v.0, p.1 + h * v.1), p, &opts)?;
    let minus = interior_distance(m, (p.0 - h * v.0, p.1 - h * v.1), p, &opts)?;
    Ok((lhs, (plus * plus + minus * minus) / (h * h)))
}
