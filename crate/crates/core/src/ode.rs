//! Dormand-Prince 5(4) integration of autonomous systems with dense output
//! and terminal events.

use crate::error::{Error, Result};

pub type State = [f64; 4];

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step allowed.
    pub h_max: f64,
    /// Integration stops with [`Error::Trapped`] beyond this time.
    pub t_max: f64,
    /// Event times are bisected on the dense output down to this width.
    pub event_tol: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-11,
            atol: 1e-13,
            h_max: 0.1,
            t_max: 1e4,
            event_tol: 1e-12,
        }
    }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    rcont: [State; 5],
}

impl DenseStep {
    pub fn eval(&self, t: f64) -> State {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        std::array::from_fn(|i| {
            r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])))
        })
    }
}

/// Terminal event reached.
#[derive(Debug, Clone, Copy)]
pub struct EventHit {
    pub index: usize,
    pub t: f64,
    pub state: State,
}

fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(a, k)| a * k[i]).sum::<f64>())
}

/// Integrate `y' = rhs(y)` from `y0` until one of `events` turns negative.
///
/// Each event function must be non-negative at `y0`. `observe` sees every
/// accepted state (not the event state).
pub fn integrate_until<R, O>(
    rhs: R,
    y0: State,
    events: &[&dyn Fn(&State) -> f64],
    opts: &OdeOptions,
    mut observe: O,
) -> Result<EventHit>
where
    R: Fn(&State) -> State,
    O: FnMut(&State),
{
    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = rhs(&y);
    let norm = k1.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
    let mut h = (0.01 / norm).min(opts.h_max);
    let mut rejects = 0usize;
    loop {
        if t > opts.t_max {
            return Err(Error::Trapped(opts.t_max));
        }
        if h < 1e-15 * (1.0 + t.abs()) {
            return Err(Error::ToleranceFailure(h));
        }
        let k2 = rhs(&axpy(&y, h, &[(A21, &k1)]));
        let k3 = rhs(&axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(&axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(&axpy(
            &y,
            h,
            &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
        ));
        let k6 = rhs(&axpy(
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ));
        let y1 = axpy(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = rhs(&y1);
        let mut err = 0.0;
        for i in 0..4 {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sk) * (e / sk);
        }
        let err = (err / 4.0).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            rejects += 1;
            if rejects > 100 {
                return Err(Error::ToleranceFailure(h));
            }
            continue;
        }
        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        if err > 1.0 {
            h *= fac.min(1.0);
            rejects += 1;
            if rejects > 1000 {
                return Err(Error::ToleranceFailure(h));
            }
            continue;
        }
        rejects = 0;
        let step = {
            let ydiff: State = std::array::from_fn(|i| y1[i] - y[i]);
            let bspl: State = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
            DenseStep {
                t0: t,
                h,
                rcont: [
                    y,
                    ydiff,
                    bspl,
                    std::array::from_fn(|i| ydiff[i] - h * k7[i] - bspl[i]),
                    std::array::from_fn(|i| {
                        h * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i])
                    }),
                ],
            }
        };
        if let Some((index, _)) = events.iter().enumerate().find(|(_, g)| g(&y1) < 0.0) {
            let g = events[index];
            let (mut lo, mut hi) = (t, t + h);
            while hi - lo > opts.event_tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if g(&step.eval(mid)) < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            // earlier events in the same step win
            let mut best = (index, hi);
            for (j, gj) in events.iter().enumerate() {
                if j != index && gj(&step.eval(hi)) < 0.0 {
                    let (mut a, mut b) = (t, hi);
                    while b - a > opts.event_tol {
                        let m = 0.5 * (a + b);
                        if m <= a || m >= b {
                            break;
                        }
                        if gj(&step.eval(m)) < 0.0 {
                            b = m;
                        } else {
                            a = m;
                        }
                    }
                    if b < best.1 {
                        best = (j, b);
                    }
                }
            }
            let tc = if best.0 == index {
                0.5 * (lo + hi)
            } else {
                best.1
            };
            return Ok(EventHit {
                index: best.0,
                t: tc,
                state: step.eval(tc),
            });
        }
        observe(&y1);
        t += h;
        y = y1;
        k1 = k7;
        h = (h * fac).min(opts.h_max);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_event() {
        // x'' = -x from x=0, v=1; x returns below zero at t = pi
        let rhs = |s: &State| [s[1], -s[0], 0.0, 0.0];
        let g = |s: &State| if s[1] < 0.0 { s[0] } else { 1.0 };
        let hit = integrate_until(
            rhs,
            [0.0, 1.0, 0.0, 0.0],
            &[&g],
            &OdeOptions::default(),
            |_| {},
        )
        .unwrap();
        assert!((hit.t - std::f64::consts::PI).abs() < 1e-10, "{}", hit.t);
        assert!((hit.state[1] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn dense_output_is_fifth_order_accurate() {
        // y' = y; measure error of the dense state at every event bisection point
        let rhs = |s: &State| [s[0], 0.0, 0.0, 0.0];
        for target in [0.37f64, 1.111, 2.5] {
            let g = move |s: &State| target.exp() - s[0];
            let opts = OdeOptions {
                rtol: 1e-12,
                atol: 1e-14,
                h_max: 0.5,
                ..Default::default()
            };
            let hit = integrate_until(rhs, [1.0, 0.0, 0.0, 0.0], &[&g], &opts, |_| {}).unwrap();
            assert!((hit.t - target).abs() < 1e-10, "{} vs {target}", hit.t);
        }
    }

    #[test]
    fn trapped_when_no_event() {
        let rhs = |s: &State| [s[1], -s[0], 0.0, 0.0];
        let g = |_: &State| 1.0;
        let opts = OdeOptions {
            t_max: 5.0,
            ..Default::default()
        };
        assert!(matches!(
            integrate_until(rhs, [0.0, 1.0, 0.0, 0.0], &[&g], &opts, |_| {}),
            Err(Error::Trapped(_))
        ));
    }
}
