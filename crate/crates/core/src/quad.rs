//! Globally adaptive Gauss-Kronrod (7/15) quadrature for vector integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-14,
            rel_tol: 1e-13,
            max_intervals: 2000,
        }
    }
}

struct Piece<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Piece<N> {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl<const N: usize> Eq for Piece<N> {}
impl<const N: usize> PartialOrd for Piece<N> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<const N: usize> Ord for Piece<N> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn kronrod<const N: usize, F>(f: &F, a: f64, b: f64) -> Result<Piece<N>>
where
    F: Fn(f64) -> Result<[f64; N]>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    for i in 0..N {
        k[i] = WGK[7] * fc[i];
        g[i] = WG[3] * fc[i];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx)?;
        let f2 = f(c + dx)?;
        for i in 0..N {
            let s = f1[i] + f2[i];
            k[i] += WGK[j] * s;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * s;
            }
        }
    }
    let mut error = 0.0f64;
    let mut value = [0.0; N];
    for i in 0..N {
        value[i] = k[i] * h;
        let e = ((k[i] - g[i]) * h).abs();
        // differences at the rounding level of the rule carry no information
        if e > 50.0 * f64::EPSILON * value[i].abs() {
            error = error.max(e);
        }
    }
    Ok(Piece { a, b, value, error })
}

/// Integrate `f` over `[a, b]`; every component must meet the tolerance.
pub fn integrate<const N: usize, F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<[f64; N]>
where
    F: Fn(f64) -> Result<[f64; N]>,
{
    if a == b {
        return Ok([0.0; N]);
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod(&f, a, b)?;
    let mut total = first.value;
    let mut err = first.error;
    heap.push(first);
    let mut count = 1;
    loop {
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if err <= opts.abs_tol.max(opts.rel_tol * scale) {
            break;
        }
        if count >= opts.max_intervals {
            return Err(Error::ToleranceFailure(err));
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval cannot be split further; accept
            heap.push(worst);
            break;
        }
        let left = kronrod(&f, worst.a, mid)?;
        let right = kronrod(&f, mid, worst.b)?;
        for i in 0..N {
            total[i] += left.value[i] + right.value[i] - worst.value[i];
        }
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        count += 1;
    }
    // re-sum to shed accumulated cancellation
    let mut sum = [0.0; N];
    for p in heap.iter() {
        for i in 0..N {
            sum[i] += p.value[i];
        }
    }
    Ok(sum)
}

/// Integrate over consecutive cells `[pts[i], pts[i+1]]` and sum.
pub fn integrate_cells<const N: usize, F>(f: F, pts: &[f64], opts: &QuadOptions) -> Result<[f64; N]>
where
    F: Fn(f64) -> Result<[f64; N]>,
{
    let mut sum = [0.0; N];
    for w in pts.windows(2) {
        let v = integrate(&f, w[0], w[1], opts)?;
        for i in 0..N {
            sum[i] += v[i];
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_trig() {
        let opts = QuadOptions::default();
        let [v] = integrate(|x| Ok([x.powi(6)]), 0.0, 2.0, &opts).unwrap();
        assert!((v - 128.0 / 7.0).abs() < 1e-12);
        let [s, c] =
            integrate(|x| Ok([x.sin(), x.cos()]), 0.0, std::f64::consts::PI, &opts).unwrap();
        assert!((s - 2.0).abs() < 1e-13 && c.abs() < 1e-13);
    }

    #[test]
    fn sqrt_endpoint_singularity_is_handled() {
        let opts = QuadOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 5000,
        };
        let [v] = integrate(|x: f64| Ok([1.0 / x.sqrt()]), 0.0, 1.0, &opts).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn integrand_errors_propagate() {
        let r = integrate(
            |x| {
                if x > 0.5 {
                    Err(Error::Grazing { clairaut: x })
                } else {
                    Ok([x])
                }
            },
            0.0,
            1.0,
            &QuadOptions::default(),
        );
        assert!(r.is_err());
    }
}
