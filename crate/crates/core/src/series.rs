//! Truncated Taylor arithmetic.
//!
//! Analytic warp profiles are written once against [`Real`] and evaluated
//! either on plain `f64`, on [`Dual`] numbers (value and slope, used in the
//! geodesic right-hand side) or on [`Series`] (any number of derivatives,
//! used for ground-truth jets).

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Minimal field-like interface shared by `f64`, [`Dual`] and [`Series`].
pub trait Real:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    /// Constant with the same truncation order as `self`.
    fn lift(&self, c: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn recip(&self) -> Self;

    fn tanh(&self) -> Self {
        // stable for both signs
        if self.value() >= 0.0 {
            let e = (self.clone() * -2.0).exp();
            (e.lift(1.0) - e.clone()) / (e + 1.0)
        } else {
            let e = (self.clone() * 2.0).exp();
            (e.clone() - 1.0) / (e + 1.0)
        }
    }

    /// Reflection `c - self`.
    fn rsub(&self, c: f64) -> Self {
        -(self.clone()) + c
    }
}

impl Real for f64 {
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn recip(&self) -> Self {
        1.0 / *self
    }
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
}

/// First-order jet: value and derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn variable(x: f64) -> Self {
        Dual { v: x, d: 1.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }
}
impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            d: self.d - o.d,
        }
    }
}
impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
        }
    }
}
impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let q = self.v / o.v;
        Dual {
            v: q,
            d: (self.d - q * o.d) / o.v,
        }
    }
}
impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            d: -self.d,
        }
    }
}
impl Add<f64> for Dual {
    type Output = Dual;
    fn add(self, c: f64) -> Dual {
        Dual {
            v: self.v + c,
            d: self.d,
        }
    }
}
impl Sub<f64> for Dual {
    type Output = Dual;
    fn sub(self, c: f64) -> Dual {
        Dual {
            v: self.v - c,
            d: self.d,
        }
    }
}
impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, c: f64) -> Dual {
        Dual {
            v: self.v * c,
            d: self.d * c,
        }
    }
}

impl Real for Dual {
    fn lift(&self, c: f64) -> Self {
        Dual { v: c, d: 0.0 }
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn exp(&self) -> Self {
        let e = self.v.exp();
        Dual {
            v: e,
            d: e * self.d,
        }
    }
    fn sin(&self) -> Self {
        Dual {
            v: self.v.sin(),
            d: self.v.cos() * self.d,
        }
    }
    fn cos(&self) -> Self {
        Dual {
            v: self.v.cos(),
            d: -self.v.sin() * self.d,
        }
    }
    fn recip(&self) -> Self {
        let r = 1.0 / self.v;
        Dual {
            v: r,
            d: -r * r * self.d,
        }
    }
    fn tanh(&self) -> Self {
        let t = self.v.tanh();
        Dual {
            v: t,
            d: (1.0 - t * t) * self.d,
        }
    }
}

/// Truncated power series `sum c_k t^k`, `k < len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    coeffs: Vec<f64>,
}

impl Series {
    /// The independent variable `x + t` carried to `order` derivatives.
    pub fn variable(x: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = x;
        if order > 0 {
            coeffs[1] = 1.0;
        }
        Series { coeffs }
    }

    pub fn constant(c: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = c;
        Series { coeffs }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty());
        Series { coeffs }
    }

    /// Build from derivative values `f^(k)(x)`.
    pub fn from_derivatives(derivs: &[f64]) -> Self {
        let mut fact = 1.0;
        let coeffs = derivs
            .iter()
            .enumerate()
            .map(|(k, d)| {
                if k > 0 {
                    fact *= k as f64;
                }
                d / fact
            })
            .collect();
        Series { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `f^(k)` for k = 0..=order.
    pub fn derivatives(&self) -> Vec<f64> {
        let mut fact = 1.0;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k > 0 {
                    fact *= k as f64;
                }
                c * fact
            })
            .collect()
    }

    fn zip(&self, o: &Series, f: impl Fn(f64, f64) -> f64) -> Series {
        debug_assert_eq!(self.coeffs.len(), o.coeffs.len());
        Series {
            coeffs: self
                .coeffs
                .iter()
                .zip(&o.coeffs)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }
}

impl Add for Series {
    type Output = Series;
    fn add(self, o: Series) -> Series {
        self.zip(&o, |a, b| a + b)
    }
}
impl Sub for Series {
    type Output = Series;
    fn sub(self, o: Series) -> Series {
        self.zip(&o, |a, b| a - b)
    }
}
impl Mul for Series {
    type Output = Series;
    fn mul(self, o: Series) -> Series {
        let n = self.coeffs.len();
        let mut coeffs = vec![0.0; n];
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c = (0..=k).map(|i| self.coeffs[i] * o.coeffs[k - i]).sum();
        }
        Series { coeffs }
    }
}
impl Div for Series {
    type Output = Series;
    fn div(self, o: Series) -> Series {
        self * o.recip()
    }
}
impl Neg for Series {
    type Output = Series;
    fn neg(self) -> Series {
        Series {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}
impl Add<f64> for Series {
    type Output = Series;
    fn add(mut self, c: f64) -> Series {
        self.coeffs[0] += c;
        self
    }
}
impl Sub<f64> for Series {
    type Output = Series;
    fn sub(mut self, c: f64) -> Series {
        self.coeffs[0] -= c;
        self
    }
}
impl Mul<f64> for Series {
    type Output = Series;
    fn mul(mut self, c: f64) -> Series {
        self.coeffs.iter_mut().for_each(|a| *a *= c);
        self
    }
}

impl Real for Series {
    fn lift(&self, c: f64) -> Self {
        Series::constant(c, self.order())
    }
    fn value(&self) -> f64 {
        self.coeffs[0]
    }
    fn exp(&self) -> Self {
        let a = &self.coeffs;
        let n = a.len();
        let mut e = vec![0.0; n];
        e[0] = a[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|i| i as f64 * a[i] * e[k - i]).sum();
            e[k] = s / k as f64;
        }
        Series { coeffs: e }
    }
    fn sin(&self) -> Self {
        sin_cos(self).0
    }
    fn cos(&self) -> Self {
        sin_cos(self).1
    }
    fn recip(&self) -> Self {
        let a = &self.coeffs;
        let n = a.len();
        let mut b = vec![0.0; n];
        b[0] = 1.0 / a[0];
        for k in 1..n {
            let s: f64 = (1..=k).map(|i| a[i] * b[k - i]).sum();
            b[k] = -s / a[0];
        }
        Series { coeffs: b }
    }
}

fn sin_cos(x: &Series) -> (Series, Series) {
    let a = &x.coeffs;
    let n = a.len();
    let mut s = vec![0.0; n];
    let mut c = vec![0.0; n];
    s[0] = a[0].sin();
    c[0] = a[0].cos();
    for k in 1..n {
        let ds: f64 = (1..=k).map(|i| i as f64 * a[i] * c[k - i]).sum();
        let dc: f64 = (1..=k).map(|i| i as f64 * a[i] * s[k - i]).sum();
        s[k] = ds / k as f64;
        c[k] = -dc / k as f64;
    }
    (Series { coeffs: s }, Series { coeffs: c })
}

/// Binomial coefficient as f64.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_series_matches_derivatives() {
        let x = Series::variable(0.3, 5);
        let d = x.exp().derivatives();
        for v in d {
            assert!((v - 0.3f64.exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn cos_of_double_angle() {
        // d^k/dy^k cos(2y) at 0: 1, 0, -4, 0, 16
        let y = Series::variable(0.0, 4);
        let d = (y * 2.0).cos().derivatives();
        let want = [1.0, 0.0, -4.0, 0.0, 16.0];
        for (a, b) in d.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn recip_and_tanh() {
        let y = Series::variable(0.0, 3);
        // 1 - tanh y: derivatives 1, -1, 0, 2
        let d = y.tanh().rsub(1.0).derivatives();
        let want = [1.0, -1.0, 0.0, 2.0];
        for (a, b) in d.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let y = Series::variable(2.0, 2);
        let r = y.recip().derivatives();
        assert!((r[1] + 0.25).abs() < 1e-15);
        assert!((r[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn dual_agrees_with_series() {
        let f = |t: f64| {
            let s = Series::variable(t, 1);
            let d = Dual::variable(t);
            let fs = (s.clone() * s.clone()).exp().tanh() / (s.cos() + 3.0);
            let fd = (d * d).exp().tanh() / (d.cos() + 3.0);
            (fs.derivatives(), fd)
        };
        for t in [-0.7, 0.1, 1.3] {
            let (s, d) = f(t);
            assert!((s[0] - d.v).abs() < 1e-14);
            assert!((s[1] - d.d).abs() < 1e-13);
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(3, 0), 1.0);
        assert_eq!(binomial(3, 4), 0.0);
    }
}
