//! Interpolation on sampled data: finite-difference weights on arbitrary
//! nodes, a shape-preserving cubic Hermite interpolant, and not-a-knot cubic
//! splines (1-D and tensor-product 2-D).

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};

/// Finite-difference weights for derivatives `0..=max_order` at `z` using the
/// given nodes (Fornberg's recursion). `w[j][k]` multiplies `f(nodes[j])` in
/// the k-th derivative.
pub fn fornberg_weights(z: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; max_order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c
}

/// Index range of the `width` nodes nearest to `z` (clipped at the ends).
fn stencil(xs: &[f64], z: f64, width: usize) -> std::ops::Range<usize> {
    let n = xs.len();
    let width = width.min(n);
    let i = xs.partition_point(|&x| x < z);
    let start = i.saturating_sub(width / 2).min(n - width);
    start..start + width
}

/// Piecewise cubic Hermite interpolant that preserves monotonicity of the
/// data on every monotone run.
///
/// Node slopes start from a fourth-order finite-difference estimate and are
/// then limited (Hyman's filter) wherever the neighbouring secants share a
/// sign; nodes next to a flat secant get slope 0. At discrete extrema the
/// high-order estimate is kept so that smooth peaks falling between nodes are
/// not clipped.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidInput(
                "abscissae and values differ in length".into(),
            ));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidInput("need at least two samples".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "sample abscissae must be strictly increasing".into(),
            ));
        }
        if ys.iter().chain(&xs).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample".into()));
        }
        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut slopes = Vec::with_capacity(n);
        for i in 0..n {
            let r = stencil(&xs, xs[i], 5);
            let w = fornberg_weights(xs[i], &xs[r.clone()], 1);
            let d: f64 = r.clone().zip(&w).map(|(j, wj)| wj[1] * ys[j]).sum();
            slopes.push(d);
        }
        for i in 0..n {
            let left = if i > 0 { Some(secants[i - 1]) } else { None };
            let right = if i + 1 < n { Some(secants[i]) } else { None };
            slopes[i] = match (left, right) {
                (Some(a), Some(b)) => {
                    if a == 0.0 || b == 0.0 {
                        0.0
                    } else if a * b > 0.0 {
                        limit(slopes[i], a.signum(), 3.0 * a.abs().min(b.abs()))
                    } else {
                        slopes[i]
                    }
                }
                (Some(s), None) | (None, Some(s)) => {
                    if s == 0.0 {
                        0.0
                    } else {
                        limit(slopes[i], s.signum(), 3.0 * s.abs())
                    }
                }
                (None, None) => unreachable!(),
            };
        }
        Ok(MonotoneCubic { xs, ys, slopes })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    fn locate(&self, x: f64) -> usize {
        let n = self.xs.len();
        self.xs.partition_point(|&v| v <= x).clamp(1, n - 1) - 1
    }

    /// Value and first derivative of the interpolant. Outside the grid the end
    /// cubics are extended.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let i = self.locate(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1;
        let dh00 = 6.0 * t2 - 6.0 * t;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = -6.0 * t2 + 6.0 * t;
        let dh11 = 3.0 * t2 - 2.0 * t;
        let dv = (dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1) / h;
        (v, dv)
    }

    /// Finite-difference derivative of order `k` from the five samples
    /// nearest to `x`.
    pub fn sample_derivative(&self, x: f64, k: usize) -> f64 {
        let r = stencil(&self.xs, x, 5);
        let w = fornberg_weights(x, &self.xs[r.clone()], k);
        r.zip(&w).map(|(j, wj)| wj[k] * self.ys[j]).sum()
    }
}

fn limit(d: f64, sign: f64, cap: f64) -> f64 {
    sign * (sign * d).max(0.0).min(cap)
}

/// Not-a-knot cubic spline on a uniform grid, stored through its second
/// derivatives.
#[derive(Debug, Clone)]
pub struct UniformSplineSolver {
    n: usize,
    lu: LU<f64, Dyn, Dyn>,
}

impl UniformSplineSolver {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidInput(
                "not-a-knot spline needs at least 4 nodes".into(),
            ));
        }
        let mut a = DMatrix::<f64>::zeros(n, n);
        a[(0, 0)] = 1.0;
        a[(0, 1)] = -2.0;
        a[(0, 2)] = 1.0;
        for i in 1..n - 1 {
            a[(i, i - 1)] = 1.0;
            a[(i, i)] = 4.0;
            a[(i, i + 1)] = 1.0;
        }
        a[(n - 1, n - 3)] = 1.0;
        a[(n - 1, n - 2)] = -2.0;
        a[(n - 1, n - 1)] = 1.0;
        Ok(UniformSplineSolver { n, lu: a.lu() })
    }

    /// Second derivatives times h^2 for the given node values.
    pub fn curvatures(&self, ys: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut rhs = DVector::<f64>::zeros(n);
        for i in 1..n - 1 {
            rhs[i] = 6.0 * (ys[i + 1] - 2.0 * ys[i] + ys[i - 1]);
        }
        let m = self
            .lu
            .solve(&rhs)
            .expect("not-a-knot system is nonsingular");
        m.iter().copied().collect()
    }
}

/// Evaluate a uniform-grid spline from node values and scaled curvatures.
pub fn eval_uniform_spline(x0: f64, h: f64, ys: &[f64], m: &[f64], x: f64) -> f64 {
    let n = ys.len();
    let i = (((x - x0) / h).floor() as isize).clamp(0, n as isize - 2) as usize;
    let b = (x - (x0 + i as f64 * h)) / h;
    let a = 1.0 - b;
    a * ys[i] + b * ys[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) / 6.0
}

/// Tensor-product not-a-knot cubic spline on a uniform square grid.
#[derive(Debug, Clone)]
pub struct TensorSpline {
    origin: f64,
    step: f64,
    values: Vec<Vec<f64>>,
    row_curv: Vec<Vec<f64>>,
    solver: UniformSplineSolver,
}

impl TensorSpline {
    /// `values[i][j]` is the sample at `(origin + i*step, origin + j*step)`.
    pub fn new(origin: f64, step: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.len();
        if values.iter().any(|r| r.len() != n) {
            return Err(Error::GridMismatch(
                "tensor spline grid must be square".into(),
            ));
        }
        let solver = UniformSplineSolver::new(n)?;
        let row_curv = values.iter().map(|r| solver.curvatures(r)).collect();
        Ok(TensorSpline {
            origin,
            step,
            values,
            row_curv,
            solver,
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let col: Vec<f64> = self
            .values
            .iter()
            .zip(&self.row_curv)
            .map(|(r, m)| eval_uniform_spline(self.origin, self.step, r, m, y))
            .collect();
        let m = self.solver.curvatures(&col);
        eval_uniform_spline(self.origin, self.step, &col, &m, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_central_stencils() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[0][1] + 0.5).abs() < 1e-15 && (w[2][1] - 0.5).abs() < 1e-15);
        assert!((w[0][2] - 1.0).abs() < 1e-15 && (w[1][2] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn monotone_data_gives_monotone_interpolant() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let ys = vec![0.0, 0.0, 0.0, 0.1, 0.2, 5.0, 5.1, 5.1, 5.1, 6.0, 9.0, 9.0];
        let p = MonotoneCubic::new(xs, ys).unwrap();
        let mut last = f64::NEG_INFINITY;
        for k in 0..=1100 {
            let (v, _) = p.eval(k as f64 * 0.01);
            assert!(v >= last - 1e-14, "overshoot at {}", k as f64 * 0.01);
            last = v;
        }
    }

    #[test]
    fn rejects_unordered_grid() {
        assert!(MonotoneCubic::new(vec![0.0, 1.0, 1.0], vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn not_a_knot_is_exact_on_cubics() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - 0.3 * x * x * x;
        let h = 0.1;
        let ys: Vec<f64> = (0..9).map(|i| f(i as f64 * h)).collect();
        let s = UniformSplineSolver::new(9).unwrap();
        let m = s.curvatures(&ys);
        for x in [0.05, 0.33, 0.71, 0.79] {
            assert!((eval_uniform_spline(0.0, h, &ys, &m, x) - f(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn tensor_spline_exact_on_bicubic() {
        let f = |x: f64, y: f64| x * x * y - 0.5 * y * y * y + x * y + 2.0;
        let h = 0.25;
        let vals: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                (0..6)
                    .map(|j| f(-0.5 + i as f64 * h, -0.5 + j as f64 * h))
                    .collect()
            })
            .collect();
        let t = TensorSpline::new(-0.5, h, vals).unwrap();
        assert!((t.eval(0.1, -0.2) - f(0.1, -0.2)).abs() < 1e-13);
    }
}
