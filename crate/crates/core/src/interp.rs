//! Monotone piecewise-cubic (PCHIP) interpolation on a strictly increasing grid.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::Grid(format!(
                "interpolation needs matching grids of length >= 2 (got {} and {})",
                n,
                y.len()
            )));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid(
                "interpolation grid must be strictly increasing".into(),
            ));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
        } else {
            for k in 1..n - 1 {
                if del[k - 1] * del[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], del[0], del[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min() && x <= self.x_max()
    }

    fn segment(&self, x: f64) -> usize {
        let k = self.x.partition_point(|&xi| xi <= x);
        k.clamp(1, self.x.len() - 1) - 1
    }

    /// Value at `x`; outside the grid the end cubic is continued.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).0
    }

    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let k = self.segment(x);
        let h = self.x[k + 1] - self.x[k];
        let t = (x - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k], self.d[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = (6.0 * t2 - 6.0 * t) / h;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t2 + 6.0 * t) / h;
        let dh11 = 3.0 * t2 - 2.0 * t;
        let dv = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
        (v, dv)
    }

    /// Value at `x`, erroring outside the tabulated range.
    pub fn eval_checked(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::Coverage(format!(
                "{x} outside [{}, {}]",
                self.x_min(),
                self.x_max()
            )));
        }
        Ok(self.eval(x))
    }
}

/// Second-order finite-difference derivative of tabulated data on a
/// nonuniform grid (three-point stencils, one-sided at the ends).
pub fn gradient_nonuniform(x: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 3 || f.len() != n {
        return Err(Error::Grid(
            "derivative needs at least three matching points".into(),
        ));
    }
    let three = |x0: f64, x1: f64, x2: f64, at: f64, f0: f64, f1: f64, f2: f64| {
        // derivative of the quadratic through the three points
        let l0 = (2.0 * at - x1 - x2) / ((x0 - x1) * (x0 - x2));
        let l1 = (2.0 * at - x0 - x2) / ((x1 - x0) * (x1 - x2));
        let l2 = (2.0 * at - x0 - x1) / ((x2 - x0) * (x2 - x1));
        l0 * f0 + l1 * f1 + l2 * f2
    };
    let mut d = Vec::with_capacity(n);
    d.push(three(x[0], x[1], x[2], x[0], f[0], f[1], f[2]));
    for i in 1..n - 1 {
        d.push(three(
            x[i - 1],
            x[i],
            x[i + 1],
            x[i],
            f[i - 1],
            f[i],
            f[i + 1],
        ));
    }
    d.push(three(
        x[n - 3],
        x[n - 2],
        x[n - 1],
        x[n - 1],
        f[n - 3],
        f[n - 2],
        f[n - 1],
    ));
    Ok(d)
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_lines() {
        let x = [0.0, 0.5, 1.7, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let p = Pchip::new(&x, &y).unwrap();
        for (&xi, &yi) in x.iter().zip(&y) {
            assert!((p.eval(xi) - yi).abs() < 1e-14);
        }
        let (v, d) = p.eval_with_derivative(2.2);
        assert!((v - 3.4).abs() < 1e-13 && (d - 2.0).abs() < 1e-13);
    }

    #[test]
    fn preserves_monotonicity() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.0, 0.0, 1.0, 1.0, 5.0];
        let p = Pchip::new(&x, &y).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let v = p.eval(i as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn nonuniform_derivative_is_exact_for_quadratics() {
        let x = [0.1, 0.3, 0.35, 0.9, 2.0];
        let f: Vec<f64> = x.iter().map(|v| 3.0 * v * v - v + 2.0).collect();
        let d = gradient_nonuniform(&x, &f).unwrap();
        for (xi, di) in x.iter().zip(&d) {
            assert!((di - (6.0 * xi - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Pchip::new(&[0.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(Pchip::new(&[0.0], &[1.0]).is_err());
        let p = Pchip::new(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(p.eval_checked(3.5).is_err());
    }
}
