//! Quadrature rules shared by the spectral, orbit and coefficient code.
//!
//! Two families are provided: fixed Gauss–Legendre rules (used to discretize
//! the noise spectrum into a finite set of OU modes) and a globally adaptive
//! Gauss–Kronrod 7/15 integrator for everything that needs a controlled
//! error estimate.

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped onto `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn on_interval(n: usize, a: f64, b: f64) -> Self {
        let (x, w) = gauss_legendre(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Self {
            nodes: x.iter().map(|&t| mid + half * t).collect(),
            weights: w.iter().map(|&wi| half * wi).collect(),
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

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
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7, 15) quadrature on a finite interval.
///
/// Subdivides the interval with the largest error estimate until the summed
/// estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Parameter(format!("non-finite bounds [{a}, {b}]")));
    }
    if a > b {
        return integrate_adaptive(f, b, a, abs_tol, rel_tol).map(|v| -v);
    }
    let (v, e) = kronrod15(&f, a, b);
    let mut segs = vec![(a, b, v, e)];
    let max_segments = 4000;
    loop {
        let total: f64 = segs.iter().map(|s| s.2).sum();
        let err: f64 = segs.iter().map(|s| s.3).sum();
        if !total.is_finite() {
            return Err(Error::Numeric("non-finite integrand value".into()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if segs.len() >= max_segments {
            return Err(Error::Numeric(format!(
                "adaptive quadrature did not converge: estimate {total:e}, error {err:e}"
            )));
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty segment list");
        let (lo, hi, _, _) = segs.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval exhausted at machine precision; accept what we have
            let total: f64 = segs.iter().map(|s| s.2).sum::<f64>() + kronrod15(&f, lo, hi).0;
            return Ok(total);
        }
        let (v1, e1) = kronrod15(&f, lo, mid);
        let (v2, e2) = kronrod15(&f, mid, hi);
        segs.push((lo, mid, v1, e1));
        segs.push((mid, hi, v2, e2));
    }
}

/// Composite Boole (5-point Newton–Cotes) rule on uniformly spaced samples.
///
/// `samples.len() - 1` must be a multiple of four.
pub fn composite_boole(samples: &[f64], h: f64) -> Result<f64> {
    let n = samples.len().saturating_sub(1);
    if n == 0 || n % 4 != 0 {
        return Err(Error::Parameter(format!(
            "Boole rule needs 4k+1 samples, got {}",
            samples.len()
        )));
    }
    let mut acc = 0.0;
    for k in (0..n).step_by(4) {
        acc += 7.0 * samples[k]
            + 32.0 * samples[k + 1]
            + 12.0 * samples[k + 2]
            + 32.0 * samples[k + 3]
            + 7.0 * samples[k + 4];
    }
    Ok(acc * 2.0 * h / 45.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 32, 64] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            let deg = 2 * n - 1;
            let q: f64 = x
                .iter()
                .zip(&w)
                .map(|(&xi, &wi)| wi * xi.powi(deg as i32 - 1))
                .sum();
            // degree deg-1 is even when deg is odd
            let exact = if (deg - 1) % 2 == 0 {
                2.0 / deg as f64
            } else {
                0.0
            };
            assert_relative_eq!(q, exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn nodes_are_symmetric_and_sorted() {
        let (x, _) = gauss_legendre(33);
        for i in 0..33 {
            assert!((x[i] + x[32 - i]).abs() < 1e-15);
        }
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn kronrod_is_exact_for_degree_22() {
        let v = integrate_adaptive(|x| x.powi(22), 0.0, 1.0, 1e-15, 1e-15).unwrap();
        assert_relative_eq!(v, 1.0 / 23.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_peaked_integrands() {
        // ∫_0^1 exp(-q^2 t) dq = √π erf(√t) / (2√t)
        let t = 1.0e4;
        let v = integrate_adaptive(|q| (-q * q * t).exp(), 0.0, 1.0, 1e-14, 1e-12).unwrap();
        let exact = std::f64::consts::PI.sqrt() / (2.0 * t.sqrt());
        assert_relative_eq!(v, exact, max_relative = 1e-11);
    }

    #[test]
    fn boole_rule_is_sixth_order_on_smooth_data() {
        let n = 64;
        let h = 1.0 / n as f64;
        let s: Vec<f64> = (0..=n).map(|k| (k as f64 * h).exp()).collect();
        let v = composite_boole(&s, h).unwrap();
        assert_relative_eq!(v, std::f64::consts::E - 1.0, max_relative = 1e-11);
        assert!(composite_boole(&s[..6], h).is_err());
    }

    #[test]
    fn reversed_bounds_flip_the_sign() {
        let v = integrate_adaptive(|x| 1.0 / x, 1.0, 1e-3, 1e-14, 1e-12).unwrap();
        assert_relative_eq!(v, 1e-3f64.ln(), max_relative = 1e-11);
    }
}
