//! Long-range-correlated Gaussian noise as a superposition of OU modes.
//!
//! The spectral weight `r(p) = λ(p) / |p|^{2α}` on `S = (-r_s, r_s)` together
//! with the decay rates `μ|p|^{2β}` define the covariance
//! `R(t) = ∫_S r(p) exp(-μ|p|^{2β} t) dp`. The integrable singularity at the
//! origin is removed with the substitution `q = |p|^{1-2α}`, after which
//! `r(p) dp = λ(p) / (1-2α) dq` on each half of `S`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, GaussLegendre};

/// Even weight `λ(p)`, given as a constant or a polynomial in `p²`.
#[derive(Debug, Clone, PartialEq)]
pub enum Lambda {
    Const(f64),
    /// `λ(p) = Σ_j c_j p^{2j}`
    PolyP2(Vec<f64>),
}

impl Lambda {
    pub fn eval(&self, p: f64) -> f64 {
        match self {
            Lambda::Const(v) => *v,
            Lambda::PolyP2(c) => {
                let p2 = p * p;
                c.iter().rev().fold(0.0, |acc, &cj| acc * p2 + cj)
            }
        }
    }

    pub fn at_zero(&self) -> f64 {
        self.eval(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    pub r_s: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub lambda: Lambda,
}

/// Decay exponent of `R` and the Hurst index of the renormalized integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaExponent {
    pub gamma: f64,
    pub hurst: f64,
    /// `γ < 2`, the integrated noise admits an fBm rescaling.
    pub renormalizable: bool,
}

impl SpectralDensity {
    pub fn new(r_s: f64, alpha: f64, beta: f64, mu: f64, lambda: Lambda) -> Result<Self> {
        let d = Self {
            r_s,
            alpha,
            beta,
            mu,
            lambda,
        };
        d.validate()?;
        Ok(d)
    }

    /// `r_s = 1`, `λ ≡ 1`, `α = 1/4`, `β = 1/2`, `μ = 1`.
    pub fn baseline() -> Self {
        Self {
            r_s: 1.0,
            alpha: 0.25,
            beta: 0.5,
            mu: 1.0,
            lambda: Lambda::Const(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if !(self.r_s > 0.0 && self.r_s.is_finite()) {
            return bad(format!("r_s must be positive, got {}", self.r_s));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return bad(format!("alpha must lie in (0, 1/2), got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if let Lambda::PolyP2(c) = &self.lambda {
            if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
                return bad("lambda polynomial needs finite coefficients".into());
            }
        }
        if self.lambda.at_zero() == 0.0 || !self.lambda.at_zero().is_finite() {
            return bad("lambda(0) must be nonzero".into());
        }
        // sample λ ≥ 0 on S
        for k in 0..=256 {
            let p = self.r_s * k as f64 / 256.0;
            if self.lambda.eval(p) < 0.0 {
                return bad(format!("lambda is negative at p = {p}"));
            }
        }
        Ok(())
    }

    pub fn r(&self, p: f64) -> f64 {
        self.lambda.eval(p) / p.abs().powf(2.0 * self.alpha)
    }

    pub fn decay_rate(&self, p: f64) -> f64 {
        self.mu * p.abs().powf(2.0 * self.beta)
    }

    fn q_max(&self) -> f64 {
        self.r_s.powf(1.0 - 2.0 * self.alpha)
    }

    fn p_of_q(&self, q: f64) -> f64 {
        q.powf(1.0 / (1.0 - 2.0 * self.alpha))
    }

    /// `∫_S r(p) f(|p|) dp` by adaptive quadrature in the smoothing variable.
    pub fn spectral_integral<F: Fn(f64) -> f64>(&self, f: F, rel_tol: f64) -> Result<f64> {
        self.validate()?;
        let jac = 1.0 / (1.0 - 2.0 * self.alpha);
        let half = integrate_adaptive(
            |q| {
                let p = self.p_of_q(q);
                self.lambda.eval(p) * jac * f(p)
            },
            0.0,
            self.q_max(),
            0.0,
            rel_tol,
        )?;
        Ok(2.0 * half)
    }

    pub fn covariance(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Parameter(format!(
                "covariance needs t >= 0, got {t}"
            )));
        }
        self.validate()?;
        self.spectral_integral(|p| (-self.decay_rate(p) * t).exp(), 1e-12)
    }

    pub fn gamma_exponent(&self) -> GammaExponent {
        let gamma = (1.0 - 2.0 * self.alpha) / (2.0 * self.beta);
        GammaExponent {
            gamma,
            hurst: 1.0 - gamma / 2.0,
            renormalizable: gamma < 2.0,
        }
    }

    /// Constant in `R(t) ~ c₀ t^{-γ}` as `t → ∞`.
    pub fn c0(&self) -> f64 {
        let g = self.gamma_exponent().gamma;
        self.lambda.at_zero() * statrs::function::gamma::gamma(g) / (self.beta * self.mu.powf(g))
    }

    pub fn discretize(&self, n_modes: usize) -> Result<NoiseDiscretization> {
        self.validate()?;
        if n_modes < 2 || n_modes % 2 != 0 {
            return Err(Error::Parameter(format!(
                "n_modes must be even and >= 2, got {n_modes}"
            )));
        }
        let half = n_modes / 2;
        let rule = GaussLegendre::on_interval(half, 0.0, self.q_max());
        let jac = 1.0 / (1.0 - 2.0 * self.alpha);
        let mut nodes = Vec::with_capacity(n_modes);
        let mut weights = Vec::with_capacity(n_modes);
        // negative half, mirrored so that nodes ascend
        for k in (0..half).rev() {
            let p = self.p_of_q(rule.nodes[k]);
            nodes.push(-p);
            weights.push(rule.weights[k] * self.lambda.eval(p) * jac);
        }
        for k in 0..half {
            let p = self.p_of_q(rule.nodes[k]);
            nodes.push(p);
            weights.push(rule.weights[k] * self.lambda.eval(p) * jac);
        }
        let decay_rates = nodes.iter().map(|&p| self.decay_rate(p)).collect();
        Ok(NoiseDiscretization {
            nodes,
            weights,
            decay_rates,
        })
    }
}

/// Finite set of OU modes; `weights` already include `r(p_k)` and the Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDiscretization {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub decay_rates: Vec<f64>,
}

impl NoiseDiscretization {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Covariance of the discretized noise.
    pub fn covariance(&self, t: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.decay_rates)
            .map(|(&w, &c)| w * (-c * t.abs()).exp())
            .sum()
    }

    /// `Σ_k w_k f(c_k)`: a spectral integral evaluated mode by mode.
    pub fn mode_sum<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.weights
            .iter()
            .zip(&self.decay_rates)
            .map(|(&w, &c)| w * f(c))
            .sum()
    }

    /// Largest relative discrepancy against the exact covariance on `times`.
    pub fn reconstruction_error(&self, density: &SpectralDensity, times: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &t in times {
            let exact = density.covariance(t)?;
            worst = worst.max((self.covariance(t) - exact).abs() / exact.abs());
        }
        Ok(worst)
    }

    /// Fails with a resolution error when `R` is not reproduced to `tol`
    /// at `t ∈ {0, 0.5, 1, 2}`.
    pub fn check_reconstruction(&self, density: &SpectralDensity, tol: f64) -> Result<f64> {
        let err = self.reconstruction_error(density, &[0.0, 0.5, 1.0, 2.0])?;
        if err > tol {
            return Err(Error::Resolution(format!(
                "{} modes reproduce R(t) only to {err:.3e} (need {tol:.1e})",
                self.len()
            )));
        }
        Ok(err)
    }

    pub fn init_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> NoiseState {
        let modes = self
            .weights
            .iter()
            .map(|&w| {
                let z: f64 = rng.sample(StandardNormal);
                w.sqrt() * z
            })
            .collect();
        NoiseState { t: 0.0, modes }
    }

    pub fn propagator(&self, dt: f64) -> Result<Propagator> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Parameter(format!(
                "noise step needs dt > 0, got {dt}"
            )));
        }
        let decay = self.decay_rates.iter().map(|&c| (-c * dt).exp()).collect();
        let innovation_sd = self
            .weights
            .iter()
            .zip(&self.decay_rates)
            .map(|(&w, &c)| (w * -(-2.0 * c * dt).exp_m1()).sqrt())
            .collect();
        Ok(Propagator {
            dt,
            decay,
            innovation_sd,
        })
    }
}

/// Precomputed exact OU transition for a fixed step.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub dt: f64,
    pub decay: Vec<f64>,
    pub innovation_sd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseState {
    pub t: f64,
    pub modes: Vec<f64>,
}

impl NoiseState {
    pub fn zeros(n: usize) -> Self {
        Self {
            t: 0.0,
            modes: vec![0.0; n],
        }
    }

    /// Advance every mode by the exact conditional law, drawing in node order.
    pub fn advance<R: Rng + ?Sized>(&mut self, prop: &Propagator, rng: &mut R) {
        for ((v, &a), &s) in self
            .modes
            .iter_mut()
            .zip(&prop.decay)
            .zip(&prop.innovation_sd)
        {
            let z: f64 = rng.sample(StandardNormal);
            *v = a * *v + s * z;
        }
        self.t += prop.dt;
    }

    /// `v(t) = Σ_k V_k`.
    pub fn sample_v(&self) -> f64 {
        self.modes.iter().sum()
    }
}

/// One exact step of size `dt`.
pub fn step<R: Rng + ?Sized>(
    disc: &NoiseDiscretization,
    state: &NoiseState,
    dt: f64,
    rng: &mut R,
) -> Result<NoiseState> {
    let prop = disc.propagator(dt)?;
    let mut next = state.clone();
    next.advance(&prop, rng);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::path_rng;

    fn closed_form(t: f64) -> f64 {
        if t == 0.0 {
            4.0
        } else {
            2.0 * (std::f64::consts::PI / t).sqrt() * statrs::function::erf::erf(t.sqrt())
        }
    }

    #[test]
    fn baseline_covariance_matches_closed_form() {
        let d = SpectralDensity::baseline();
        for t in [0.0, 0.1, 1.0, 3.3, 50.0, 1e4] {
            let r = d.covariance(t).unwrap();
            assert!((r - closed_form(t)).abs() < 1e-10 * closed_form(t), "t={t}");
        }
    }

    #[test]
    fn discretization_is_symmetric_and_accurate() {
        let d = SpectralDensity::baseline();
        let disc = d.discretize(64).unwrap();
        assert_eq!(disc.len(), 64);
        for k in 0..32 {
            assert_eq!(disc.nodes[k], -disc.nodes[63 - k]);
            assert_eq!(disc.weights[k], disc.weights[63 - k]);
        }
        assert!(disc.nodes.iter().all(|&p| p != 0.0));
        assert!(disc.check_reconstruction(&d, 1e-6).is_ok());
        let coarse = d.discretize(2).unwrap();
        assert_eq!(coarse.nodes[0], -coarse.nodes[1]);
        assert!(d.discretize(3).is_err());
        assert!(d.discretize(0).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(SpectralDensity::new(1.0, 0.5, 0.5, 1.0, Lambda::Const(1.0)).is_err());
        assert!(SpectralDensity::new(0.0, 0.25, 0.5, 1.0, Lambda::Const(1.0)).is_err());
        assert!(SpectralDensity::new(1.0, 0.25, 0.5, 1.0, Lambda::Const(0.0)).is_err());
        assert!(
            SpectralDensity::new(1.0, 0.25, 0.5, 1.0, Lambda::PolyP2(vec![1.0, -2.0])).is_err()
        );
        assert!(SpectralDensity::new(1.0, 0.25, 0.5, 1.0, Lambda::PolyP2(vec![1.0, 0.5])).is_ok());
    }

    #[test]
    fn exponents() {
        let g = SpectralDensity::baseline().gamma_exponent();
        assert!((g.gamma - 0.5).abs() < 1e-15 && (g.hurst - 0.75).abs() < 1e-15);
        let mut d = SpectralDensity::baseline();
        d.beta = 0.125;
        let g = d.gamma_exponent();
        assert!((g.gamma - 2.0).abs() < 1e-15 && !g.renormalizable);
        assert!(
            (SpectralDensity::baseline().c0() - 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-12
        );
    }

    #[test]
    fn propagator_factor_and_degenerate_cases() {
        let disc = NoiseDiscretization {
            nodes: vec![1.0],
            weights: vec![0.0],
            decay_rates: vec![1.0],
        };
        let prop = disc.propagator(0.5).unwrap();
        assert!((prop.decay[0] - (-0.5f64).exp()).abs() < 1e-15);
        assert!(disc.propagator(0.0).is_err());
        let mut rng = path_rng(1, 0);
        let s = disc.init_stationary(&mut rng);
        assert_eq!(s.sample_v(), 0.0);
        let s = NoiseState {
            t: 0.0,
            modes: vec![2.5],
        };
        assert_eq!(s.sample_v(), 2.5);
    }
}
