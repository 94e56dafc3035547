//! Renormalization of the integrated noise towards fractional Brownian motion.

use rand::Rng;

use crate::error::{Error, Result};
use crate::noise::{NoiseDiscretization, SpectralDensity};
use crate::oscillator::{noise_path, DEFAULT_DT_FAST};

/// `σ(ε) = √L·ε^γ`, or `√L·ε|ln ε|^{1/2}` when `γ = 1`.
pub fn sigma_eps(eps: f64, gamma: f64, l: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::Domain(format!(
            "gamma must lie in (0, 2), got {gamma}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, 1), got {eps}"
        )));
    }
    if !(l > 0.0) {
        return Err(Error::Domain(format!(
            "normalization must be positive, got {l}"
        )));
    }
    let s = if gamma == 1.0 {
        eps * (-eps.ln()).sqrt()
    } else {
        eps.powf(gamma)
    };
    Ok(l.sqrt() * s)
}

/// `σ_H² = 1/(H|2H−1|)`, and 1 at `H = 1/2`.
pub fn sigma_h_sq(hurst: f64) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::Domain(format!(
            "Hurst index must lie in (0, 1), got {hurst}"
        )));
    }
    if hurst == 0.5 {
        return Ok(1.0);
    }
    Ok(1.0 / (hurst * (2.0 * hurst - 1.0).abs()))
}

pub fn fbm_cov(hurst: f64, s: f64, t: f64) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::Domain(format!(
            "Hurst index must lie in (0, 1), got {hurst}"
        )));
    }
    if s < 0.0 || t < 0.0 {
        return Err(Error::Domain("fBm covariance needs s, t >= 0".into()));
    }
    let h2 = 2.0 * hurst;
    Ok(0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2)))
}

/// Target of the renormalized integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbmTarget {
    pub gamma: f64,
    pub hurst: f64,
    pub sigma_h_sq: f64,
    /// Constant folded into `σ(ε)`.
    pub c0: f64,
}

impl FbmTarget {
    /// Rejects `γ > 1`: the integrated covariance of a nonnegative spectral
    /// weight is strictly positive, so the centering needed there is unavailable.
    pub fn for_density(density: &SpectralDensity) -> Result<Self> {
        let g = density.gamma_exponent();
        if !(g.gamma > 0.0 && g.gamma <= 1.0) {
            return Err(Error::Domain(format!(
                "gamma = {} is outside (0, 1]: the regime 1 < gamma < 2 requires \
                 ∫R = 0, impossible for a nonnegative spectral weight",
                g.gamma
            )));
        }
        Ok(Self {
            gamma: g.gamma,
            hurst: g.hurst,
            sigma_h_sq: sigma_h_sq(g.hurst)?,
            c0: density.c0(),
        })
    }

    pub fn sigma(&self, eps: f64) -> Result<f64> {
        sigma_eps(eps, self.gamma, self.c0)
    }
}

/// `u^ε(t) = σ(ε)^{-1} ∫₀ᵗ v(s/ε²) ds` on `t_grid`.
pub fn integrate_u_eps<R: Rng + ?Sized>(
    density: &SpectralDensity,
    disc: &NoiseDiscretization,
    eps: f64,
    t_grid: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let target = FbmTarget::for_density(density)?;
    let sigma = target.sigma(eps)?;
    let p = noise_path(disc, eps, t_grid, DEFAULT_DT_FAST, rng)?;
    Ok(p.integral.iter().map(|v| v / sigma).collect())
}
