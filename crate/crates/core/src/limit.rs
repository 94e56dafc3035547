//! Coefficients of the limiting diffusion and its simulation.
//!
//! Every `∫₀^∞ R(u)·(trig) du` is summed mode by mode in closed form: a mode
//! with weight `w` and rate `c` contributes `w/(c - iκ)` to
//! `∫₀^∞ R(u) e^{iκu} du`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hamiltonian::{sample_orbit, trace_orbit, ActionAngleChart};
use crate::interp::{gradient_nonuniform, Pchip};
use crate::noise::NoiseDiscretization;
use crate::quadrature::{composite_boole, integrate_adaptive};

/// Fourier tail tolerance relative to `ã`.
pub const FOURIER_TAIL_TOL: f64 = 1e-6;
/// Positivity floor of the Euler–Maruyama action.
pub const ACTION_FLOOR: f64 = 1e-8;
/// Smallest table action accepted by [`simulate_limit_joint`].
pub const MIN_JOINT_ACTION: f64 = 1e-3;

/// `D₁₁ = ∫₀^∞ R(z) cos z dz`.
pub fn d11(disc: &NoiseDiscretization) -> f64 {
    disc.mode_sum(|c| c / (c * c + 1.0))
}

/// Limit covariance of `(w₁, w₂)`; the off-diagonal entries vanish.
pub fn d_matrix(disc: &NoiseDiscretization) -> [[f64; 2]; 2] {
    let d = d11(disc);
    [[d, 0.0], [0.0, d]]
}

/// `R_n = 2∫₀^∞ R(u) cos(2πnωu) du`.
pub fn r_n(disc: &NoiseDiscretization, omega: f64, n: i64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain(
            "R_0 diverges for long-range-correlated noise".into(),
        ));
    }
    if !(omega > 0.0) {
        return Err(Error::Domain(format!(
            "frequency must be positive, got {omega}"
        )));
    }
    let k = 2.0 * PI * n as f64 * omega;
    Ok(disc.mode_sum(|c| 2.0 * c / (c * c + k * k)))
}

/// `Σ_k w_k / (c_k - iκ)`, i.e. `∫₀^∞ R(u) e^{iκu} du`.
pub fn g_n(disc: &NoiseDiscretization, kappa: f64) -> Complex64 {
    disc.weights
        .iter()
        .zip(&disc.decay_rates)
        .map(|(&w, &c)| w / Complex64::new(c, -kappa))
        .sum()
}

/// `Σ_k w_k / (c_k - iκ)²`, i.e. `∫₀^∞ u R(u) e^{iκu} du`.
pub fn g2_n(disc: &NoiseDiscretization, kappa: f64) -> Complex64 {
    disc.weights
        .iter()
        .zip(&disc.decay_rates)
        .map(|(&w, &c)| {
            let z = Complex64::new(c, -kappa);
            w / (z * z)
        })
        .sum()
}

/// Coefficient values at one action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCoeffs {
    pub a_bold: f64,
    /// `𝐛` from the bracket form `Σ Re(∂_I a_n ā_n) R_n + ω'` resonance.
    pub b_bold_bracket: f64,
    pub c_cross: f64,
    pub b_tilde: f64,
    pub b_psi: f64,
    /// Part of `b_psi` carried by `ω'(I)`.
    pub b_psi_resonance: f64,
    pub omega: f64,
    pub truncation: usize,
    pub tail_ratio: f64,
}

/// Fourier sums at a chart grid point, doubling the truncation until the
/// tail of `ã` falls below [`FOURIER_TAIL_TOL`].
pub fn coeffs_at(
    chart: &ActionAngleChart,
    disc: &NoiseDiscretization,
    action: f64,
) -> Result<PointCoeffs> {
    let n_full = chart.n_theta / 2 - 1;
    let full = chart.fourier_coeffs(action, n_full)?;
    let omega = full.omega;
    let dw = full.domega_di;
    let mut r = vec![0.0; n_full + 1];
    let mut g = vec![Complex64::new(0.0, 0.0); n_full + 1];
    let mut g2 = vec![Complex64::new(0.0, 0.0); n_full + 1];
    for n in 1..=n_full {
        let kappa = 2.0 * PI * n as f64 * omega;
        r[n] = r_n(disc, omega, n as i64)?;
        g[n] = g_n(disc, kappa);
        g2[n] = g2_n(disc, kappa);
    }
    let term = |n: usize| 2.0 * full.a(n as i64).norm_sqr() * r[n];
    let total: f64 = (1..=n_full).map(term).sum();
    let mut trunc = 32.min(n_full);
    let tail = |nt: usize| (nt + 1..=n_full).map(term).sum::<f64>() / total;
    while tail(trunc) >= FOURIER_TAIL_TOL {
        if trunc == n_full {
            return Err(Error::Resolution(format!(
                "Fourier tail {:.2e} at I = {action} with {n_full} harmonics",
                tail(trunc)
            )));
        }
        trunc = (2 * trunc).min(n_full);
    }
    let mut acc = PointCoeffs {
        a_bold: 0.0,
        b_bold_bracket: 0.0,
        c_cross: 0.0,
        b_tilde: 0.0,
        b_psi: 0.0,
        b_psi_resonance: 0.0,
        omega,
        truncation: trunc,
        tail_ratio: tail(trunc),
    };
    for n in 1..=trunc as i64 {
        for n in [n, -n] {
            let m = n.unsigned_abs() as usize;
            // G at -κ is the conjugate
            let (gn, g2n) = if n > 0 {
                (g[m], g2[m])
            } else {
                (g[m].conj(), g2[m].conj())
            };
            let rn = r[m];
            let (a, b, da, db) = (full.a(n), full.b(n), full.da(n), full.db(n));
            let res = Complex64::new(0.0, 2.0 * PI * n as f64 * dw);
            acc.a_bold += a.norm_sqr() * rn;
            acc.b_bold_bracket += (da * a.conj()).re * rn + (res * a.norm_sqr() * g2n).re;
            acc.c_cross += (a * b.conj()).re * rn;
            acc.b_tilde += b.norm_sqr() * rn;
            let (am, dam) = (full.a(-n), full.da(-n));
            let deriv = ((db * am + b * dam) * gn).re;
            let reso = (res * b * am * g2n).re;
            acc.b_psi += deriv + reso;
            acc.b_psi_resonance += reso;
        }
    }
    Ok(acc)
}

/// Tabulated coefficients of the joint `(I, ψ)` diffusion.
#[derive(Debug, Clone)]
pub struct LimitCoeffs {
    pub d11: f64,
    pub m: f64,
    pub actions: Vec<f64>,
    pub a_bold: Vec<f64>,
    /// `½ dã/dI` by finite differences over the grid.
    pub b_bold: Vec<f64>,
    pub b_bold_bracket: Vec<f64>,
    pub c_cross: Vec<f64>,
    pub b_tilde: Vec<f64>,
    pub b_psi: Vec<f64>,
    pub b_psi_resonance: Vec<f64>,
    pub omega: Vec<f64>,
    pub truncation: Vec<usize>,
    /// Extend with the quadratic closed form outside the table.
    pub quadratic_closed_form: bool,
    interp: Option<CoeffInterp>,
}

#[derive(Debug, Clone)]
struct CoeffInterp {
    a: Pchip,
    b: Pchip,
    c: Pchip,
    bt: Pchip,
    bpsi: Pchip,
}

impl LimitCoeffs {
    fn with_interpolants(mut self) -> Result<Self> {
        let x = &self.actions;
        self.interp = Some(CoeffInterp {
            a: Pchip::new(x, &self.a_bold)?,
            b: Pchip::new(x, &self.b_bold)?,
            c: Pchip::new(x, &self.c_cross)?,
            bt: Pchip::new(x, &self.b_tilde)?,
            bpsi: Pchip::new(x, &self.b_psi)?,
        });
        Ok(self)
    }

    /// Closed-form coefficients of the quadratic oscillator on `grid`.
    pub fn quadratic(d11: f64, grid: &[f64]) -> Result<Self> {
        let m = PI * d11;
        let n = grid.len();
        Self {
            d11,
            m,
            actions: grid.to_vec(),
            a_bold: grid.iter().map(|&i| 4.0 * m * i).collect(),
            b_bold: vec![2.0 * m; n],
            b_bold_bracket: vec![2.0 * m; n],
            c_cross: vec![0.0; n],
            b_tilde: grid.iter().map(|&i| m / (4.0 * PI * PI * i)).collect(),
            b_psi: vec![0.0; n],
            b_psi_resonance: vec![0.0; n],
            omega: vec![1.0 / (2.0 * PI); n],
            truncation: vec![1; n],
            quadratic_closed_form: true,
            interp: None,
        }
        .with_interpolants()
    }

    /// Coefficients that vanish identically on `grid`.
    pub fn zero(grid: &[f64]) -> Result<Self> {
        let n = grid.len();
        Self {
            d11: 0.0,
            m: 0.0,
            actions: grid.to_vec(),
            a_bold: vec![0.0; n],
            b_bold: vec![0.0; n],
            b_bold_bracket: vec![0.0; n],
            c_cross: vec![0.0; n],
            b_tilde: vec![0.0; n],
            b_psi: vec![0.0; n],
            b_psi_resonance: vec![0.0; n],
            omega: vec![1.0; n],
            truncation: vec![0; n],
            quadratic_closed_form: false,
            interp: None,
        }
        .with_interpolants()
    }

    pub fn action_range(&self) -> (f64, f64) {
        (self.actions[0], self.actions[self.actions.len() - 1])
    }

    /// `(ã, 𝐛, c, b̃, b_ψ)` at `action`.
    ///
    /// Below the table `ã` is continued linearly through the origin, `b̃`
    /// as `1/I` and the drifts are held; the quadratic closed form is used
    /// on both sides when flagged.
    pub fn eval(&self, action: f64) -> Result<[f64; 5]> {
        let it = self
            .interp
            .as_ref()
            .expect("interpolants are built on construction");
        let (lo, hi) = self.action_range();
        if self.quadratic_closed_form && !(action >= lo && action <= hi) {
            let m = self.m;
            return Ok([
                4.0 * m * action,
                2.0 * m,
                0.0,
                m / (4.0 * PI * PI * action),
                0.0,
            ]);
        }
        if action > hi || !(action > 0.0) {
            return Err(Error::Coverage(format!(
                "action {action} outside coefficient table [{lo}, {hi}]"
            )));
        }
        if action < lo {
            let s = action / lo;
            return Ok([
                it.a.eval(lo) * s,
                it.b.eval(lo),
                it.c.eval(lo),
                it.bt.eval(lo) / s,
                it.bpsi.eval(lo),
            ]);
        }
        Ok([
            it.a.eval(action),
            it.b.eval(action),
            it.c.eval(action),
            it.bt.eval(action),
            it.bpsi.eval(action),
        ])
    }
}

/// Coefficients from the Fourier data of the chart at the given grid actions.
pub fn fourier_coefficients_route(
    chart: &ActionAngleChart,
    disc: &NoiseDiscretization,
    grid: &[f64],
) -> Result<LimitCoeffs> {
    let pts = grid
        .iter()
        .map(|&i| coeffs_at(chart, disc, i))
        .collect::<Result<Vec<_>>>()?;
    let a_bold: Vec<f64> = pts.iter().map(|p| p.a_bold).collect();
    let b_bold = gradient_nonuniform(grid, &a_bold)?
        .into_iter()
        .map(|d| 0.5 * d)
        .collect();
    let d = d11(disc);
    LimitCoeffs {
        d11: d,
        m: PI * d,
        actions: grid.to_vec(),
        a_bold,
        b_bold,
        b_bold_bracket: pts.iter().map(|p| p.b_bold_bracket).collect(),
        c_cross: pts.iter().map(|p| p.c_cross).collect(),
        b_tilde: pts.iter().map(|p| p.b_tilde).collect(),
        b_psi: pts.iter().map(|p| p.b_psi).collect(),
        b_psi_resonance: pts.iter().map(|p| p.b_psi_resonance).collect(),
        omega: pts.iter().map(|p| p.omega).collect(),
        truncation: pts.iter().map(|p| p.truncation).collect(),
        quadratic_closed_form: chart.model.is_quadratic(),
        interp: None,
    }
    .with_interpolants()
}

/// `(Σ, Λ)` at one energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineIntegral {
    pub energy: f64,
    pub sigma: f64,
    pub lambda: f64,
}

/// `Λ = ∮ dl/|∇H|` and `Σ = 2∫₀^∞ R(u) ∮ ∂_yH(φ_u) ∂_yH dl/|∇H| du` on the
/// level sets `{H = X}`.
///
/// The orbit autocorrelation `C(u)` of `∂_yH` is `T`-periodic with zero
/// mean, so each mode's `u`-integral folds onto one period:
/// `∫₀^∞ e^{-cu} C = ∫₀^T (e^{-cu} - 1) C du / (1 - e^{-cT})`.
pub fn line_integral_route(
    chart: &ActionAngleChart,
    disc: &NoiseDiscretization,
    energies: &[f64],
) -> Result<Vec<LineIntegral>> {
    let model = &chart.model;
    let n = chart.n_theta;
    let omega_floor = 1e-6;
    energies
        .iter()
        .map(|&e| {
            let i = chart.action_of_energy(e)?;
            let (period, xs, ys) = match chart
                .rows
                .iter()
                .find(|r| (r.energy - e).abs() <= 1e-14 * e)
            {
                Some(r) => (r.period, r.x.clone(), r.y.clone()),
                None => {
                    let hint = 1.0 / chart.omega(i)?;
                    let tr = trace_orbit(model, e, Some(hint))?;
                    let (x, y) = sample_orbit(model, &tr, n)?;
                    (tr.period, x, y)
                }
            };
            if 1.0 / period < omega_floor {
                return Err(Error::Numeric(format!("frequency below floor at E = {e}")));
            }
            let g: Vec<f64> = xs
                .iter()
                .zip(&ys)
                .map(|(&x, &y)| model.gradient(x, y).1)
                .collect();
            let h = period / n as f64;
            let mut corr = vec![0.0; n + 1];
            for (lag, c) in corr.iter_mut().take(n).enumerate() {
                *c = h * (0..n).map(|j| g[(j + lag) % n] * g[j]).sum::<f64>();
            }
            corr[n] = corr[0];
            let mut sigma = 0.0;
            for (&w, &c) in disc.weights.iter().zip(&disc.decay_rates) {
                let f: Vec<f64> = (0..=n)
                    .map(|k| (-c * k as f64 * h).exp_m1() * corr[k])
                    .collect();
                sigma += 2.0 * w * composite_boole(&f, h)? / -(-c * period).exp_m1();
            }
            Ok(LineIntegral {
                energy: e,
                sigma,
                lambda: period,
            })
        })
        .collect()
}

/// One joint `(I, ψ)` path recorded on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitPath {
    pub times: Vec<f64>,
    pub action: Vec<f64>,
    pub psi: Vec<f64>,
    pub reflections: usize,
}

/// Euler–Maruyama for `dI = 𝐛 dt + √ã dB¹`, `dψ = b_ψ dt + (c dB¹ + ...)`
/// with the covariance `[[ã, c], [c, b̃]]`.
///
/// The step shrinks so that one standard deviation of the action increment
/// stays below `I/6`; a step that still lands below [`ACTION_FLOOR`] is
/// reflected and counted.
///
/// Refuses tables that start below [`MIN_JOINT_ACTION`], where `b_ψ` may
/// carry an `I^{-1/2}` singularity; see [`simulate_limit_joint_forced`].
pub fn simulate_limit_joint<R: Rng + ?Sized>(
    coeffs: &LimitCoeffs,
    i0: f64,
    psi0: f64,
    t_grid: &[f64],
    dt: f64,
    rng: &mut R,
) -> Result<LimitPath> {
    if coeffs.actions[0] < MIN_JOINT_ACTION {
        return Err(Error::Parameter(format!(
            "coefficient table starts at I = {:e}, below {MIN_JOINT_ACTION:e}; use the forced variant",
            coeffs.actions[0]
        )));
    }
    simulate_limit_joint_forced(coeffs, i0, psi0, t_grid, dt, rng)
}

/// [`simulate_limit_joint`] without the small-action table check.
pub fn simulate_limit_joint_forced<R: Rng + ?Sized>(
    coeffs: &LimitCoeffs,
    i0: f64,
    psi0: f64,
    t_grid: &[f64],
    dt: f64,
    rng: &mut R,
) -> Result<LimitPath> {
    if !(i0 > 0.0) {
        return Err(Error::Parameter(format!(
            "initial action must be positive, got {i0}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if t_grid.iter().any(|&t| t < 0.0) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter(
            "time grid must be nonnegative and increasing".into(),
        ));
    }
    let mut i = i0;
    let mut psi = psi0;
    let mut t = 0.0;
    let mut path = LimitPath {
        times: t_grid.to_vec(),
        action: Vec::with_capacity(t_grid.len()),
        psi: Vec::with_capacity(t_grid.len()),
        reflections: 0,
    };
    for &target in t_grid {
        while t < target {
            let [a, b, c, bt, bpsi] = coeffs.eval(i)?;
            let mut h = dt.min(target - t);
            if a > 0.0 {
                h = h.min(i * i / (36.0 * a));
            }
            let h = h.max(1e-14 * target.max(1.0));
            let (z1, z2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let l11 = a.max(0.0).sqrt();
            let l21 = if l11 > 0.0 { c / l11 } else { 0.0 };
            let l22 = (bt - l21 * l21).max(0.0).sqrt();
            let sq = h.sqrt();
            let mut next = i + b * h + l11 * sq * z1;
            psi += bpsi * h + (l21 * z1 + l22 * z2) * sq;
            if next <= ACTION_FLOOR {
                next = 2.0 * ACTION_FLOOR - next;
                path.reflections += 1;
            }
            i = next;
            t += h;
            if target - t < 1e-12 * target.max(1.0) {
                t = target;
            }
        }
        path.action.push(i);
        path.psi.push(psi);
    }
    Ok(path)
}

/// Exact transition of `I = m·BESQ²` over `dt`.
pub fn besq2_step<R: Rng + ?Sized>(m: f64, i: f64, dt: f64, rng: &mut R) -> f64 {
    let rho = (i / m).sqrt();
    let s = dt.sqrt();
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    m * ((rho + s * z1).powi(2) + (s * z2).powi(2))
}

/// Exact samples of `I_t = m·Z_t`, `Z` a two-dimensional squared Bessel
/// process started at `I₀/m`, on an increasing time grid.
pub fn simulate_bessel_exact<R: Rng + ?Sized>(
    m: f64,
    i0: f64,
    t_grid: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(m > 0.0 && i0 > 0.0) {
        return Err(Error::Parameter(format!(
            "need m > 0 and I0 > 0, got {m}, {i0}"
        )));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    let mut i = i0;
    let mut t = 0.0;
    for &target in t_grid {
        if target < t {
            return Err(Error::Parameter("time grid must be increasing".into()));
        }
        if target > t {
            i = besq2_step(m, i, target - t, rng);
            t = target;
        }
        out.push(i);
    }
    Ok(out)
}

/// `P(I_t ≤ x)` for `I = m·BESQ²` started at `I₀`: `I_t/(m t)` is
/// noncentral χ² with two degrees of freedom and noncentrality `I₀/(m t)`.
pub fn besq2_cdf(m: f64, i0: f64, t: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let y = x / (m * t);
    let half_lam = 0.5 * i0 / (m * t);
    let jmax = (half_lam + 12.0 * half_lam.sqrt() + 60.0) as usize;
    let mut weight = (-half_lam).exp();
    let mut acc = 0.0;
    for j in 0..=jmax {
        if j > 0 {
            weight *= half_lam / j as f64;
        }
        acc += weight * statrs::function::gamma::gamma_lr(1.0 + j as f64, 0.5 * y);
    }
    acc.clamp(0.0, 1.0)
}

/// `p(x) = ∫₁ˣ exp(-2∫₁^ξ 𝐛/ã dν) dξ`.
pub fn scale_function(coeffs: &LimitCoeffs, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "scale function needs x > 0, got {x}"
        )));
    }
    let ratio = |nu: f64| -> Result<f64> {
        let [a, b, ..] = coeffs.eval(nu)?;
        if !(a > 0.0) {
            return Err(Error::SingularCoefficient(format!(
                "ã vanishes at I = {nu}"
            )));
        }
        Ok(b / a)
    };
    let err = std::cell::RefCell::new(None);
    let guard = |v: Result<f64>| -> f64 {
        v.unwrap_or_else(|e| {
            err.borrow_mut().get_or_insert(e);
            f64::NAN
        })
    };
    let inner = |xi: f64| -> f64 {
        let r = integrate_adaptive(|nu| guard(ratio(nu)), 1.0, xi, 1e-13, 1e-11);
        match r {
            Ok(v) => (-2.0 * v).exp(),
            Err(e) => guard(Err(e)),
        }
    };
    let out = integrate_adaptive(inner, 1.0, x, 1e-13, 1e-10);
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    out
}

/// `(P[hit x₋ first], P[hit x₊ first])` from `I₀`.
pub fn exit_probability(
    coeffs: &LimitCoeffs,
    x_minus: f64,
    x_plus: f64,
    i0: f64,
) -> Result<(f64, f64)> {
    if !(0.0 < x_minus && x_minus < i0 && i0 < x_plus) {
        return Err(Error::Parameter(format!(
            "need 0 < x- < I0 < x+, got {x_minus}, {i0}, {x_plus}"
        )));
    }
    let pm = scale_function(coeffs, x_minus)?;
    let pp = scale_function(coeffs, x_plus)?;
    let p0 = scale_function(coeffs, i0)?;
    let span = pp - pm;
    Ok(((pp - p0) / span, (p0 - pm) / span))
}

/// Exact BESQ² path until it leaves `(lo, hi)`; returns `true` on exit at `hi`.
///
/// Steps shrink near the boundaries so the exit is located closely.
pub fn bessel_exits_upper<R: Rng + ?Sized>(m: f64, i0: f64, lo: f64, hi: f64, rng: &mut R) -> bool {
    let mut i = i0;
    loop {
        let d = (i - lo).min(hi - i);
        let sd = (4.0 * m * i).sqrt();
        let dt = (d / (4.0 * sd)).powi(2).clamp(1e-10, 1e-2);
        i = besq2_step(m, i, dt, rng);
        if i >= hi {
            return true;
        }
        if i <= lo {
            return false;
        }
    }
}

/// Euler–Maruyama for `dI = 𝐛 dt + √ã dB` from `I₀` until it leaves `(lo, hi)`;
/// returns `true` on exit at `hi`. Steps shrink near the boundaries.
pub fn limit_exits_upper<R: Rng + ?Sized>(
    coeffs: &LimitCoeffs,
    i0: f64,
    lo: f64,
    hi: f64,
    dt: f64,
    rng: &mut R,
) -> Result<bool> {
    if !(0.0 < lo && lo < i0 && i0 < hi) {
        return Err(Error::Parameter(format!(
            "need 0 < lo < I0 < hi, got {lo}, {i0}, {hi}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let mut i = i0;
    loop {
        let [a, b, ..] = coeffs.eval(i)?;
        let d = (i - lo).min(hi - i);
        let sd = a.max(0.0).sqrt();
        let h = if sd > 0.0 {
            (d / (4.0 * sd)).powi(2).clamp(1e-10, dt)
        } else {
            dt
        };
        let z: f64 = rng.sample(StandardNormal);
        i += b * h + sd * h.sqrt() * z;
        if i >= hi {
            return Ok(true);
        }
        if i <= lo {
            return Ok(false);
        }
    }
}
