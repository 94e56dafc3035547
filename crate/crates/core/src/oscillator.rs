//! Noisy oscillator `dX/ds = ∇⊥H(X) + ε v(s) e₂` in fast time `s = t/ε²`.
//!
//! Each step applies half a Hamiltonian flow, a vertical kick with the
//! trapezoidal average of `v` over the step, and another half flow. The
//! oscillatory integrals `w₁ = ε∫ v sin`, `w₂ = ε∫ v cos` and the running
//! integral of `v` are accumulated on the same fast grid.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::hamiltonian::{wrap_half, ActionAngleChart, HamiltonianModel};
use crate::noise::{NoiseDiscretization, NoiseState, Propagator};

/// 200 steps per harmonic period.
pub const DEFAULT_DT_FAST: f64 = 2.0 * PI / 200.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub epsilon: f64,
    /// Slow-time horizon.
    pub t_end: f64,
    pub dt_fast: f64,
    pub model: HamiltonianModel,
    pub x0: f64,
    pub y0: f64,
    /// Record every this many fast steps (the final state is always kept).
    pub record_stride: usize,
    /// `false` replaces the noise by zero.
    pub forcing: bool,
}

impl SimConfig {
    pub fn new(model: HamiltonianModel, epsilon: f64, t_end: f64) -> Self {
        Self {
            epsilon,
            t_end,
            dt_fast: DEFAULT_DT_FAST,
            model,
            x0: 0.0,
            y0: 1.0,
            record_stride: 1,
            forcing: true,
        }
    }

    /// Largest admissible fast step: a tenth of `min(1, T_min)` where
    /// `T_min` is the shortest period at the origin.
    pub fn max_dt_fast(&self) -> f64 {
        0.1 * self.model.small_amplitude_period().min(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.t_end));
        }
        if !(self.dt_fast > 0.0) || self.dt_fast > self.max_dt_fast() {
            return bad(format!(
                "dt_fast = {} must lie in (0, {}]",
                self.dt_fast,
                self.max_dt_fast()
            ));
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        if !(self.x0.is_finite() && self.y0.is_finite()) {
            return bad("initial condition must be finite".into());
        }
        self.model.validate()
    }

    /// Number of fast steps and the step that lands exactly on `t_end/ε²`.
    pub fn fast_grid(&self) -> (usize, f64) {
        let horizon = self.t_end / (self.epsilon * self.epsilon);
        let n = (horizon / self.dt_fast).ceil().max(1.0) as usize;
        (n, horizon / n as f64)
    }
}

/// Recorded path on the slow-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub h: Vec<f64>,
    /// `v` at the recorded fast times.
    pub v: Vec<f64>,
    /// `∫₀^s v du` in fast time.
    pub v_integral: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub action: Option<Vec<f64>>,
    pub psi: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
    pub quadratic: bool,
}

impl TrajectoryRecord {
    /// `H` of `Y = X₀ + (-w₁, w₂)`, the rotating-frame reconstruction (quadratic only).
    pub fn rotating_frame_energy(&self) -> Option<Vec<f64>> {
        if !self.quadratic {
            return None;
        }
        let (x0, y0) = (self.x[0], self.y[0]);
        Some(
            self.w1
                .iter()
                .zip(&self.w2)
                .map(|(&a, &b)| 0.5 * ((x0 - a).powi(2) + (y0 + b).powi(2)))
                .collect(),
        )
    }

    /// CSV with columns `t,x,y,H,I,psi,tau,w1,w2`; unavailable fields are empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,x,y,H,I,psi,tau,w1,w2")?;
        let opt =
            |v: &Option<Vec<f64>>, k: usize| v.as_ref().map(|c| fmt(c[k])).unwrap_or_default();
        for k in 0..self.times.len() {
            let (w1, w2) = if self.quadratic {
                (fmt(self.w1[k]), fmt(self.w2[k]))
            } else {
                (String::new(), String::new())
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                fmt(self.times[k]),
                fmt(self.x[k]),
                fmt(self.y[k]),
                fmt(self.h[k]),
                opt(&self.action, k),
                opt(&self.psi, k),
                opt(&self.tau, k),
                w1,
                w2
            )?;
        }
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Running trapezoid sums of `ε∫v sin u`, `ε∫v cos u` and `∫v` on a fast grid.
#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    w1: f64,
    w2: f64,
    vint: f64,
}

impl Accumulator {
    fn add(&mut self, eps: f64, h: f64, u0: f64, v0: f64, u1: f64, v1: f64) {
        let (s0, c0) = u0.sin_cos();
        let (s1, c1) = u1.sin_cos();
        self.w1 += 0.5 * eps * h * (v0 * s0 + v1 * s1);
        self.w2 += 0.5 * eps * h * (v0 * c0 + v1 * c1);
        self.vint += 0.5 * h * (v0 + v1);
    }
}

pub fn integrate_rescaled<R: Rng + ?Sized>(
    cfg: &SimConfig,
    disc: &NoiseDiscretization,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let (n, h) = cfg.fast_grid();
    let eps = cfg.epsilon;
    let prop = disc.propagator(h)?;
    let mut noise = if cfg.forcing {
        disc.init_stationary(rng)
    } else {
        NoiseState::zeros(disc.len())
    };
    let cap = n / cfg.record_stride + 2;
    let mut rec = TrajectoryRecord {
        epsilon: eps,
        times: Vec::with_capacity(cap),
        x: Vec::with_capacity(cap),
        y: Vec::with_capacity(cap),
        h: Vec::with_capacity(cap),
        v: Vec::with_capacity(cap),
        v_integral: Vec::with_capacity(cap),
        w1: Vec::with_capacity(cap),
        w2: Vec::with_capacity(cap),
        action: None,
        psi: None,
        tau: None,
        quadratic: cfg.model.is_quadratic(),
    };
    let (mut x, mut y) = (cfg.x0, cfg.y0);
    let mut acc = Accumulator::default();
    let mut v = noise.sample_v();
    let push = |rec: &mut TrajectoryRecord, k: usize, x: f64, y: f64, v: f64, acc: &Accumulator| {
        rec.times.push(k as f64 * h * eps * eps);
        rec.x.push(x);
        rec.y.push(y);
        rec.h.push(cfg.model.energy(x, y));
        rec.v.push(v);
        rec.v_integral.push(acc.vint);
        rec.w1.push(acc.w1);
        rec.w2.push(acc.w2);
    };
    push(&mut rec, 0, x, y, v, &acc);
    for k in 1..=n {
        (x, y) = cfg.model.flow(x, y, 0.5 * h);
        let v_next = if cfg.forcing {
            noise.advance(&prop, rng);
            noise.sample_v()
        } else {
            0.0
        };
        y += eps * h * 0.5 * (v + v_next);
        (x, y) = cfg.model.flow(x, y, 0.5 * h);
        acc.add(eps, h, (k - 1) as f64 * h, v, k as f64 * h, v_next);
        v = v_next;
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Integration {
                time: (k - 1) as f64 * h * eps * eps,
                reason: "state left the finite range".into(),
            });
        }
        if k % cfg.record_stride == 0 || k == n {
            push(&mut rec, k, x, y, v, &acc);
        }
    }
    Ok(rec)
}

/// Splits the recorded angle into the fast phase `τ` and the slow phase `ψ`.
///
/// `τ` integrates `dτ = ω(I) ds + ε ⟨b(I,·)⟩ v ds` between records with the
/// action frozen at the interval midpoint; `ψ = θ − τ` is unwrapped.
pub fn split_angle(traj: &TrajectoryRecord, chart: &ActionAngleChart) -> Result<TrajectoryRecord> {
    let eps = traj.epsilon;
    let n = traj.times.len();
    let mut action = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    for k in 0..n {
        let (i, th) = chart
            .action_angle(traj.x[k], traj.y[k])
            .map_err(|e| match e {
                Error::Coverage(m) => Error::Coverage(format!("at t = {}: {m}", traj.times[k])),
                other => other,
            })?;
        action.push(i);
        theta.push(th);
    }
    let mut tau = vec![0.0; n];
    let mut psi = vec![theta[0]; n];
    for k in 1..n {
        let ds = (traj.times[k] - traj.times[k - 1]) / (eps * eps);
        let i_mid = 0.5 * (action[k] + action[k - 1]);
        let w = 0.5 * (chart.omega(action[k])? + chart.omega(action[k - 1])?);
        let dv = traj.v_integral[k] - traj.v_integral[k - 1];
        tau[k] = tau[k - 1] + w * ds + eps * chart.mean_b(i_mid)? * dv;
        let raw_prev = theta[k - 1] - tau[k - 1];
        let raw = theta[k] - tau[k];
        psi[k] = psi[k - 1] + wrap_half(raw - raw_prev);
    }
    let mut out = traj.clone();
    out.action = Some(action);
    out.psi = Some(psi);
    out.tau = Some(tau);
    Ok(out)
}

/// Functionals of one noise path on a slow-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub times: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    /// `∫₀^{t} v(s/ε²) ds`
    pub integral: Vec<f64>,
}

/// Noise-only integration of `w₁`, `w₂` and `∫v` with steps of at most `dt_fast`.
pub fn noise_path<R: Rng + ?Sized>(
    disc: &NoiseDiscretization,
    eps: f64,
    t_grid: &[f64],
    dt_fast: f64,
    rng: &mut R,
) -> Result<NoisePath> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!(
            "epsilon must lie in (0, 1), got {eps}"
        )));
    }
    if !(dt_fast > 0.0) {
        return Err(Error::Parameter(format!(
            "dt_fast must be positive, got {dt_fast}"
        )));
    }
    if t_grid.iter().any(|&t| t < 0.0) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter(
            "time grid must be nonnegative and increasing".into(),
        ));
    }
    let e2 = eps * eps;
    let mut noise = disc.init_stationary(rng);
    let mut v = noise.sample_v();
    let mut u = 0.0;
    let mut acc = Accumulator::default();
    let mut cached: Option<Propagator> = None;
    let mut out = NoisePath {
        times: t_grid.to_vec(),
        w1: Vec::with_capacity(t_grid.len()),
        w2: Vec::with_capacity(t_grid.len()),
        integral: Vec::with_capacity(t_grid.len()),
    };
    for &t in t_grid {
        let span = t / e2 - u;
        if span > 0.0 {
            let n = (span / dt_fast).ceil() as usize;
            let h = span / n as f64;
            let prop = match cached.take() {
                Some(p) if (p.dt - h).abs() <= 1e-15 * h => p,
                _ => disc.propagator(h)?,
            };
            let start = u;
            for k in 1..=n {
                noise.advance(&prop, rng);
                let v_next = noise.sample_v();
                let u_next = start + k as f64 * h;
                acc.add(eps, h, u, v, u_next, v_next);
                u = u_next;
                v = v_next;
            }
            cached = Some(prop);
        }
        out.w1.push(acc.w1);
        out.w2.push(acc.w2);
        out.integral.push(e2 * acc.vint);
    }
    Ok(out)
}

/// `(w₁, w₂)` on `t_grid` at the default fast step.
pub fn oscillatory_integrals<R: Rng + ?Sized>(
    disc: &NoiseDiscretization,
    eps: f64,
    t_grid: &[f64],
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = noise_path(disc, eps, t_grid, DEFAULT_DT_FAST, rng)?;
    Ok((p.w1, p.w2))
}
