//! Single-well Hamiltonians and their action-angle charts.
//!
//! Orbits follow the clockwise flow `ẋ = ∂_y H`, `ẏ = -∂_x H`. The angle is
//! normalized to period one and vanishes on the section `{x = 0, y > 0}`,
//! so `θ` grows by `ω(I) = 1/T(I)` per unit time.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::ode::gbs_step;

/// GBS steps per orbit period.
const STEPS_PER_PERIOD: usize = 256;
/// Relative action offset used for derivatives in `I`.
const ACTION_DELTA: f64 = 1e-4;
/// Relative step of the angle-map finite difference.
const ANGLE_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HamiltonianModel {
    /// `H = (x² + y²) / 2`
    Quadratic,
    /// `H = y²/2 + x²/2 + c4 x⁴`
    QuarticWell { c4: f64 },
}

impl HamiltonianModel {
    pub fn quartic_well(c4: f64) -> Result<Self> {
        let m = HamiltonianModel::QuarticWell { c4 };
        m.validate()?;
        Ok(m)
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, HamiltonianModel::Quadratic)
    }

    pub fn energy(&self, x: f64, y: f64) -> f64 {
        match *self {
            HamiltonianModel::Quadratic => 0.5 * (x * x + y * y),
            HamiltonianModel::QuarticWell { c4 } => {
                let x2 = x * x;
                0.5 * (x2 + y * y) + c4 * x2 * x2
            }
        }
    }

    /// `(∂_x H, ∂_y H)`
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            HamiltonianModel::Quadratic => (x, y),
            HamiltonianModel::QuarticWell { c4 } => (x + 4.0 * c4 * x * x * x, y),
        }
    }

    pub fn hessian_at_origin(&self) -> [[f64; 2]; 2] {
        [[1.0, 0.0], [0.0, 1.0]]
    }

    /// Period of the linearized flow at the minimum.
    pub fn small_amplitude_period(&self) -> f64 {
        let h = self.hessian_at_origin();
        2.0 * PI / (h[0][0] * h[1][1] - h[0][1] * h[1][0]).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if let HamiltonianModel::QuarticWell { c4 } = *self {
            if !(c4.is_finite() && c4 >= 0.0) {
                return Err(Error::Model(format!(
                    "quartic coefficient must be >= 0, got {c4}"
                )));
            }
        }
        let (gx, gy) = self.gradient(0.0, 0.0);
        if self.energy(0.0, 0.0) != 0.0 || gx != 0.0 || gy != 0.0 {
            return Err(Error::Model(
                "minimum must sit at the origin with H = 0".into(),
            ));
        }
        let h = self.hessian_at_origin();
        if !(h[0][0] > 0.0 && h[0][0] * h[1][1] - h[0][1] * h[1][0] > 0.0) {
            return Err(Error::Model(
                "Hessian at the origin is not positive definite".into(),
            ));
        }
        let mut prev = 0.0;
        for radius in [1.0, 10.0, 100.0] {
            let ring_min = (0..64)
                .map(|k| {
                    let phi = 2.0 * PI * k as f64 / 64.0;
                    self.energy(radius * phi.cos(), radius * phi.sin())
                })
                .fold(f64::INFINITY, f64::min);
            if !(ring_min > prev) {
                return Err(Error::Model(format!(
                    "H does not grow on the ring of radius {radius}"
                )));
            }
            prev = ring_min;
        }
        Ok(())
    }

    fn field(&self, s: &[f64; 2]) -> [f64; 2] {
        let (hx, hy) = self.gradient(s[0], s[1]);
        [hy, -hx]
    }

    fn field_with_action(&self, s: &[f64; 3]) -> [f64; 3] {
        let (hx, hy) = self.gradient(s[0], s[1]);
        [hy, -hx, s[1] * hy]
    }

    /// Exact flow over time `t` (closed form for the quadratic model).
    pub fn flow(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        match self {
            HamiltonianModel::Quadratic => {
                let (s, c) = t.sin_cos();
                (c * x + s * y, -s * x + c * y)
            }
            _ => {
                let n = ((t.abs() / self.small_amplitude_period() * 64.0).ceil() as usize).max(1);
                let h = t / n as f64;
                let f = |s: &[f64; 2]| self.field(s);
                let mut s = [x, y];
                for _ in 0..n {
                    s = gbs_step(&f, &s, h);
                }
                (s[0], s[1])
            }
        }
    }

    /// Height `y > 0` where the level set `{H = E}` meets the section.
    pub fn section_point(&self, energy: f64) -> Result<f64> {
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(Error::Parameter(format!(
                "section point needs E > 0, got {energy}"
            )));
        }
        let g = |y: f64| self.energy(0.0, y) - energy;
        let mut hi = (2.0 * energy).sqrt().max(1e-300);
        let mut k = 0;
        while g(hi) < 0.0 {
            hi *= 2.0;
            k += 1;
            if k > 200 {
                return Err(Error::Model("level set does not meet the section".into()));
            }
        }
        let mut lo = 0.0;
        let mut y = hi;
        for _ in 0..200 {
            let (_, dy) = self.gradient(0.0, y);
            let mut next = y - g(y) / dy;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if g(next) < 0.0 {
                lo = next;
            } else {
                hi = next;
            }
            if (next - y).abs() <= 1e-16 * next {
                return Ok(next);
            }
            y = next;
        }
        Ok(y)
    }
}

/// Period and enclosed area of one level set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitTrace {
    pub energy: f64,
    pub y0: f64,
    pub period: f64,
    pub action: f64,
}

/// Integrates from `start` and returns `(time, accumulated area)` at the
/// first `count` crossings of the section.
fn section_crossings(
    model: &HamiltonianModel,
    start: [f64; 2],
    h: f64,
    count: usize,
    scale: f64,
) -> Result<Vec<(f64, f64)>> {
    let f = |s: &[f64; 3]| model.field_with_action(s);
    let mut s = [start[0], start[1], 0.0];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(count);
    let max_steps = 400 * STEPS_PER_PERIOD * count;
    for _ in 0..max_steps {
        let next = gbs_step(&f, &s, h);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::Integration {
                time: t,
                reason: "non-finite orbit state".into(),
            });
        }
        if s[0] < 0.0 && next[0] >= 0.0 && next[1] > 0.0 {
            // Illinois refinement of the sub-step landing on x = 0
            let (mut a, mut fa) = (0.0, s[0]);
            let (mut b, mut fb) = (h, next[0]);
            let mut hit = next;
            let mut dt = h;
            let mut side = 0i8;
            for _ in 0..100 {
                let c = (a * fb - b * fa) / (fb - fa);
                let sc = gbs_step(&f, &s, c);
                let fc = sc[0];
                hit = sc;
                dt = c;
                if fc.abs() <= 1e-15 * scale || (b - a).abs() <= 1e-15 * h {
                    break;
                }
                if fc < 0.0 {
                    a = c;
                    fa = fc;
                    if side == -1 {
                        fb *= 0.5;
                    }
                    side = -1;
                } else {
                    b = c;
                    fb = fc;
                    if side == 1 {
                        fa *= 0.5;
                    }
                    side = 1;
                }
            }
            out.push((t + dt, hit[2]));
            if out.len() == count {
                return Ok(out);
            }
        }
        s = next;
        t += h;
    }
    Err(Error::Model("orbit did not return to the section".into()))
}

/// Traces the level set `{H = E}` once around.
pub fn trace_orbit(
    model: &HamiltonianModel,
    energy: f64,
    period_hint: Option<f64>,
) -> Result<OrbitTrace> {
    let y0 = model.section_point(energy)?;
    let mut guess = period_hint.unwrap_or_else(|| model.small_amplitude_period());
    for _ in 0..4 {
        let h = guess / STEPS_PER_PERIOD as f64;
        let (period, action) = section_crossings(model, [0.0, y0], h, 1, y0)?[0];
        if (period - guess).abs() <= 0.02 * period {
            return Ok(OrbitTrace {
                energy,
                y0,
                period,
                action,
            });
        }
        guess = period;
    }
    Err(Error::Model("orbit period estimate did not settle".into()))
}

pub fn action_of_energy(model: &HamiltonianModel, energy: f64) -> Result<f64> {
    Ok(trace_orbit(model, energy, None)?.action)
}

/// Inverts `I(E)` by Newton's method using `dI/dE = T`.
pub fn energy_of_action(model: &HamiltonianModel, action: f64) -> Result<OrbitTrace> {
    if !(action > 0.0 && action.is_finite()) {
        return Err(Error::Grid(format!(
            "action must be positive, got {action}"
        )));
    }
    let mut energy = action / model.small_amplitude_period();
    let mut hint = None;
    for _ in 0..60 {
        let tr = trace_orbit(model, energy, hint)?;
        let resid = action - tr.action;
        if resid.abs() <= 1e-13 * action {
            return Ok(tr);
        }
        let mut next = energy + resid / tr.period;
        if !(next > 0.0) {
            next = 0.5 * energy;
        }
        hint = Some(tr.period);
        if (next - energy).abs() <= 4.0 * f64::EPSILON * energy {
            return Ok(trace_orbit(model, next, hint)?);
        }
        energy = next;
    }
    Err(Error::Grid(format!(
        "could not invert the action at I = {action}"
    )))
}

/// Angle of `(x, y)` on its own level set.
pub fn angle_of(model: &HamiltonianModel, x: f64, y: f64, period_hint: Option<f64>) -> Result<f64> {
    let e = model.energy(x, y);
    if !(e > 0.0) {
        return Err(Error::Domain("angle is undefined at the minimum".into()));
    }
    if model.is_quadratic() {
        return Ok(wrap_unit(x.atan2(y) / (2.0 * PI)));
    }
    let hint = period_hint.unwrap_or_else(|| model.small_amplitude_period());
    let scale = model.section_point(e)?;
    let c = section_crossings(model, [x, y], hint / STEPS_PER_PERIOD as f64, 2, scale)?;
    let (t1, t2) = (c[0].0, c[1].0);
    Ok(wrap_unit(1.0 - t1 / (t2 - t1)))
}

fn wrap_unit(v: f64) -> f64 {
    let w = v - v.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Wraps an angle difference into `(-1/2, 1/2]`.
pub fn wrap_half(d: f64) -> f64 {
    let w = d - d.round();
    if w <= -0.5 {
        w + 1.0
    } else {
        w
    }
}

/// Tabulated data on one orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartRow {
    pub action: f64,
    pub energy: f64,
    pub period: f64,
    pub omega: f64,
    pub domega_di: f64,
    /// `dI/dE` from neighbouring actions; equals the period by the symplectic identity.
    pub di_de: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub da_di: Vec<f64>,
    pub db_di: Vec<f64>,
}

struct RawRow {
    trace: OrbitTrace,
    x: Vec<f64>,
    y: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Points at `θ_j = j/n` on a traced orbit, starting on the section.
pub fn sample_orbit(
    model: &HamiltonianModel,
    trace: &OrbitTrace,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let f = |s: &[f64; 2]| model.field(s);
    let h = trace.period / n as f64;
    let sub = STEPS_PER_PERIOD.div_ceil(n).max(1);
    let mut s = [0.0, trace.y0];
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        x.push(s[0]);
        y.push(s[1]);
        for _ in 0..sub {
            s = gbs_step(&f, &s, h / sub as f64);
        }
    }
    let closure = s[0].abs().max((s[1] - trace.y0).abs());
    if closure > 1e-8 * trace.y0 {
        return Err(Error::Model(format!(
            "orbit at E = {} fails to close ({closure:e})",
            trace.energy
        )));
    }
    Ok((x, y))
}

fn raw_row(model: &HamiltonianModel, action: f64, n_theta: usize) -> Result<RawRow> {
    let trace = energy_of_action(model, action)?;
    let omega = 1.0 / trace.period;
    let (x, y) = sample_orbit(model, &trace, n_theta)?;
    let a = x
        .iter()
        .zip(&y)
        .map(|(&xi, &yi)| model.gradient(xi, yi).1 / omega)
        .collect();
    let dy = ANGLE_FD_STEP * trace.y0;
    let mut b = Vec::with_capacity(n_theta);
    for j in 0..n_theta {
        let up = angle_of(model, x[j], y[j] + dy, Some(trace.period))?;
        let dn = angle_of(model, x[j], y[j] - dy, Some(trace.period))?;
        b.push(wrap_half(up - dn) / (2.0 * dy));
    }
    Ok(RawRow { trace, x, y, a, b })
}

fn build_row(model: &HamiltonianModel, action: f64, n_theta: usize) -> Result<ChartRow> {
    let mid = raw_row(model, action, n_theta)?;
    let lo = raw_row(model, action * (1.0 - ACTION_DELTA), n_theta)?;
    let hi = raw_row(model, action * (1.0 + ACTION_DELTA), n_theta)?;
    let di = 2.0 * ACTION_DELTA * action;
    let diff = |p: &[f64], m: &[f64]| {
        p.iter()
            .zip(m)
            .map(|(u, v)| (u - v) / di)
            .collect::<Vec<_>>()
    };
    Ok(ChartRow {
        action,
        energy: mid.trace.energy,
        period: mid.trace.period,
        omega: 1.0 / mid.trace.period,
        domega_di: (1.0 / hi.trace.period - 1.0 / lo.trace.period) / di,
        di_de: di / (hi.trace.energy - lo.trace.energy),
        da_di: diff(&hi.a, &lo.a),
        db_di: diff(&hi.b, &lo.b),
        x: mid.x,
        y: mid.y,
        a: mid.a,
        b: mid.b,
    })
}

/// Action grid: eight points per decade on `[1e-3, 1]·I_ref`, then linear to `20·I_ref`.
pub fn default_action_grid(i_ref: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (0..24)
        .map(|k| i_ref * 10f64.powf(-3.0 + k as f64 / 8.0))
        .collect();
    g.extend((1..=24).map(|k| i_ref * (1.0 + 19.0 * k as f64 / 24.0)));
    g
}

#[derive(Debug, Clone)]
pub struct ActionAngleChart {
    pub model: HamiltonianModel,
    pub n_theta: usize,
    pub rows: Vec<ChartRow>,
    omega_of_i: Pchip,
    energy_of_i: Pchip,
    action_of_e: Pchip,
    mean_b_of_i: Pchip,
}

impl ActionAngleChart {
    pub fn build(model: &HamiltonianModel, grid: &[f64], n_theta: usize) -> Result<Self> {
        model.validate()?;
        if grid.len() < 2 || grid[0] <= 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid(
                "action grid must be positive and strictly increasing".into(),
            ));
        }
        if n_theta < 64 || !n_theta.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "n_theta must be a power of two >= 64, got {n_theta}"
            )));
        }
        let rows = grid
            .par_iter()
            .map(|&i| build_row(model, i, n_theta))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(*model, n_theta, rows)
    }

    fn from_rows(model: HamiltonianModel, n_theta: usize, rows: Vec<ChartRow>) -> Result<Self> {
        let i: Vec<f64> = rows.iter().map(|r| r.action).collect();
        let k: Vec<f64> = rows.iter().map(|r| r.energy).collect();
        let w: Vec<f64> = rows.iter().map(|r| r.omega).collect();
        let mb: Vec<f64> = rows
            .iter()
            .map(|r| r.b.iter().sum::<f64>() / n_theta as f64)
            .collect();
        if k.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::Model(
                "energy is not increasing in the action".into(),
            ));
        }
        Ok(Self {
            model,
            n_theta,
            omega_of_i: Pchip::new(&i, &w)?,
            energy_of_i: Pchip::new(&i, &k)?,
            action_of_e: Pchip::new(&k, &i)?,
            mean_b_of_i: Pchip::new(&i, &mb)?,
            rows,
        })
    }

    pub fn actions(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.action).collect()
    }

    pub fn action_range(&self) -> (f64, f64) {
        (self.rows[0].action, self.rows[self.rows.len() - 1].action)
    }

    pub fn covers(&self, action: f64) -> bool {
        let (lo, hi) = self.action_range();
        action >= lo && action <= hi
    }

    fn check(&self, action: f64) -> Result<()> {
        if self.covers(action) {
            Ok(())
        } else {
            let (lo, hi) = self.action_range();
            Err(Error::Coverage(format!(
                "action {action} outside chart range [{lo}, {hi}]"
            )))
        }
    }

    pub fn omega(&self, action: f64) -> Result<f64> {
        self.check(action)?;
        Ok(self.omega_of_i.eval(action))
    }

    pub fn energy(&self, action: f64) -> Result<f64> {
        self.check(action)?;
        Ok(self.energy_of_i.eval(action))
    }

    pub fn action_of_energy(&self, energy: f64) -> Result<f64> {
        self.action_of_e.eval_checked(energy)
    }

    /// `⟨b(I, ·)⟩`
    pub fn mean_b(&self, action: f64) -> Result<f64> {
        self.check(action)?;
        Ok(self.mean_b_of_i.eval(action))
    }

    /// Lower frequency bound: half the smallest tabulated frequency.
    pub fn omega0(&self) -> f64 {
        0.5 * self
            .rows
            .iter()
            .map(|r| r.omega)
            .fold(f64::INFINITY, f64::min)
    }

    /// `(I, θ)` of a phase-space point.
    pub fn action_angle(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let i = self.action_of_energy(self.model.energy(x, y))?;
        let period = 1.0 / self.omega_of_i.eval(i);
        let theta = angle_of(&self.model, x, y, Some(period))?;
        Ok((i, theta))
    }

    pub fn row_index(&self, action: f64) -> Result<usize> {
        self.rows
            .iter()
            .position(|r| (r.action - action).abs() <= 1e-12 * action)
            .ok_or_else(|| Error::Grid(format!("action {action} is not a chart grid point")))
    }

    /// Largest `|x(I, 0)|` and smallest `y(I, 0)` over the grid.
    pub fn gauge_diagnostics(&self) -> (f64, f64) {
        let xmax = self.rows.iter().map(|r| r.x[0].abs()).fold(0.0, f64::max);
        let ymin = self
            .rows
            .iter()
            .map(|r| r.y[0])
            .fold(f64::INFINITY, f64::min);
        (xmax, ymin)
    }

    pub fn fourier_coeffs(&self, action: f64, n: usize) -> Result<OrbitFourier> {
        let row = &self.rows[self.row_index(action)?];
        if n == 0 || n > self.n_theta / 2 {
            return Err(Error::Parameter(format!(
                "Fourier order must lie in 1..={}, got {n}",
                self.n_theta / 2
            )));
        }
        let mut a = dft(&row.a, n);
        let a0_residual = a[n].norm();
        a[n] = Complex64::new(0.0, 0.0);
        let b = dft(&row.b, n);
        let da = dft(&row.da_di, n);
        let db = dft(&row.db_di, n);
        let amax = a.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let aliasing = a[2 * n].norm() > 1e-3 * amax;
        Ok(OrbitFourier {
            action,
            omega: row.omega,
            domega_di: row.domega_di,
            n_max: n,
            a,
            b,
            da,
            db,
            a0_residual,
            aliasing,
        })
    }

    pub fn save(&self, path: &Path, key: &[u8; 32]) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        buf.extend_from_slice(key);
        let (tag, c4) = match self.model {
            HamiltonianModel::Quadratic => (0u8, 0.0),
            HamiltonianModel::QuarticWell { c4 } => (1u8, c4),
        };
        buf.push(tag);
        buf.extend_from_slice(&c4.to_le_bytes());
        buf.extend_from_slice(&(self.n_theta as u64).to_le_bytes());
        buf.extend_from_slice(&(self.rows.len() as u64).to_le_bytes());
        for r in &self.rows {
            for v in [r.action, r.energy, r.period, r.omega, r.domega_di, r.di_de] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            for col in [&r.x, &r.y, &r.a, &r.b, &r.da_di, &r.db_di] {
                for v in col.iter() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let tmp = path.with_extension("tmp");
        std::fs::File::create(&tmp)?.write_all(&buf)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Loads a cached chart; `None` when the file is missing, stale or keyed differently.
    pub fn load(path: &Path, key: &[u8; 32]) -> Result<Option<Self>> {
        let mut buf = Vec::new();
        match std::fs::File::open(path) {
            Ok(mut f) => f.read_to_end(&mut buf)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let mut rd = Reader { buf: &buf, pos: 0 };
        if rd.bytes(8) != Some(CACHE_MAGIC.as_slice()) {
            return Ok(None);
        }
        if rd.u32() != Some(CACHE_VERSION) || rd.bytes(32) != Some(key.as_slice()) {
            return Ok(None);
        }
        let parse = || -> Option<(HamiltonianModel, usize, Vec<ChartRow>)> {
            let mut rd = Reader { buf: &buf, pos: 44 };
            let tag = rd.bytes(1)?[0];
            let c4 = rd.f64()?;
            let model = match tag {
                0 => HamiltonianModel::Quadratic,
                1 => HamiltonianModel::QuarticWell { c4 },
                _ => return None,
            };
            let n_theta = rd.u64()? as usize;
            let n_rows = rd.u64()? as usize;
            let mut rows = Vec::with_capacity(n_rows);
            for _ in 0..n_rows {
                let head: Vec<f64> = (0..6).map(|_| rd.f64()).collect::<Option<_>>()?;
                let mut cols = Vec::with_capacity(6);
                for _ in 0..6 {
                    cols.push(
                        (0..n_theta)
                            .map(|_| rd.f64())
                            .collect::<Option<Vec<f64>>>()?,
                    );
                }
                let mut it = cols.into_iter();
                rows.push(ChartRow {
                    action: head[0],
                    energy: head[1],
                    period: head[2],
                    omega: head[3],
                    domega_di: head[4],
                    di_de: head[5],
                    x: it.next()?,
                    y: it.next()?,
                    a: it.next()?,
                    b: it.next()?,
                    da_di: it.next()?,
                    db_di: it.next()?,
                });
            }
            (rd.pos == buf.len()).then_some((model, n_theta, rows))
        };
        match parse() {
            Some((model, n_theta, rows)) => Ok(Some(Self::from_rows(model, n_theta, rows)?)),
            None => Err(Error::Io(format!("corrupt chart cache {}", path.display()))),
        }
    }
}

const CACHE_MAGIC: &[u8; 8] = b"OSCDCHRT";
const CACHE_VERSION: u32 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.buf.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }
    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.bytes(4)?.try_into().ok()?))
    }
    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.bytes(8)?.try_into().ok()?))
    }
    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.bytes(8)?.try_into().ok()?))
    }
}

/// Coefficients `c_n = (1/M) Σ_j f_j e^{-2πinj/M}` for `-n_max ≤ n ≤ n_max`,
/// stored at index `n + n_max`.
fn dft(samples: &[f64], n_max: usize) -> Vec<Complex64> {
    let m = samples.len();
    let mut out = Vec::with_capacity(2 * n_max + 1);
    for n in -(n_max as i64)..=(n_max as i64) {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &f) in samples.iter().enumerate() {
            let k = (n * j as i64).rem_euclid(m as i64) as f64;
            acc += f * Complex64::from_polar(1.0, -2.0 * PI * k / m as f64);
        }
        out.push(acc / m as f64);
    }
    out
}

/// Fourier data of `a`, `b` and their action derivatives on one orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitFourier {
    pub action: f64,
    pub omega: f64,
    pub domega_di: f64,
    pub n_max: usize,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub da: Vec<Complex64>,
    pub db: Vec<Complex64>,
    /// `|⟨a⟩|` before it was zeroed.
    pub a0_residual: f64,
    /// `|a_N|` exceeds `1e-3·max|a_n|`.
    pub aliasing: bool,
}

impl OrbitFourier {
    fn idx(&self, n: i64) -> usize {
        (n + self.n_max as i64) as usize
    }
    pub fn a(&self, n: i64) -> Complex64 {
        self.a[self.idx(n)]
    }
    pub fn b(&self, n: i64) -> Complex64 {
        self.b[self.idx(n)]
    }
    pub fn da(&self, n: i64) -> Complex64 {
        self.da[self.idx(n)]
    }
    pub fn db(&self, n: i64) -> Complex64 {
        self.db[self.idx(n)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_action_and_period() {
        let m = HamiltonianModel::Quadratic;
        let tr = trace_orbit(&m, 0.5, None).unwrap();
        assert!((tr.action - PI).abs() < 1e-12, "{}", tr.action);
        assert!((tr.period - 2.0 * PI).abs() < 1e-12);
        let tr = energy_of_action(&m, 2.0).unwrap();
        assert!((tr.energy - 2.0 / (2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn quartic_small_energy_is_nearly_harmonic() {
        let m = HamiltonianModel::quartic_well(0.25).unwrap();
        let i = action_of_energy(&m, 0.01).unwrap();
        assert!((i / (2.0 * PI * 0.01) - 1.0).abs() < 0.01);
        assert!(i < 2.0 * PI * 0.01);
    }

    #[test]
    fn numeric_angle_map_matches_rotation() {
        // a quartic well with c4 = 0 is harmonic but takes the numeric path
        let m = HamiltonianModel::QuarticWell { c4: 0.0 };
        for th in [0.0, 0.1, 0.37, 0.5, 0.81, 0.999] {
            let (x, y) = ((2.0 * PI * th).sin(), (2.0 * PI * th).cos());
            let got = angle_of(&m, 0.7 * x, 0.7 * y, None).unwrap();
            assert!(wrap_half(got - th).abs() < 1e-12, "{th} -> {got}");
        }
    }

    #[test]
    fn model_validation() {
        assert!(HamiltonianModel::quartic_well(-1.0).is_err());
        assert!(HamiltonianModel::Quadratic.validate().is_ok());
        assert!(HamiltonianModel::Quadratic.section_point(0.0).is_err());
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_half(0.75), -0.25);
        assert_eq!(wrap_half(-0.5), 0.5);
        assert_eq!(wrap_unit(-0.25), 0.75);
    }

    #[test]
    fn dft_recovers_cosine() {
        let s: Vec<f64> = (0..64)
            .map(|j| 3.0 * (2.0 * PI * 2.0 * j as f64 / 64.0).cos())
            .collect();
        let c = dft(&s, 4);
        assert!((c[4 + 2].re - 1.5).abs() < 1e-13 && (c[4 - 2].re - 1.5).abs() < 1e-13);
        assert!(c[4 + 1].norm() < 1e-13);
    }
}
