//! The experiment suites. Each one returns its tables and checks in memory.

use std::f64::consts::PI;

use anyhow::{ensure, Context as _, Result};
use oscidrift::fbm::FbmTarget;
use oscidrift::hamiltonian::{action_of_energy, default_action_grid, ActionAngleChart, HamiltonianModel};
use oscidrift::limit::{
    bessel_exits_upper, d11, exit_probability, fourier_coefficients_route, limit_exits_upper,
    line_integral_route, scale_function, simulate_bessel_exact, simulate_limit_joint, LimitCoeffs,
    MIN_JOINT_ACTION,
};
use oscidrift::noise::{NoiseDiscretization, SpectralDensity};
use oscidrift::oscillator::{integrate_rescaled, noise_path, split_angle, SimConfig};
use oscidrift::stats::{ks_two_sample, run_ensemble, trend_fit, Estimate};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::report::{Check, Outcome, SeedLedger, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Fourier,
    LineIntegral,
    Both,
}

#[derive(Debug, Clone, Copy)]
pub struct Flags {
    pub workers: usize,
    pub expensive: bool,
    pub route: Route,
}

/// Tolerances shared by several suites.
pub mod tol {
    pub const K_SE: f64 = 3.0;
    pub const KS_MAX: f64 = 0.05;
    pub const KS_ALPHA: f64 = 0.01;
    pub const TWO_ROUTE_REL: f64 = 1e-4;
    pub const CLOSED_FORM_REL: f64 = 1e-6;
    pub const RECONSTRUCTION: f64 = 1e-6;
    pub const FBM_VAR_REL: f64 = 0.10;
    pub const FBM_SELF_SIM_REL: f64 = 0.15;
    pub const FBM_CONTRAST_REL: f64 = 0.20;
    pub const SDE_DT: f64 = 1e-3;
}

const NOISE_DT: f64 = 0.05;
const NOISE_STEPS: usize = 10_000;
const NOISE_LAGS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 5.0];
const COEFF_THETA: usize = 256;
const TRAJECTORY_ROWS: usize = 2000;

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub flags: Flags,
    pub density: SpectralDensity,
    pub disc: NoiseDiscretization,
    pub model: HamiltonianModel,
    pub seeds: SeedLedger,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a ExperimentConfig, flags: Flags) -> Result<Self> {
        let density = cfg.density.build()?;
        let disc = density.discretize(cfg.n_modes)?;
        Ok(Self {
            cfg,
            flags,
            density,
            disc,
            model: cfg.hamiltonian.model(),
            seeds: SeedLedger::new(cfg.seed),
        })
    }

    fn d11(&self) -> f64 {
        d11(&self.disc)
    }

    fn initial_energy(&self) -> f64 {
        self.model.energy(self.cfg.initial.x, self.cfg.initial.y)
    }

    fn initial_action(&self) -> Result<f64> {
        Ok(action_of_energy(&self.model, self.initial_energy())?)
    }

    fn sim_config(&self, eps: f64) -> SimConfig {
        SimConfig {
            epsilon: eps,
            t_end: self.cfg.horizon,
            dt_fast: self.cfg.dt_fast(),
            model: self.model,
            x0: self.cfg.initial.x,
            y0: self.cfg.initial.y,
            record_stride: usize::MAX,
            forcing: true,
        }
    }

    fn smallest_eps(&self) -> f64 {
        *self.cfg.eps.last().expect("validated eps list")
    }

    /// Builds the chart, going through the on-disk cache when one is configured.
    pub fn chart(&self, grid: &[f64], n_theta: usize) -> Result<ActionAngleChart> {
        let Some(dir) = &self.cfg.cache_dir else {
            return Ok(ActionAngleChart::build(&self.model, grid, n_theta)?);
        };
        let key = chart_key(self.cfg, grid, n_theta);
        let name: String = key[..8].iter().map(|b| format!("{b:02x}")).collect();
        let path = dir.join(format!("chart-{name}.bin"));
        if let Some(c) = ActionAngleChart::load(&path, &key)? {
            return Ok(c);
        }
        let chart = ActionAngleChart::build(&self.model, grid, n_theta)?;
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        chart.save(&path, &key)?;
        Ok(chart)
    }
}

/// SHA-256 over the Hamiltonian block, the angle resolution and the grid.
pub fn chart_key(cfg: &ExperimentConfig, grid: &[f64], n_theta: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"oscidrift-chart\0");
    h.update(serde_json::to_vec(&cfg.hamiltonian).expect("hamiltonian block serializes"));
    h.update((n_theta as u64).to_le_bytes());
    for v in grid {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().into()
}

pub fn run(ctx: &mut Context) -> Result<Outcome> {
    match ctx.cfg.experiment {
        ExperimentKind::NoiseCheck => noise_check(ctx),
        ExperimentKind::QuadraticDemo => quadratic_demo(ctx),
        ExperimentKind::LimitCoeffs => limit_coeffs(ctx),
        ExperimentKind::ConvergenceStudy => convergence_study(ctx),
        ExperimentKind::FbmCheck => fbm_check(ctx),
        ExperimentKind::ExitProb => exit_prob(ctx),
        ExperimentKind::WIntegrals => w_integrals(ctx),
    }
}

/// Log-spaced grid with `per_decade` points per decade covering `[lo, hi]`.
fn log_grid(lo: f64, hi: f64, per_decade: f64) -> Vec<f64> {
    let n = ((hi / lo).log10() * per_decade).ceil().max(7.0) as usize;
    (0..=n)
        .map(|k| lo * (hi / lo).powf(k as f64 / n as f64))
        .collect()
}

fn max_rel(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    pairs.map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max)
}

fn noise_check(ctx: &mut Context) -> Result<Outcome> {
    let mut out = Outcome::default();
    let n = ctx.cfg.n_paths;
    let seed = ctx.seeds.take("stationary noise segments", n);
    let lags: Vec<usize> = NOISE_LAGS.iter().map(|t| (t / NOISE_DT).round() as usize).collect();
    let disc = &ctx.disc;
    let run = run_ensemble(n, seed, ctx.flags.workers, |_, rng| {
        let prop = disc.propagator(NOISE_DT)?;
        let mut s = disc.init_stationary(rng);
        let mut v = Vec::with_capacity(NOISE_STEPS);
        for _ in 0..NOISE_STEPS {
            v.push(s.sample_v());
            s.advance(&prop, rng);
        }
        Ok(lags
            .iter()
            .map(|&l| {
                let m = NOISE_STEPS - l;
                (0..m).map(|i| v[i] * v[i + l]).sum::<f64>() / m as f64
            })
            .collect::<Vec<f64>>())
    })?;
    let mut table = Table::new("noise_covariance.csv", &["tau", "r_hat", "se", "r_exact", "r_modes"]);
    for (k, &tau) in NOISE_LAGS.iter().enumerate() {
        let col: Vec<f64> = run.records.iter().map(|r| r[k]).collect();
        let est = Estimate::from_samples(&col);
        let exact = ctx.density.covariance(tau)?;
        let modes = ctx.disc.covariance(tau);
        table.values(&[tau, est.mean, est.std_err, exact, modes]);
        out.checks.push(Check::new(
            &format!("covariance_tau_{tau}"),
            est.within_se(exact, tol::K_SE),
            est.mean,
            exact,
            tol::K_SE * est.std_err,
            format!("R({tau}) = {:.5} ± {:.5}, exact {exact:.5}", est.mean, est.std_err),
        ));
    }
    let times: Vec<f64> = (0..=40).map(|k| 0.25 * k as f64).collect();
    let rec = ctx.disc.reconstruction_error(&ctx.density, &times)?;
    out.checks.push(Check::new(
        "mode_reconstruction",
        rec <= tol::RECONSTRUCTION,
        rec,
        0.0,
        tol::RECONSTRUCTION,
        format!("max relative error of the {}-mode covariance on [0, 10]", ctx.disc.len()),
    ));
    out.tables.push(table);
    out.tolerance("k_se", tol::K_SE);
    out.tolerance("reconstruction", tol::RECONSTRUCTION);
    out.result("dt", NOISE_DT);
    out.result("steps_per_segment", NOISE_STEPS as u64);
    Ok(out)
}

fn quadratic_demo(ctx: &mut Context) -> Result<Outcome> {
    let mut out = Outcome::default();
    let eps = ctx.smallest_eps();
    let n = ctx.cfg.n_paths;
    let t = ctx.cfg.horizon;
    let d = ctx.d11();
    let m = PI * d;
    let h0 = ctx.initial_energy();
    let i0 = 2.0 * PI * h0;
    let cfg = ctx.sim_config(eps);
    let seed = ctx.seeds.take(format!("oscillator eps={eps}"), n);
    let disc = &ctx.disc;
    let h = run_ensemble(n, seed, ctx.flags.workers, |_, rng| {
        Ok(*integrate_rescaled(&cfg, disc, rng)?.h.last().expect("nonempty record"))
    })?
    .records;
    let ref_seed = ctx.seeds.take("exact Bessel reference", n);
    let reference = run_ensemble(n, ref_seed, ctx.flags.workers, |_, rng| {
        Ok(simulate_bessel_exact(m, i0, &[t], rng)?[0] / (2.0 * PI))
    })?
    .records;
    let est = Estimate::from_samples(&h);
    let target = h0 + d * t;
    let ks = ks_two_sample(&h, &reference)?;
    let (lo, hi) = est.ci95();
    out.checks.push(Check::new(
        "mean_energy",
        est.within_ci95(target),
        est.mean,
        target,
        1.96 * est.std_err,
        format!("E[H(X_T)] = {:.5}, 95% CI [{lo:.5}, {hi:.5}], target H0 + D11 T = {target:.5}", est.mean),
    ));
    out.checks.push(Check::new(
        "ks_exact_bessel",
        ks.statistic < tol::KS_MAX && ks.p_value > tol::KS_ALPHA,
        ks.statistic,
        0.0,
        tol::KS_MAX,
        format!("two-sample KS against exact Bessel energies, p = {:.4}", ks.p_value),
    ));
    let mut table = Table::new("quadratic_demo.csv", &["eps", "n_paths", "mean_H", "se", "target", "ks", "p_value"]);
    table.values(&[eps, n as f64, est.mean, est.std_err, target, ks.statistic, ks.p_value]);
    out.tables.push(table);

    // path 0 again, recorded densely; recording does not consume random numbers
    let mut dense = cfg.clone();
    dense.record_stride = (cfg.fast_grid().0 / TRAJECTORY_ROWS).max(1);
    let rec = integrate_rescaled(&dense, disc, &mut oscidrift::rng::path_rng(seed, 0))?;
    let actions: Vec<f64> = rec.h.iter().map(|e| 2.0 * PI * e).collect();
    let lo_i = actions.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_i = actions.iter().cloned().fold(0.0, f64::max);
    let chart = ctx.chart(&log_grid(0.5 * lo_i, 2.0 * hi_i, 8.0), 128)?;
    let rec = split_angle(&rec, &chart)?;
    let mut buf = Vec::new();
    rec.write_csv(&mut buf)?;
    out.tables.push(Table::from_text("trajectory.csv", String::from_utf8(buf)?));

    out.tolerance("ks_max", tol::KS_MAX);
    out.tolerance("ks_alpha", tol::KS_ALPHA);
    out.tolerance("ci_level", 0.95);
    out.result("eps", eps);
    out.result("H0", h0);
    out.result("I0", i0);
    out.result("mean_H", est.mean);
    out.result("se_H", est.std_err);
    out.result("target_H", target);
    out.result("trajectory_path", serde_json::json!({"seed": seed, "index": 0}));
    Ok(out)
}

fn limit_coeffs(ctx: &mut Context) -> Result<Outcome> {
    let mut out = Outcome::default();
    let route = ctx.flags.route;
    let i0 = ctx.initial_action()?;
    let grid = default_action_grid(i0);
    let chart = ctx.chart(&grid, COEFF_THETA)?;
    let fourier = match route {
        Route::LineIntegral => None,
        _ => Some(fourier_coefficients_route(&chart, &ctx.disc, &grid)?),
    };
    let line = match route {
        Route::Fourier => None,
        _ => {
            let energies: Vec<f64> = chart.rows.iter().map(|r| r.energy).collect();
            Some(line_integral_route(&chart, &ctx.disc, &energies)?)
        }
    };
    let mut table = Table::new(
        "coefficients.csv",
        &["I", "a_bold", "b_bold", "c_cross", "b_psi", "omega", "Sigma", "Lambda"],
    );
    for (k, row) in chart.rows.iter().enumerate() {
        let f = fourier.as_ref();
        let l = line.as_ref().map(|l| l[k]);
        table.row(&[
            Some(row.action),
            f.map(|c| c.a_bold[k]),
            f.map(|c| c.b_bold[k]),
            f.map(|c| c.c_cross[k]),
            f.map(|c| c.b_psi[k]),
            Some(row.omega),
            l.map(|l| l.sigma),
            l.map(|l| l.lambda),
        ]);
    }
    out.tables.push(table);
    if let (Some(co), Some(li)) = (&fourier, &line) {
        let worst = max_rel(li.iter().zip(co.a_bold.iter().zip(&co.omega)).map(|(l, (a, w))| (l.sigma, w * a)));
        out.checks.push(Check::new(
            "two_route",
            worst <= tol::TWO_ROUTE_REL,
            worst,
            0.0,
            tol::TWO_ROUTE_REL,
            format!("max |Sigma(K(I)) / (omega a) - 1| over {} actions", grid.len()),
        ));
    }
    let m = PI * ctx.d11();
    if ctx.model.is_quadratic() {
        if let Some(co) = &fourier {
            let worst = max_rel(grid.iter().zip(&co.a_bold).map(|(i, a)| (*a, 4.0 * m * i)));
            out.checks.push(Check::new(
                "quadratic_closed_form",
                worst <= tol::CLOSED_FORM_REL,
                worst,
                0.0,
                tol::CLOSED_FORM_REL,
                format!("max |a / (4 m I) - 1|, m = {m:.6}"),
            ));
        }
    }
    out.tolerance("two_route_rel", tol::TWO_ROUTE_REL);
    out.tolerance("closed_form_rel", tol::CLOSED_FORM_REL);
    out.result("route", serde_json::to_value(route)?);
    out.result("grid_points", grid.len() as u64);
    out.result("n_theta", COEFF_THETA as u64);
    out.result("I_ref", i0);
    if let Some(co) = &fourier {
        out.result("max_truncation", co.truncation.iter().copied().max().unwrap_or(0) as u64);
    }
    Ok(out)
}

/// Action grid reaching far below `I₀`, for converting energies to actions.
fn wide_grid(i0: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (0..48).map(|k| i0 * 10f64.powf(-6.0 + k as f64 / 8.0)).collect();
    g.extend((0..40).map(|k| i0 * (1.0 + k as f64)));
    g
}

fn convergence_study(ctx: &mut Context) -> Result<Outcome> {
    let mut out = Outcome::default();
    let n = ctx.cfg.n_paths;
    let t = ctx.cfg.horizon;
    let workers = ctx.flags.workers;
    let i0 = ctx.initial_action()?;
    let d = ctx.d11();
    let m = PI * d;
    let quadratic = ctx.model.is_quadratic();
    // quartic actions come from the chart; values outside it are censored at its ends
    let chart = if quadratic {
        None
    } else {
        Some(ctx.chart(&wide_grid(i0), COEFF_THETA)?)
    };
    let clamp = |i: f64| match &chart {
        Some(c) => {
            let (lo, hi) = c.action_range();
            i.clamp(lo, hi)
        }
        None => i,
    };
    let to_action = |e: f64| -> oscidrift::Result<f64> {
        match &chart {
            None => Ok(2.0 * PI * e),
            Some(c) => {
                let lo = c.rows[0].energy;
                let hi = c.rows[c.rows.len() - 1].energy;
                c.action_of_energy(e.clamp(lo, hi))
            }
        }
    };
    let ref_seed = ctx.seeds.take("limit reference", n);
    let reference: Vec<f64> = match &chart {
        None => run_ensemble(n, ref_seed, workers, |_, rng| Ok(simulate_bessel_exact(m, i0, &[t], rng)?[0]))?.records,
        Some(c) => {
            let grid: Vec<f64> = c.actions().into_iter().filter(|&i| i >= MIN_JOINT_ACTION.max(1e-3 * i0)).collect();
            let co: LimitCoeffs = fourier_coefficients_route(c, &ctx.disc, &grid)?;
            run_ensemble(n, ref_seed, workers, |_, rng| {
                Ok(clamp(simulate_limit_joint(&co, i0, 0.0, &[t], tol::SDE_DT, rng)?.action[0]))
            })?
            .records
        }
    };
    let r_est = Estimate::from_samples(&reference);
    let mut table = Table::new(
        "convergence.csv",
        &["eps", "n_paths", "mean_I", "se_I", "ref_mean", "ref_se", "ks", "p_value"],
    );
    let mut last = None;
    for &eps in &ctx.cfg.eps {
        let cfg = ctx.sim_config(eps);
        let seed = ctx.seeds.take(format!("oscillator eps={eps}"), n);
        let disc = &ctx.disc;
        let samples = run_ensemble(n, seed, workers, |_, rng| {
            to_action(*integrate_rescaled(&cfg, disc, rng)?.h.last().expect("nonempty record"))
        })?
        .records;
        let est = Estimate::from_samples(&samples);
        let ks = ks_two_sample(&samples, &reference)?;
        table.values(&[eps, n as f64, est.mean, est.std_err, r_est.mean, r_est.std_err, ks.statistic, ks.p_value]);
        last = Some((eps, est, ks));
    }
    out.tables.push(table);
    let (eps, est, ks) = last.expect("nonempty eps list");
    let se = (est.std_err.powi(2) + r_est.std_err.powi(2)).sqrt();
    out.checks.push(Check::new(
        "mean_action_smallest_eps",
        (est.mean - r_est.mean).abs() <= tol::K_SE * se,
        est.mean,
        r_est.mean,
        tol::K_SE * se,
        format!("E[I_T] at eps = {eps} against the limit diffusion"),
    ));
    out.checks.push(Check::new(
        "ks_smallest_eps",
        ks.p_value > tol::KS_ALPHA,
        ks.p_value,
        tol::KS_ALPHA,
        tol::KS_ALPHA,
        format!("two-sample KS p-value at eps = {eps} (statistic {:.4})", ks.statistic),
    ));
    out.tolerance("k_se", tol::K_SE);
    out.tolerance("ks_alpha", tol::KS_ALPHA);
    out.result("I0", i0);
    out.result(
        "reference",
        if quadratic { "exact squared Bessel law" } else { "Euler-Maruyama limit diffusion" },
    );
    if quadratic {
        out.result("limit_mean", i0 + 2.0 * m * t);
    } else {
        out.tolerance("sde_dt", tol::SDE_DT);
    }
    Ok(out)
}

fn fbm_check(ctx: &mut Context) -> Result<Outcome> {
    let mut out = Outcome::default();
    let target = FbmTarget::for_density(&ctx.density)?;
    let n = ctx.cfg.n_paths;
    let t_end = ctx.cfg.horizon;
    let times = [0.25 * t_end, 0.5 * t_end, t_end];
    let h2 = 2.0 * target.hurst;
    let mut table = Table::new("fbm.csv", &["eps", "t", "var_u", "var_target", "ratio"]);
    let mut raw = Vec::new();
    let mut scaled_last = Vec::new();
    let mut ratio_last = 0.0;
    for &eps in &ctx.cfg.eps {
        let seed = ctx.seeds.take(format!("noise eps={eps}"), n);
        let disc = &ctx.disc;
        let dt = ctx.cfg.dt_fast();
        let paths = run_ensemble(n, seed, ctx.flags.workers, |_, rng| {
            Ok(noise_path(disc, eps, &times, dt, rng)?.integral)
        })?
        .records;
        let sigma = target.sigma(eps)?;
        scaled_last.clear();
        for (k, &t) in times.iter().enumerate() {
            let u: Vec<f64> = paths.iter().map(|p| p[k] / sigma).collect();
            let var = Estimate::variance_of(&u).mean;
            let want = target.sigma_h_sq * t.powf(h2);
            table.values(&[eps, t, var, want, var / want]);
            scaled_last.push(var / t.powf(h2));
            ratio_last = var / want;
        }
        let end: Vec<f64> = paths.iter().map(|p| p[2] / eps).collect();
        raw.push(Estimate::variance_of(&end).mean);
    }
    out.tables.push(table);
    let eps_min = ctx.smallest_eps();
    out.checks.push(Check::new(
        "variance_at_T",
        (ratio_last - 1.0).abs() <= tol::FBM_VAR_REL,
        ratio_last,
        1.0,
        tol::FBM_VAR_REL,
        format!("Var(u(T)) / (sigma_H^2 T^2H) at eps = {eps_min}"),
    ));
    let smax = scaled_last.iter().cloned().fold(f64::MIN, f64::max);
    let smin = scaled_last.iter().cloned().fold(f64::MAX, f64::min);
    out.checks.push(Check::new(
        "self_similarity",
        smax / smin - 1.0 <= tol::FBM_SELF_SIM_REL,
        smax / smin - 1.0,
        0.0,
        tol::FBM_SELF_SIM_REL,
        format!("spread of Var(u(t)) / t^2H over t = T/4, T/2, T at eps = {eps_min}"),
    ));
    for k in 1..ctx.cfg.eps.len() {
        let (e0, e1) = (ctx.cfg.eps[k - 1], ctx.cfg.eps[k]);
        let pred = (target.sigma(e1)? / e1).powi(2) / (target.sigma(e0)? / e0).powi(2);
        let got = raw[k] / raw[k - 1];
        out.checks.push(Check::new(
            &format!("divergence_contrast_{e0}_{e1}"),
            (got / pred - 1.0).abs() <= tol::FBM_CONTRAST_REL,
            got,
            pred,
            tol::FBM_CONTRAST_REL,
            "growth of Var((1/eps) int v) against (sigma(eps)/eps)^2".into(),
        ));
    }
    out.tolerance("var_rel", tol::FBM_VAR_REL);
    out.tolerance("self_similarity_rel", tol::FBM_SELF_SIM_REL);
    out.tolerance("contrast_rel", tol::FBM_CONTRAST_REL);
    out.result("gamma", target.gamma);
    out.result("hurst", target.hurst);
    out.result("sigma_h_sq", target.sigma_h_sq);
    out.result("c0", target.c0);
    Ok(out)
}

fn exit_prob(ctx: &mut Context) -> Result<Outcome> {
    let mut out = Outcome::default();
    let ex = ctx.cfg.exit.expect("validated exit block");
    let n = ctx.cfg.n_paths;
    let grid = default_action_grid(ex.upper / 10.0);
    ensure!(grid[0] < ex.lower, "exit interval reaches below the coefficient table");
    let chart = ctx.chart(&grid, COEFF_THETA)?;
    let co = fourier_coefficients_route(&chart, &ctx.disc, &grid)?;
    let (_, p_up) = exit_probability(&co, ex.lower, ex.upper, ex.i0)?;
    let seed = ctx.seeds.take("exit paths", n);
    let m = co.m;
    let quadratic = ctx.model.is_quadratic();
    let hits = run_ensemble(n, seed, ctx.flags.workers, |_, rng| {
        Ok(if quadratic {
            bessel_exits_upper(m, ex.i0, ex.lower, ex.upper, rng)
        } else {
            limit_exits_upper(&co, ex.i0, ex.lower, ex.upper, tol::SDE_DT, rng)?
        })
    })?
    .records;
    let freq = hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
    let se = (p_up * (1.0 - p_up) / hits.len() as f64).sqrt();
    out.checks.push(Check::new(
        "exit_frequency",
        (freq - p_up).abs() <= tol::K_SE * se,
        freq,
        p_up,
        tol::K_SE * se,
        format!(
            "P(hit {} before {} | I0 = {}) by the scale function against {} paths",
            ex.upper, ex.lower, ex.i0, hits.len()
        ),
    ));
    let mut table = Table::new("exit.csv", &["lower", "upper", "i0", "p_upper_formula", "p_upper_mc", "se"]);
    table.values(&[ex.lower, ex.upper, ex.i0, p_up, freq, se]);
    out.tables.push(table);
    let mut scale = Table::new("scale_function.csv", &["I", "p"]);
    for i in log_grid(ex.lower, ex.upper, 16.0) {
        scale.values(&[i, scale_function(&co, i)?]);
    }
    out.tables.push(scale);
    out.tolerance("k_se", tol::K_SE);
    out.result("p_upper", p_up);
    out.result(
        "mc_route",
        if quadratic { "exact squared Bessel steps" } else { "Euler-Maruyama limit diffusion" },
    );
    Ok(out)
}

fn w_integrals(ctx: &mut Context) -> Result<Outcome> {
    let mut out = Outcome::default();
    let n = ctx.cfg.n_paths;
    let t_end = ctx.cfg.horizon;
    let fractions = [0.8, 0.9, 0.95, 0.975, 0.9875, 1.0];
    let times: Vec<f64> = fractions.iter().map(|f| f * t_end).collect();
    let d = ctx.d11();
    let mut table = Table::new(
        "w_integrals.csv",
        &["eps", "t", "mean_w1sq", "se_w1sq", "mean_w2sq", "se_w2sq", "mean_w1w2", "se_w1w2", "target"],
    );
    let mut incr_table = Table::new("w_increments.csv", &["eps", "lag", "mean_sq_increment"]);
    let mut last = None;
    for &eps in &ctx.cfg.eps {
        let seed = ctx.seeds.take(format!("noise eps={eps}"), n);
        let disc = &ctx.disc;
        let dt = ctx.cfg.dt_fast();
        let paths = run_ensemble(n, seed, ctx.flags.workers, |_, rng| noise_path(disc, eps, &times, dt, rng))?.records;
        let col = |k: usize, w: fn(&oscidrift::oscillator::NoisePath) -> &Vec<f64>| -> Vec<f64> {
            paths.iter().map(|p| w(p)[k]).collect()
        };
        let mut at_end = None;
        for (k, &t) in times.iter().enumerate() {
            let (w1, w2) = (col(k, |p| &p.w1), col(k, |p| &p.w2));
            let (s1, s2, x) = (
                Estimate::of_products(&w1, &w1),
                Estimate::of_products(&w2, &w2),
                Estimate::of_products(&w1, &w2),
            );
            table.values(&[eps, t, s1.mean, s1.std_err, s2.mean, s2.std_err, x.mean, x.std_err, d * t]);
            at_end = Some((s1, s2, x));
        }
        let k_end = times.len() - 1;
        let end = col(k_end, |p| &p.w1);
        let mut lags = Vec::new();
        let mut incr = Vec::new();
        for k in (0..k_end).rev() {
            let w = col(k, |p| &p.w1);
            let ms = end.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
            let lag = t_end - times[k];
            incr_table.values(&[eps, lag, ms]);
            lags.push(lag);
            incr.push(ms);
        }
        last = Some((eps, at_end.expect("nonempty grid"), trend_fit(&lags, &incr)?));
    }
    out.tables.push(table);
    out.tables.push(incr_table);
    let (eps, (s1, s2, x), fit) = last.expect("nonempty eps list");
    let target = d * t_end;
    for (name, est) in [("w1_square", s1), ("w2_square", s2)] {
        out.checks.push(Check::new(
            name,
            est.within_se(target, tol::K_SE),
            est.mean,
            target,
            tol::K_SE * est.std_err,
            format!("second moment at T, eps = {eps}, target D11 T"),
        ));
    }
    out.checks.push(Check::new(
        "w1_w2_cross",
        x.within_se(0.0, tol::K_SE),
        x.mean,
        0.0,
        tol::K_SE * x.std_err,
        format!("E[w1(T) w2(T)] at eps = {eps}"),
    ));
    let bound = 1.0 - ctx.density.gamma_exponent().gamma;
    out.checks.push(Check::new(
        "increment_order",
        fit.exponent >= bound,
        fit.exponent,
        bound,
        0.0,
        format!("log-log slope of E|w1(T) - w1(T - lag)|^2 at eps = {eps} is at least 1 - gamma"),
    ));
    out.tolerance("k_se", tol::K_SE);
    out.result("increment_exponent", fit.exponent);
    out.result("increment_r_squared", fit.r_squared);
    Ok(out)
}
