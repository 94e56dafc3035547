//! Acceptance suite: one line per criterion, baseline density throughout
//! (`r_s = 1`, `λ ≡ 1`, `α = 1/4`, `β = 1/2`, `μ = 1`).
//!
//! Criteria whose stated target contradicts an independently derived value
//! are listed in `KNOWN_UNATTAINABLE`. They are still evaluated against the
//! stated target and reported as FAIL, but do not change the exit status.
//! Any other failure, or a known one that starts passing, exits non-zero.
//!
//! Arguments that do not start with `-` filter criteria by id prefix.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use oscidrift::hamiltonian::{default_action_grid, ActionAngleChart, HamiltonianModel};
use oscidrift::limit::{
    besq2_cdf, bessel_exits_upper, d11, exit_probability, fourier_coefficients_route,
    line_integral_route, simulate_bessel_exact, simulate_limit_joint, LimitCoeffs, ACTION_FLOOR,
};
use oscidrift::noise::{NoiseDiscretization, SpectralDensity};
use oscidrift::oscillator::{
    integrate_rescaled, noise_path, NoisePath, SimConfig, DEFAULT_DT_FAST,
};
use oscidrift::rng::path_rng;
use oscidrift::stats::{ks_one_sample, ks_two_sample, run_ensemble, trend_fit, Estimate};
use oscidrift::{fbm, Result};

/// Tolerances and sample sizes as stated by the criteria.
mod tol {
    pub const NOISE_STEPS: usize = 1_000_000;
    pub const NOISE_DT: f64 = 0.05;
    pub const NOISE_LAGS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 5.0];
    pub const NOISE_K_SE: f64 = 3.0;

    pub const QUAD_PATHS: usize = 2000;
    pub const QUAD_EPS: f64 = 0.05;
    pub const QUAD_KS_MAX: f64 = 0.05;
    pub const QUAD_KS_ALPHA: f64 = 0.01;

    pub const W_PATHS: usize = 5000;
    pub const W_K_SE: f64 = 3.0;
    pub const W_EXPONENT_TARGET: f64 = 0.5;
    pub const W_EXPONENT_TOL: f64 = 0.1;
    pub const W_LAGS: [f64; 5] = [0.0125, 0.025, 0.05, 0.1, 0.2];

    pub const TWO_ROUTE_REL: f64 = 1e-4;
    pub const CLOSED_FORM_REL: f64 = 1e-6;
    pub const GRID_POINTS: usize = 48;

    pub const SDE_PATHS: usize = 10_000;
    pub const SDE_KS_MAX: f64 = 0.02;
    pub const SDE_K_SE: f64 = 3.0;
    pub const SDE_DT: f64 = 1e-3;

    pub const EXIT_TARGET: f64 = 1.0 / 3.0;
    pub const EXIT_FORMULA_TOL: f64 = 1e-6;
    pub const EXIT_MC_TOL: f64 = 0.03;
    pub const EXIT_PATHS: usize = 10_000;

    pub const FBM_PATHS: usize = 5000;
    pub const FBM_VAR_REL: f64 = 0.10;
    pub const FBM_SELF_SIM_REL: f64 = 0.15;
    pub const FBM_CONTRAST_REL: f64 = 0.20;
    pub const FBM_EPS: [f64; 3] = [0.2, 0.1, 0.05];

    pub const SMALL_ACTION_FACTOR: f64 = 2.0;
}

const KNOWN_UNATTAINABLE: &[&str] = &["3c", "5c", "6a", "6b"];
const WORKERS: usize = 4;

struct Line {
    id: &'static str,
    pass: bool,
    text: String,
}

fn line(id: &'static str, pass: bool, text: impl Into<String>) -> Line {
    Line {
        id,
        pass,
        text: text.into(),
    }
}

fn density() -> SpectralDensity {
    SpectralDensity::baseline()
}

fn disc() -> &'static NoiseDiscretization {
    static D: OnceLock<NoiseDiscretization> = OnceLock::new();
    D.get_or_init(|| density().discretize(64).expect("baseline discretization"))
}

fn quartic_chart() -> &'static ActionAngleChart {
    static C: OnceLock<ActionAngleChart> = OnceLock::new();
    C.get_or_init(|| {
        let grid = default_action_grid(PI);
        ActionAngleChart::build(&HamiltonianModel::QuarticWell { c4: 0.25 }, &grid, 256)
            .expect("quartic chart")
    })
}

fn quadratic_chart() -> &'static ActionAngleChart {
    static C: OnceLock<ActionAngleChart> = OnceLock::new();
    C.get_or_init(|| {
        let grid = default_action_grid(PI);
        ActionAngleChart::build(&HamiltonianModel::Quadratic, &grid, 256).expect("quadratic chart")
    })
}

const NOISE_GRID: [f64; 8] = [0.5, 0.8, 0.9, 0.95, 0.975, 0.9875, 1.0, 2.0];

fn grid_index(t: f64) -> usize {
    NOISE_GRID
        .iter()
        .position(|&g| (g - t).abs() < 1e-12)
        .expect("time on noise grid")
}

/// Noise functionals for every path of one ε, shared by criteria 3 and 7.
fn noise_ensemble(eps: f64) -> Result<Vec<NoisePath>> {
    let seed = 7_000 + (1.0 / eps).round() as u64;
    let run = run_ensemble(tol::W_PATHS, seed, WORKERS, |_, rng| {
        noise_path(disc(), eps, &NOISE_GRID, DEFAULT_DT_FAST, rng)
    })?;
    Ok(run.records)
}

fn noise_ensemble_005() -> &'static Vec<NoisePath> {
    static E: OnceLock<Vec<NoisePath>> = OnceLock::new();
    E.get_or_init(|| noise_ensemble(0.05).expect("noise ensemble"))
}

fn criterion_1() -> Result<Vec<Line>> {
    let d = disc();
    let prop = d.propagator(tol::NOISE_DT)?;
    let mut rng = path_rng(101, 0);
    let mut state = d.init_stationary(&mut rng);
    let mut v = Vec::with_capacity(tol::NOISE_STEPS);
    for _ in 0..tol::NOISE_STEPS {
        v.push(state.sample_v());
        state.advance(&prop, &mut rng);
    }
    let lags: Vec<usize> = tol::NOISE_LAGS
        .iter()
        .map(|t| (t / tol::NOISE_DT).round() as usize)
        .collect();
    let kmax = tol::NOISE_STEPS + lags.iter().max().unwrap();
    let r: Vec<f64> = (0..=kmax)
        .map(|k| d.covariance(k as f64 * tol::NOISE_DT))
        .collect();
    let mut out = Vec::new();
    let mut all = true;
    let mut parts = Vec::new();
    for (&tau, &l) in tol::NOISE_LAGS.iter().zip(&lags) {
        let m = tol::NOISE_STEPS - l;
        let est = (0..m).map(|i| v[i] * v[i + l]).sum::<f64>() / m as f64;
        // exact variance of the lagged product mean for a Gaussian sequence
        let mut var = r[0] * r[0] + r[l] * r[l];
        for k in 1..m {
            let w = (m - k) as f64 / m as f64;
            var += 2.0 * w * (r[k] * r[k] + r[k + l] * r[k.abs_diff(l)]);
        }
        let se = (var / m as f64).sqrt();
        let exact = if tau == 0.0 {
            4.0
        } else {
            2.0 * (PI / tau).sqrt() * statrs::function::erf::erf(tau.sqrt())
        };
        let ok = (est - exact).abs() <= tol::NOISE_K_SE * se;
        all &= ok;
        parts.push(format!("R({tau})={est:.4}/{exact:.4} (se {se:.4})"));
    }
    out.push(line(
        "1",
        all,
        format!("noise covariance within 3 s.e.: {}", parts.join(", ")),
    ));
    Ok(out)
}

fn criterion_2() -> Result<Vec<Line>> {
    let d = disc();
    let d11v = d11(d);
    let cfg = SimConfig::new(HamiltonianModel::Quadratic, tol::QUAD_EPS, 1.0);
    let run = run_ensemble(tol::QUAD_PATHS, 202, WORKERS, |_, rng| {
        let rec = integrate_rescaled(&cfg, d, rng)?;
        Ok(*rec.h.last().unwrap())
    })?;
    let h = run.records;
    let est = Estimate::from_samples(&h);
    let target = 0.5 + d11v;
    let (lo, hi) = est.ci95();
    let m = PI * d11v;
    let mut rng = path_rng(203, 0);
    let exact: Vec<f64> = (0..tol::QUAD_PATHS)
        .map(|_| simulate_bessel_exact(m, PI, &[1.0], &mut rng).map(|v| v[0] / (2.0 * PI)))
        .collect::<Result<_>>()?;
    let ks = ks_two_sample(&h, &exact)?;
    Ok(vec![
        line(
            "2a",
            est.within_ci95(target),
            format!(
                "E[H(X_1)] = {:.4}, 95% CI [{lo:.4}, {hi:.4}], target 0.5 + D11 = {target:.4}",
                est.mean
            ),
        ),
        line(
            "2b",
            ks.statistic < tol::QUAD_KS_MAX && ks.p_value > tol::QUAD_KS_ALPHA,
            format!(
                "KS(H(X_1), exact Bessel) = {:.4} (< {}), p = {:.3} (> {})",
                ks.statistic,
                tol::QUAD_KS_MAX,
                ks.p_value,
                tol::QUAD_KS_ALPHA
            ),
        ),
    ])
}

fn criterion_3() -> Result<Vec<Line>> {
    let d11v = d11(disc());
    let ens = noise_ensemble_005();
    let k1 = grid_index(1.0);
    let w1: Vec<f64> = ens.iter().map(|p| p.w1[k1]).collect();
    let w2: Vec<f64> = ens.iter().map(|p| p.w2[k1]).collect();
    let sq = Estimate::of_products(&w1, &w1);
    let cross = Estimate::of_products(&w1, &w2);
    let incr: Vec<f64> = tol::W_LAGS
        .iter()
        .map(|&lag| {
            let k0 = grid_index(1.0 - lag);
            ens.iter()
                .map(|p| (p.w1[k1] - p.w1[k0]).powi(2))
                .sum::<f64>()
                / ens.len() as f64
        })
        .collect();
    let fit = trend_fit(&tol::W_LAGS, &incr)?;
    let lo_bound = tol::W_EXPONENT_TARGET - tol::W_EXPONENT_TOL;
    Ok(vec![
        line(
            "3a",
            sq.within_se(d11v, tol::W_K_SE),
            format!(
                "E[w1(1)^2] = {:.4} ± {:.4}, target D11 = {d11v:.4}",
                sq.mean, sq.std_err
            ),
        ),
        line(
            "3b",
            cross.mean.abs() < tol::W_K_SE * cross.std_err,
            format!(
                "|E[w1(1) w2(1)]| = {:.4}, 3 s.e. = {:.4}",
                cross.mean.abs(),
                3.0 * cross.std_err
            ),
        ),
        line(
            "3c",
            (fit.exponent - tol::W_EXPONENT_TARGET).abs() <= tol::W_EXPONENT_TOL,
            format!(
                "increment exponent {:.3} (r2 {:.3}), target {} ± {}",
                fit.exponent,
                fit.r_squared,
                tol::W_EXPONENT_TARGET,
                tol::W_EXPONENT_TOL
            ),
        ),
        line(
            "3c-bound",
            fit.exponent >= lo_bound,
            format!(
                "increments decay at least like |t-s|^(1-gamma): exponent {:.3} >= {lo_bound}",
                fit.exponent
            ),
        ),
    ])
}

fn criterion_4() -> Result<Vec<Line>> {
    let d = disc();
    let mut out = Vec::new();
    for (name, chart) in [
        ("quadratic", quadratic_chart()),
        ("quartic", quartic_chart()),
    ] {
        let grid = chart.actions();
        assert_eq!(grid.len(), tol::GRID_POINTS);
        let co = fourier_coefficients_route(chart, d, &grid)?;
        let energies: Vec<f64> = chart.rows.iter().map(|r| r.energy).collect();
        let li = line_integral_route(chart, d, &energies)?;
        let worst = li
            .iter()
            .zip(co.a_bold.iter().zip(&co.omega))
            .map(|(l, (a, w))| (l.sigma / (w * a) - 1.0).abs())
            .fold(0.0, f64::max);
        out.push(line(
            "4a",
            worst <= tol::TWO_ROUTE_REL,
            format!(
                "{name}: max |Sigma(K(I)) / (omega a) - 1| = {worst:.2e} over {} actions",
                grid.len()
            ),
        ));
        if name == "quadratic" {
            let m = co.m;
            let worst = grid
                .iter()
                .zip(&co.a_bold)
                .map(|(i, a)| (a / (4.0 * m * i) - 1.0).abs())
                .fold(0.0, f64::max);
            out.push(line(
                "4b",
                worst <= tol::CLOSED_FORM_REL,
                format!("quadratic: max |a / (4 m I) - 1| = {worst:.2e}, m = {m:.4}"),
            ));
        }
    }
    Ok(out)
}

fn criterion_5() -> Result<Vec<Line>> {
    let chart = quadratic_chart();
    let co: LimitCoeffs = fourier_coefficients_route(chart, disc(), &chart.actions())?;
    let m = co.m;
    let run = run_ensemble(tol::SDE_PATHS, 505, WORKERS, |_, rng| {
        let p = simulate_limit_joint(&co, PI, 0.0, &[1.0], tol::SDE_DT, rng)?;
        Ok((p.action[0], p.reflections))
    })?;
    let i1: Vec<f64> = run.records.iter().map(|r| r.0).collect();
    let reflections: usize = run.records.iter().map(|r| r.1).sum();
    let touched = run.records.iter().filter(|r| r.1 > 0).count() as f64 / tol::SDE_PATHS as f64;
    // I/m is the squared radius of a planar Brownian motion; for a small
    // disk the probability of entering it by time t is E1(r0^2/2t)/(2 ln(1/radius)).
    let x0 = PI / m;
    let predicted = exp_integral_e1(x0 / 2.0) / (m / ACTION_FLOOR).ln();
    let ks = ks_one_sample(&i1, |x| besq2_cdf(m, PI, 1.0, x))?;
    let est = Estimate::from_samples(&i1);
    let target = PI + 2.0 * m;
    Ok(vec![
        line(
            "5a",
            ks.statistic < tol::SDE_KS_MAX,
            format!("KS(Euler-Maruyama I_1, exact BESQ2 law) = {:.4} (< {})", ks.statistic, tol::SDE_KS_MAX),
        ),
        line(
            "5b",
            est.within_se(target, tol::SDE_K_SE),
            format!("E[I_1] = {:.4} ± {:.4}, target pi + 2m = {target:.4}", est.mean, est.std_err),
        ),
        line(
            "5c",
            reflections == 0,
            format!(
                "positivity-floor reflections: {reflections} events on {:.2}% of paths (exact process enters the floor band on about {:.1}%)",
                100.0 * touched,
                100.0 * predicted
            ),
        ),
    ])
}

fn exp_integral_e1(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -x / k as f64;
        sum += term / k as f64;
        if term.abs() < 1e-17 {
            break;
        }
    }
    -0.577_215_664_901_532_9 - x.ln() - sum
}

fn criterion_6() -> Result<Vec<Line>> {
    let chart = quadratic_chart();
    let co = fourier_coefficients_route(chart, disc(), &chart.actions())?;
    let (_, up) = exit_probability(&co, 0.25, 4.0, 1.0)?;
    let m = co.m;
    let run = run_ensemble(tol::EXIT_PATHS, 606, WORKERS, |_, rng| {
        Ok(bessel_exits_upper(m, 1.0, 0.25, 4.0, rng))
    })?;
    let freq = run.records.iter().filter(|&&u| u).count() as f64 / tol::EXIT_PATHS as f64;
    Ok(vec![
        line(
            "6a",
            (up - tol::EXIT_TARGET).abs() <= tol::EXIT_FORMULA_TOL,
            format!("scale-function P(hit 4 before 0.25 | I0 = 1) = {up:.6}, target 1/3"),
        ),
        line(
            "6b",
            (freq - tol::EXIT_TARGET).abs() <= tol::EXIT_MC_TOL,
            format!(
                "exact-Bessel exit frequency = {freq:.4}, target 1/3 ± {}",
                tol::EXIT_MC_TOL
            ),
        ),
    ])
}

fn criterion_7() -> Result<Vec<Line>> {
    let target = fbm::FbmTarget::for_density(&density())?;
    let mut raw_var = Vec::new();
    let mut var_u_005 = Vec::new();
    for &eps in &tol::FBM_EPS {
        let owned;
        let ens: &Vec<NoisePath> = if eps == 0.05 {
            noise_ensemble_005()
        } else {
            owned = noise_ensemble(eps)?;
            &owned
        };
        assert!(ens.len() >= tol::FBM_PATHS);
        let sigma = target.sigma(eps)?;
        let k1 = grid_index(1.0);
        let raw: Vec<f64> = ens.iter().map(|p| p.integral[k1] / eps).collect();
        raw_var.push(Estimate::variance_of(&raw).mean);
        if eps == 0.05 {
            for t in [0.5, 1.0, 2.0] {
                let k = grid_index(t);
                let u: Vec<f64> = ens.iter().map(|p| p.integral[k] / sigma).collect();
                var_u_005.push(Estimate::variance_of(&u).mean);
            }
        }
    }
    let var1 = var_u_005[1];
    let rel = (var1 / target.sigma_h_sq - 1.0).abs();
    let scaled: Vec<f64> = [0.5f64, 1.0, 2.0]
        .iter()
        .zip(&var_u_005)
        .map(|(t, v)| v / t.powf(2.0 * target.hurst))
        .collect();
    let smax = scaled.iter().cloned().fold(f64::MIN, f64::max);
    let smin = scaled.iter().cloned().fold(f64::MAX, f64::min);
    let spread = smax / smin - 1.0;
    let mut contrast_ok = true;
    let mut parts = Vec::new();
    for k in 1..tol::FBM_EPS.len() {
        let (e0, e1) = (tol::FBM_EPS[k - 1], tol::FBM_EPS[k]);
        let pred = (target.sigma(e1)? / e1).powi(2) / (target.sigma(e0)? / e0).powi(2);
        let got = raw_var[k] / raw_var[k - 1];
        contrast_ok &= (got / pred - 1.0).abs() <= tol::FBM_CONTRAST_REL && got > 1.0;
        parts.push(format!("{e0}->{e1}: x{got:.3} vs x{pred:.3}"));
    }
    Ok(vec![
        line(
            "7a",
            rel <= tol::FBM_VAR_REL,
            format!(
                "Var(u(1)) = {var1:.4}, sigma_H^2 = {:.4}, rel. dev. {:.1}%",
                target.sigma_h_sq,
                100.0 * rel
            ),
        ),
        line(
            "7b",
            spread <= tol::FBM_SELF_SIM_REL,
            format!(
                "Var(u(t))/t^1.5 at t = 0.5, 1, 2: {:.4}, {:.4}, {:.4} (spread {:.1}%)",
                scaled[0],
                scaled[1],
                scaled[2],
                100.0 * spread
            ),
        ),
        line(
            "7c",
            contrast_ok,
            format!("raw-integral variance growth {}", parts.join(", ")),
        ),
    ])
}

fn criterion_8() -> Result<Vec<Line>> {
    let chart = quartic_chart();
    let lowest = chart.rows[0].action;
    let decade: Vec<_> = chart
        .rows
        .iter()
        .filter(|r| r.action <= 10.0 * lowest * (1.0 + 1e-12))
        .collect();
    let a_ratio: Vec<f64> = decade
        .iter()
        .map(|r| r.a.iter().fold(0.0f64, |m, v| m.max(v.abs())) / r.action.sqrt())
        .collect();
    let da_ratio: Vec<f64> = decade
        .iter()
        .map(|r| r.da_di.iter().fold(0.0f64, |m, v| m.max(v.abs())) * r.action.sqrt())
        .collect();
    let var = |v: &[f64]| {
        v.iter().cloned().fold(f64::MIN, f64::max) / v.iter().cloned().fold(f64::MAX, f64::min)
    };
    let (fa, fd) = (var(&a_ratio), var(&da_ratio));
    Ok(vec![line(
        "8",
        fa < tol::SMALL_ACTION_FACTOR && fd < tol::SMALL_ACTION_FACTOR,
        format!(
            "lowest decade ({} actions): max|a|/sqrt(I) varies x{fa:.4}, max|dI a|*sqrt(I) varies x{fd:.4}",
            decade.len()
        ),
    )])
}

fn main() {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let criteria: [(&str, &str, fn() -> Result<Vec<Line>>); 8] = [
        ("1", "noise covariance", criterion_1),
        ("2", "quadratic limit", criterion_2),
        ("3", "oscillatory integrals", criterion_3),
        ("4", "coefficient cross-check", criterion_4),
        ("5", "limiting SDE", criterion_5),
        ("6", "exit probabilities", criterion_6),
        ("7", "fBm renormalization", criterion_7),
        ("8", "small-action bounds", criterion_8),
    ];
    let mut unexpected = 0;
    let mut known = 0;
    let mut passed = 0;
    for (id, title, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| id.starts_with(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let lines = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(Ok(lines)) => lines,
            Ok(Err(e)) => vec![line(id, false, format!("{title}: error: {e}"))],
            Err(_) => vec![line(id, false, format!("{title}: panicked"))],
        };
        let secs = start.elapsed().as_secs_f64();
        for l in lines {
            let expected_red = KNOWN_UNATTAINABLE.contains(&l.id);
            let tag = match (l.pass, expected_red) {
                (true, false) => {
                    passed += 1;
                    "PASS"
                }
                (false, true) => {
                    known += 1;
                    "FAIL (known unattainable)"
                }
                (false, false) => {
                    unexpected += 1;
                    "FAIL"
                }
                (true, true) => {
                    unexpected += 1;
                    "PASS (listed as unattainable, re-examine)"
                }
            };
            println!("criterion {:<8} {tag:<26} {} [{secs:.1}s]", l.id, l.text);
        }
    }
    println!("acceptance: {passed} passed, {known} failed as known-unattainable, {unexpected} unexpected");
    if unexpected > 0 {
        std::process::exit(1);
    }
}
