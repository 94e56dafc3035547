//! Ensemble execution and the statistics used by the acceptance checks.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::sync_channel;

use crate::error::{Error, Result};
use crate::rng::{path_rng, PathRng};

/// Per-path results of an ensemble, ordered by path index.
#[derive(Debug, Clone)]
pub struct EnsembleRun<T> {
    pub base_seed: u64,
    pub n_paths: usize,
    pub records: Vec<T>,
    /// `(path index, message)` for every failed path.
    pub failures: Vec<(usize, String)>,
}

/// Runs `task(index, rng)` for every path on `workers` threads.
///
/// Path `i` always draws from `path_rng(base_seed, i)` and the reducer stores
/// results by index, so the outcome does not depend on the worker count.
/// More than 1% failed paths is an error.
pub fn run_ensemble<T, F>(
    n_paths: usize,
    base_seed: u64,
    workers: usize,
    task: F,
) -> Result<EnsembleRun<T>>
where
    T: Send,
    F: Fn(usize, &mut PathRng) -> Result<T> + Sync,
{
    if n_paths < 2 {
        return Err(Error::Parameter(format!(
            "an ensemble needs at least 2 paths, got {n_paths}"
        )));
    }
    let workers = workers.max(1).min(n_paths);
    let next = AtomicUsize::new(0);
    let (tx, rx) = sync_channel::<(usize, Result<T>)>(4 * workers);
    let mut slots: Vec<Option<Result<T>>> = (0..n_paths).map(|_| None).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let task = &task;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n_paths {
                    break;
                }
                let mut rng = path_rng(base_seed, i as u64);
                if tx.send((i, task(i, &mut rng))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, r) in rx {
            slots[i] = Some(r);
        }
    });
    let mut records = Vec::with_capacity(n_paths);
    let mut failures = Vec::new();
    for (i, s) in slots.into_iter().enumerate() {
        match s {
            Some(Ok(v)) => records.push(v),
            Some(Err(e)) => failures.push((i, e.to_string())),
            None => failures.push((i, "path was not executed".into())),
        }
    }
    if failures.len() * 100 > n_paths {
        return Err(Error::Ensemble(format!(
            "{} of {n_paths} paths failed; first: path {} ({})",
            failures.len(),
            failures[0].0,
            failures[0].1
        )));
    }
    Ok(EnsembleRun {
        base_seed,
        n_paths,
        records,
        failures,
    })
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub n: usize,
    pub mean: f64,
    pub std_err: f64,
    /// Unbiased sample variance of the per-path values.
    pub variance: f64,
}

impl Estimate {
    pub fn from_samples(x: &[f64]) -> Self {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            n,
            mean,
            std_err: (variance / n as f64).sqrt(),
            variance,
        }
    }

    /// Mean of per-path products `x_i·y_i`.
    pub fn of_products(x: &[f64], y: &[f64]) -> Self {
        let p: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
        Self::from_samples(&p)
    }

    /// Sample variance with the standard error of that variance, from
    /// per-path squared deviations.
    pub fn variance_of(x: &[f64]) -> Self {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let n = x.len() as f64;
        let d: Vec<f64> = x.iter().map(|v| (v - m).powi(2) * n / (n - 1.0)).collect();
        Self::from_samples(&d)
    }

    pub fn ci95(&self) -> (f64, f64) {
        (
            self.mean - 1.96 * self.std_err,
            self.mean + 1.96 * self.std_err,
        )
    }

    pub fn within_ci95(&self, target: f64) -> bool {
        let (lo, hi) = self.ci95();
        target >= lo && target <= hi
    }

    pub fn within_se(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

/// Moments of an ensemble of paths recorded on a common time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub n_paths: usize,
    pub base_seed: u64,
    pub times: Vec<f64>,
    pub means: Vec<Estimate>,
    pub variances: Vec<Estimate>,
    pub failures: Vec<(usize, String)>,
}

impl EnsembleSummary {
    pub fn from_paths(
        base_seed: u64,
        times: &[f64],
        paths: &[Vec<f64>],
        failures: Vec<(usize, String)>,
    ) -> Result<Self> {
        if paths.iter().any(|p| p.len() != times.len()) {
            return Err(Error::Parameter(
                "every path must match the time grid".into(),
            ));
        }
        let column = |k: usize| paths.iter().map(|p| p[k]).collect::<Vec<_>>();
        Ok(Self {
            n_paths: paths.len() + failures.len(),
            base_seed,
            times: times.to_vec(),
            means: (0..times.len())
                .map(|k| Estimate::from_samples(&column(k)))
                .collect(),
            variances: (0..times.len())
                .map(|k| Estimate::variance_of(&column(k)))
                .collect(),
            failures,
        })
    }

    /// Seed pair that regenerates path `index`.
    pub fn path_seed(&self, index: usize) -> (u64, u64) {
        (self.base_seed, index as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov distribution tail with the Stephens correction.
fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    let lam = (s + 0.12 + 0.11 / s) * d;
    if lam < 0.2 {
        return 1.0;
    }
    let mut q = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lam * lam).exp();
        q += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * q).clamp(0.0, 1.0)
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Parameter("KS test needs nonempty samples".into()));
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
    })
}

pub fn ks_one_sample<F: Fn(f64) -> f64>(x: &[f64], cdf: F) -> Result<KsResult> {
    if x.is_empty() {
        return Err(Error::Parameter("KS test needs a nonempty sample".into()));
    }
    let x = sorted(x);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn trend_fit(x: &[f64], y: &[f64]) -> Result<TrendFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Parameter(
            "trend fit needs at least three matching pairs".into(),
        ));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("trend fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("trend fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(TrendFit {
        exponent: slope,
        intercept: my - slope * mx,
        r_squared,
    })
}
