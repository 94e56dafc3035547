use oscidrift::rng::path_rng;
use oscidrift::stats::{ks_one_sample, ks_two_sample, run_ensemble, trend_fit, EnsembleSummary, Estimate};
use oscidrift::Error;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

fn gaussian_walk(rng: &mut oscidrift::rng::PathRng, n: usize) -> Vec<f64> {
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            x += z;
            x
        })
        .collect()
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let task = |_: usize, rng: &mut oscidrift::rng::PathRng| Ok(gaussian_walk(rng, 50));
    let one = run_ensemble(200, 42, 1, task).unwrap();
    let eight = run_ensemble(200, 42, 8, task).unwrap();
    assert_eq!(one.records, eight.records);
    assert_eq!(one.records[17], gaussian_walk(&mut path_rng(42, 17), 50));
}

#[test]
fn clt_mean() {
    let run = run_ensemble(10_000, 5, 4, |_, rng| Ok(rng.random::<f64>())).unwrap();
    let e = Estimate::from_samples(&run.records);
    assert!((e.mean - 0.5).abs() < 0.03);
    assert!((e.std_err - (1.0f64 / 12.0 / 1e4).sqrt()).abs() < 1e-4);
    assert!(e.within_ci95(0.5) || e.within_se(0.5, 3.0));
}

#[test]
fn failures_are_counted() {
    let some = run_ensemble(1000, 1, 3, |i, _| if i == 7 { Err(Error::Parameter("x".into())) } else { Ok(i) }).unwrap();
    assert_eq!(some.records.len(), 999);
    assert_eq!(some.failures.len(), 1);
    assert_eq!(some.failures[0].0, 7);
    let many = run_ensemble(100, 1, 3, |i, _| if i % 10 == 0 { Err(Error::Parameter("x".into())) } else { Ok(i) });
    assert!(matches!(many, Err(Error::Ensemble(_))));
    assert!(run_ensemble(1, 1, 1, |i, _| Ok(i)).is_err());
}

#[test]
fn ks_null_rejection_rate() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut accepted_one = 0;
    let mut accepted_two = 0;
    for rep in 0..100 {
        let mut rng = path_rng(77, rep);
        let a: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
        accepted_one += (ks_one_sample(&a, |x| normal.cdf(x)).unwrap().p_value > 0.01) as usize;
        accepted_two += (ks_two_sample(&a, &b).unwrap().p_value > 0.01) as usize;
    }
    assert!(accepted_one >= 95, "{accepted_one}");
    assert!(accepted_two >= 95, "{accepted_two}");
}

#[test]
fn ks_detects_a_shift() {
    let mut rng = path_rng(78, 0);
    let a: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let b: Vec<f64> = a.iter().map(|x| x + 0.3).collect();
    assert!(ks_two_sample(&a, &b).unwrap().p_value < 1e-6);
    assert!(ks_two_sample(&a, &[]).is_err());
}

#[test]
fn seed_ledger_regenerates_a_path() {
    let times: Vec<f64> = (1..=20).map(|k| k as f64).collect();
    let run = run_ensemble(64, 9, 4, |_, rng| Ok(gaussian_walk(rng, 20))).unwrap();
    let summary = EnsembleSummary::from_paths(run.base_seed, &times, &run.records, run.failures.clone()).unwrap();
    let (seed, index) = summary.path_seed(33);
    assert_eq!(gaussian_walk(&mut path_rng(seed, index), 20), run.records[33]);
    // a Gaussian walk has Var x_k = k
    let fit = trend_fit(&times, &summary.variances.iter().map(|v| v.mean).collect::<Vec<_>>()).unwrap();
    assert!((fit.exponent - 1.0).abs() < 0.2, "{fit:?}");
    assert!(EnsembleSummary::from_paths(1, &times[..3], &run.records, vec![]).is_err());
}

#[test]
fn trend_fit_recovers_power_laws() {
    let x = [0.1, 0.2, 0.4, 0.8];
    let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
    let f = trend_fit(&x, &y).unwrap();
    assert!((f.exponent - 1.5).abs() < 1e-12);
    assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    assert!((f.r_squared - 1.0).abs() < 1e-12);
    assert!(matches!(trend_fit(&x, &[1.0, -1.0, 1.0, 1.0]), Err(Error::Domain(_))));
    assert!(trend_fit(&x[..2], &y[..2]).is_err());
}
