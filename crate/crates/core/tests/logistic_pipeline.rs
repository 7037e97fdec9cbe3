use inversa_core::logistic::{
    analytic_r_series, fit_logistic, generate_logistic_data, normalized_loss, rate_reconstruction_error, FitMethod,
    FitOptions, LogisticDataset, LogisticParams, LossMode, NoiseSpec, Split,
};
use inversa_core::metrics::{avg_rel_error, avg_rel_error_by_approx};
use inversa_core::ode::{dp45_integrate, rk4_integrate, AdaptiveSettings, OdeProblem};
use inversa_core::{Series, TimeSeries};
use rand::{Rng, SeedableRng};

/// Closed-form logistic curve, written out independently of the library.
fn logistic(t: f64, r: f64, k: f64, p0: f64, t0: f64) -> f64 {
    k / (1.0 + (k / p0 - 1.0) * (-r * (t - t0)).exp())
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[test]
fn forward_solves_match_the_closed_form() {
    let (r, k, p0, t0, t1) = (0.079, 10.0, 20.0, 2011.0, 2022.0);
    let prob = OdeProblem::new(|_t: f64, y: f64| r * y * (1.0 - y / k), t0, t1, p0).unwrap();

    let rk4 = rk4_integrate(&prob, 100).unwrap();
    let exact: Vec<f64> = rk4.times.iter().map(|&t| logistic(t, r, k, p0, t0)).collect();
    let ours = rel_l2(&rk4.values, &exact) / 101.0;
    assert!(ours <= 4.2e-3);
    assert!((avg_rel_error(&rk4.values, &exact, 100).unwrap() - ours).abs() < 1e-18);

    let dp = dp45_integrate(&prob, &AdaptiveSettings::for_span(t0, t1).with_tolerances(1e-8, 1e-10)).unwrap();
    let exact: Vec<f64> = dp.times.iter().map(|&t| logistic(t, r, k, p0, t0)).collect();
    assert!(avg_rel_error_by_approx(&dp.values, &exact).unwrap() <= 1e-6);
    assert_eq!(*dp.times.last().unwrap(), t1);
}

#[test]
fn rk4_is_fourth_order_on_growth() {
    let prob = OdeProblem::new(|_t: f64, y: f64| y, 0.0, 1.0, 1.0).unwrap();
    let err = |n: usize| (rk4_integrate(&prob, n).unwrap().values[n] - 1f64.exp()).abs();
    let errs: Vec<f64> = [10, 20, 40, 80].iter().map(|&n| err(n)).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((14.0..=18.0).contains(&ratio), "{ratio}");
    }
}

#[test]
fn single_precision_rk4_runs() {
    let prob = OdeProblem::new(|_t: f32, y: f32| 0.5 * y * (1.0 - y / 4.0), 0.0f32, 5.0, 1.0).unwrap();
    let sol: TimeSeries<f32> = rk4_integrate(&prob, 50).unwrap();
    let end = logistic(5.0, 0.5, 4.0, 1.0, 0.0) as f32;
    assert!((sol.values[50] - end).abs() < 1e-5);
}

#[test]
fn pointwise_rates_reproduce_the_data() {
    let (k, p0, t0) = (1e6, 1e4, 0.0);
    let times: Vec<f64> = (1..=75).map(|i| i as f64 * 2.0).collect();
    let values: Vec<f64> = times.iter().map(|&t| logistic(t, 0.13, k, p0, t0)).collect();
    let data = Series::new(times, values).unwrap();
    let rates = analytic_r_series(&data, k, p0, t0).unwrap();
    // near saturation K - p cancels, so only the early rates are sharp
    for (t, r) in rates.times.iter().zip(&rates.values).filter(|(t, _)| **t <= 50.0) {
        assert!((r - 0.13).abs() < 1e-12, "t = {t}: {r}");
    }
    assert!(rate_reconstruction_error(&data, &rates, k, p0, t0) <= 1e-12);
}

fn appendix(m: usize, noise: NoiseSpec, seed: u64) -> LogisticDataset {
    let truth = LogisticParams::new(0.13, 1e6, 1e4, 0.0).unwrap();
    generate_logistic_data(truth, 0.0, 200.0, m, noise, seed).unwrap()
}

#[test]
fn quasi_newton_recovers_r_from_every_guess() {
    let ds = appendix(201, NoiseSpec::None, 0);
    for method in [FitMethod::Bfgs, FitMethod::Box] {
        for f in [0.5, 0.75, 0.9, 1.1, 1.5] {
            let rep = fit_logistic(&ds, LossMode::ROnly, method, &[f * 0.13], &FitOptions::default()).unwrap();
            assert!(rep.rel_errors[0] <= 1e-5, "{method:?} from {f}: {rep:?}");
            // reported feval is the loss at the reported estimate
            let again = normalized_loss(&rep.params_hat, &ds, LossMode::ROnly, Split::Train).unwrap();
            assert!((again - rep.feval).abs() <= 1e-12 * again.abs().max(f64::MIN_POSITIVE));
        }
    }
}

#[test]
fn noisy_recovery_with_many_samples() {
    let ds = appendix(100_001, NoiseSpec::GaussianPctOfMax { pct: 0.03 }, 1);
    for method in [FitMethod::Bfgs, FitMethod::Box] {
        for f in [0.5, 0.75, 0.9, 1.1, 1.5] {
            let rep = fit_logistic(&ds, LossMode::ROnly, method, &[f * 0.13], &FitOptions::default()).unwrap();
            assert!(rep.rel_errors[0] <= 1e-3, "{method:?} from {f}: {:e}", rep.rel_errors[0]);
        }
    }
}

#[test]
fn log_capacity_is_the_same_loss() {
    let ds = appendix(201, NoiseSpec::None, 0);
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    for _ in 0..1000 {
        let r = rng.gen_range(0.01..1.0);
        let k: f64 = 10f64.powf(rng.gen_range(4.5..7.0));
        let a = normalized_loss(&[r, k], &ds, LossMode::RAndK, Split::Train).unwrap();
        let b = normalized_loss(&[r, k.ln()], &ds, LossMode::RAndLogK, Split::Train).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs(), "{r} {k}: {a} vs {b}");
    }
}

#[test]
fn newton_in_log_coordinates() {
    let ds = appendix(201, NoiseSpec::None, 0);
    for f in [0.75, 0.9, 1.1] {
        let init = [f * 0.13, 1e6f64.ln()];
        let rep = fit_logistic(&ds, LossMode::RAndLogK, FitMethod::Newton, &init, &FitOptions::default()).unwrap();
        assert!(rep.rel_errors.iter().all(|&e| e <= 1e-8), "from {f}: {:?}", rep.rel_errors);
        assert!((rep.params_hat[1] - 1e6).abs() < 1e-2);
    }
}
