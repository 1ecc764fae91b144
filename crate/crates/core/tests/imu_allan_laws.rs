use rigkit::imu_allan::synthetic::{random_walk, white_noise};
use rigkit::imu_allan::*;

const RATE: f64 = 100.0;

#[test]
fn white_noise_law() {
    let sigma = 0.01;
    let y = white_noise(sigma, 1_000_000, 42);
    let c = allan_deviation(&y, RATE, &default_tau_grid(y.len(), RATE)).unwrap();
    let density = sigma / RATE.sqrt();

    for (tau, adev) in c.taus_s.iter().zip(&c.adev) {
        if *tau < 10.0 / RATE || *tau > y.len() as f64 / (10.0 * RATE) {
            continue;
        }
        let want = density / tau.sqrt();
        // Equivalent degrees of freedom of the overlapping estimator for
        // white noise; beyond a few thousand samples per cluster its own
        // spread exceeds 5%, so the bound widens to four standard errors.
        let m = tau * RATE;
        let edf = 3.0 * (y.len() as f64 - 1.0) / (2.0 * m);
        let tol = f64::max(0.05, 4.0 / (2.0 * edf).sqrt());
        assert!((adev / want - 1.0).abs() < tol, "tau {tau}: {adev} vs {want}");
        if m * 1000.0 <= y.len() as f64 {
            assert!((adev / want - 1.0).abs() < 0.05, "tau {tau}: {adev} vs {want}");
        }
    }

    let n = estimate_noise_density(&c).unwrap();
    assert!((n.value / 0.001 - 1.0).abs() < 0.05, "N = {}", n.value);
    assert!((n.diagnostics.fitted_slope + 0.5).abs() < 0.05);
    assert!(n.diagnostics.n_points >= 3);

    assert!(matches!(
        estimate_random_walk(&c),
        Err(AllanError::NoRandomWalkRegion)
    ));
}

#[test]
fn white_noise_has_no_random_walk_region_across_seeds() {
    for seed in 0..8 {
        let y = white_noise(0.05, 200_000, seed);
        let c = allan_deviation(&y, RATE, &default_tau_grid(y.len(), RATE)).unwrap();
        assert!(
            matches!(estimate_random_walk(&c), Err(AllanError::NoRandomWalkRegion)),
            "seed {seed}"
        );
    }
}

#[test]
fn rate_random_walk_law() {
    let k = 2e-4;
    let y = random_walk(k, RATE, 10_000_000, 7);
    let c = allan_deviation(&y, RATE, &default_tau_grid(y.len(), RATE)).unwrap();
    let fit = estimate_random_walk(&c).unwrap();
    assert!((fit.value / k - 1.0).abs() < 0.10, "K = {}", fit.value);
    assert!((fit.diagnostics.fitted_slope - 0.5).abs() < 0.1);
}

#[test]
fn combined_signal_yields_both_parameters() {
    let (sigma, k) = (0.02, 1e-3);
    let n = 2_000_000;
    let w = white_noise(sigma, n, 11);
    let r = random_walk(k, RATE, n, 12);
    let y: Vec<f64> = w.iter().zip(&r).map(|(a, b)| a + b).collect();
    let log = ImuLog::new(
        RATE,
        [y.clone(), w.clone(), y.clone()],
        [w.clone(), y.clone(), w],
        None,
    )
    .unwrap();
    let report = characterize(&log, None).unwrap();
    let density = sigma / RATE.sqrt();
    let g = &report.gyroscope;
    assert!((g.noise_density.unwrap() / density - 1.0).abs() < 0.1);
    assert_eq!(g.random_walk_windows.len(), 2);
    assert!((g.random_walk.unwrap() / k - 1.0).abs() < 0.3);
    assert_eq!(report.axes[1].random_walk, None);
    assert_eq!(report.axes.iter().map(|a| a.axis.as_str()).collect::<Vec<_>>(), AXIS_NAMES);
}
