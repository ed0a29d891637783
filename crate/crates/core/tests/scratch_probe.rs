// Temporary calibration probe; removed before release.
use ordex_core::asymptotics::*;
use ordex_core::harness::*;
use ordex_core::kernels::*;
use ordex_core::pathsim::{make_grid, GridLayout};

#[test]
#[ignore]
fn probe_criterion5_and_6() {
    // #5: n=r=2 Brownian at u=3, N=2048.
    let scheme = scaling_scheme_for(1.0, 0.5).unwrap();
    let spec = ExperimentSpec {
        process: ProcessConfig::gaussian(fbm_kernel(0.5).unwrap()),
        n: 2,
        r: 2,
        levels: vec![3.0],
        grid: make_grid(GridLayout::LogUniform, 2048, Some(1e-3)).unwrap(),
        horizon: 1.0,
        functional: FunctionalKind::SupProbability,
        scheme: None,
        batches: 122,
        batch_size: 16384,
        master_seed: 4242,
        memory_bound_bytes: DEFAULT_MEMORY_BOUND,
    };
    let t0 = std::time::Instant::now();
    let out = run_experiment(&spec).unwrap();
    let est = out.levels[0].estimate;
    let g = gaussian_marginal();
    let g2 = ordex_core::special::norm_tail(3.0).powi(2);
    let el2 = mean_sojourn_exact(3.0, 2, 2, &g, 0.5).unwrap();
    println!(
        "p2(3) = {:.4e} (se {:.2e}, hits ~{:.0}) vs G2 = {:.4e}; EL2/q = {:.4e}; p2/(EL2/q) = {:.3}; took {:?}",
        est.mean,
        est.stderr,
        est.mean * est.n_samples as f64,
        g2,
        el2 * 9.0,
        est.mean / (el2 * 9.0),
        t0.elapsed()
    );

    // #6: fbm(0.75) sojourn at u=4, N=2048.
    let spec6 = ExperimentSpec {
        process: ProcessConfig::gaussian(fbm_kernel(0.75).unwrap()),
        n: 1,
        r: 1,
        levels: vec![4.0],
        grid: make_grid(GridLayout::LogUniform, 2048, Some(1e-3)).unwrap(),
        horizon: 1.0,
        functional: FunctionalKind::Sojourn,
        scheme: Some(scaling_scheme_for(1.5, 0.75).unwrap()),
        batches: 122,
        batch_size: 16384,
        master_seed: 4242,
        memory_bound_bytes: DEFAULT_MEMORY_BOUND,
    };
    let t0 = std::time::Instant::now();
    let out = run_experiment(&spec6).unwrap();
    let l = &out.levels[0];
    println!(
        "fbm075 u=4: mean L = {:.3e} (se {:.1e}), positives = {}, inconsistencies = {}, took {:?}",
        l.estimate.mean,
        l.estimate.stderr,
        l.positive_sojourns.len(),
        l.inconsistencies,
        t0.elapsed()
    );
    for x in [0.2, 0.5, 1.0] {
        let e = excess_integral_sparse(&l.positive_sojourns, 122 * 16384, x).unwrap();
        let cf = theta_drift_closed_form(x, 0.75, 1);
        println!(
            "  x={x}: excess {:.4} (se {:.4}) vs closed form {:.4} diff/se = {:.2}",
            e.ratio,
            e.stderr,
            cf,
            (e.ratio - cf) / e.stderr
        );
    }
}

#[test]
#[ignore]
fn probe_theta_fit_windows() {
    for step in [0.05, 0.025, 0.0125] {
        let x_grid = vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 1.0, 2.0];
        let cfg = ThetaConfig {
            draws: 150_000,
            master_seed: 5,
            step: Some(step),
            ..Default::default()
        };
        let est = estimate_theta(1, 1.0, 0.5, 0.5, 1.0, &x_grid, &cfg).unwrap();
        let ys: Vec<String> = est
            .x_grid
            .iter()
            .zip(&est.theta)
            .skip(1)
            .take(5)
            .map(|(x, t)| format!("y({x})={:.4} y/x={:.3}", 1.0 - t, (1.0 - t) / x))
            .collect();
        let (tp, tse) = theta_prime_at_zero(&est).unwrap();
        println!("step {step}: tp={tp:.4} (se {tse:.4}) mean_occ={:.3} | {}", est.mean_occupation, ys.join("  "));
    }
    // r = 2 at the pinned step.
    let x_grid = vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 1.0, 2.0];
    let cfg = ThetaConfig { draws: 150_000, master_seed: 5, ..Default::default() };
    let est = estimate_theta(2, 1.0, 0.5, 0.5, 1.0, &x_grid, &cfg).unwrap();
    let (tp, tse) = theta_prime_at_zero(&est).unwrap();
    println!("r=2 pinned step {}: tp={tp:.4} (se {tse:.4}) mean_occ={:.3}", est.step, est.mean_occupation);
}

#[test]
#[ignore]
fn probe_brownian_theta_and_ratio() {
    // Theta' for the Brownian cluster at the pinned step.
    let x_grid = vec![0.0, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0];
    let cfg = ThetaConfig { draws: 300_000, master_seed: 12345, ..Default::default() };
    let est = estimate_theta(1, 1.0, 0.5, 0.5, 1.0, &x_grid, &cfg).unwrap();
    println!("horizon {}, step {}, mean occ {}", est.horizon, est.step, est.mean_occupation);
    for (i, &x) in est.x_grid.iter().enumerate() {
        println!("x={x}: theta={} se={}", est.theta[i], est.stderr[i]);
    }
    let (tp, tse) = theta_prime_at_zero(&est).unwrap();
    println!("theta_prime = {tp} +- {tse}");

    // MC p(u) on the N=8192 log grid, modest budget.
    let g = gaussian_marginal();
    let scheme = scaling_scheme_for(1.0, 0.5).unwrap();
    let spec = ExperimentSpec {
        process: ProcessConfig::gaussian(fbm_kernel(0.5).unwrap()),
        n: 1,
        r: 1,
        levels: vec![2.5, 3.0, 3.5, 4.0],
        grid: make_grid(GridLayout::LogUniform, 8192, Some(1e-3)).unwrap(),
        horizon: 1.0,
        functional: FunctionalKind::SupProbability,
        scheme: None,
        batches: 61,
        batch_size: 16384,
        master_seed: 777,
        memory_bound_bytes: DEFAULT_MEMORY_BOUND,
    };
    let out = run_experiment(&spec).unwrap();
    for l in &out.levels {
        let exact = 2.0 * ordex_core::special::norm_tail(l.u);
        let el = mean_sojourn_exact(l.u, 1, 1, &g, 0.5).unwrap();
        let pred = tp * el / scheme.q(l.u);
        println!(
            "u={}: mc={:.4e} (se {:.2e}) exact={:.4e} mc/exact={:.4} pred={:.4e} mc/pred={:.4} exact/pred={:.4}",
            l.u, l.estimate.mean, l.estimate.stderr, exact, l.estimate.mean/exact, pred,
            l.estimate.mean/pred, exact/pred
        );
    }
}
