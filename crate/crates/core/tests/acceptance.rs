//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p bilinear-sysid --test acceptance`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use bilinear_sysid::estimator::{build_design, estimate_markov};
use bilinear_sysid::experiment::validation::{autocov_check, bound_campaign, m4_axis, m4_check};
use bilinear_sysid::experiment::{
    run_double_descent, run_figure1, run_pe_campaign, ExperimentConfig, InputConfig, ModelConfig, NoiseConfig,
};
use bilinear_sysid::hokalman::{align_realizations, ho_kalman, realization_error_bounds};
use bilinear_sysid::rng::{derive_seed, rng_from_seed, standard_normal};
use bilinear_sysid::sysmodel::{markov_params, random_model, simulate, InputDesign, NoiseSpec, StateSpaceModel};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

/// Least-squares slope of `y` on `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn figure1_base() -> ExperimentConfig {
    let mut c = ExperimentConfig::figure1_default();
    c.noise = NoiseConfig::Exponential { rate: 1.0, centered: true };
    c.input = InputConfig::Gaussian;
    c.trials = 20;
    c
}

fn rate_check() -> Outcome {
    let mut c = figure1_base();
    c.rho_values = vec![0.5];
    c.l_values = vec![12];
    c.t_values = vec![400, 800, 1600, 3200];
    let res = bilinear_sysid::par::with_threads(Some(1), || run_figure1(&c)).expect("sweep runs");
    let x: Vec<f64> = res.cells.iter().map(|cell| ((cell.t - cell.l) as f64).ln()).collect();
    let y: Vec<f64> = res.cells.iter().map(|cell| cell.mean_err.ln()).collect();
    let s = slope(&x, &y);
    let means: Vec<String> = res.cells.iter().map(|cell| format!("{:.3e}", cell.mean_err)).collect();
    outcome((-1.25..=-0.75).contains(&s), format!("slope {s:.3} in [-1.25, -0.75]; means {}", means.join(", ")))
}

fn double_descent() -> Outcome {
    let mut c = figure1_base();
    c.rho_values = vec![0.5];
    c.l_values = vec![50];
    c.t_values = (350..=700).step_by(50).collect();
    let res = run_double_descent(&c).expect("sweep runs");
    let at = |t| res.cell(0.5, 50, t).expect("cell present").mean_err;
    let (m400, m500, m650) = (at(400), at(500), at(650));
    let marked = res.cells.iter().filter(|cell| cell.interpolation_threshold).map(|cell| cell.t).collect::<Vec<_>>();
    outcome(
        m500 > m400 && m500 > m650 && marked == vec![500],
        format!("mean err T=400 {m400:.3e}, T=500 {m500:.3e}, T=650 {m650:.3e}; threshold marked at {marked:?}"),
    )
}

fn memory_tradeoff() -> Outcome {
    let mut c = figure1_base();
    // input-driven tail must dominate the noise for long memory to pay off
    c.noise = NoiseConfig::Exponential { rate: 100.0, centered: true };
    c.rho_values = vec![0.5, 0.99];
    c.l_values = vec![12, 50];
    c.t_values = vec![1600];
    let res = run_figure1(&c).expect("sweep runs");
    let cell = |rho, l| res.cell(rho, l, 1600).expect("cell present");
    let fmt = |rho, l| {
        let x = cell(rho, l);
        format!("(rho {rho}, L {l}) {:.3e} ± {:.3e}", x.mean_err, x.std_err)
    };
    let fast = cell(0.5, 12).mean_err < cell(0.5, 50).mean_err;
    let slow = cell(0.99, 50).mean_err < cell(0.99, 12).mean_err;
    outcome(
        fast && slow,
        format!("{} < {}: {fast}; {} < {}: {slow}", fmt(0.5, 12), fmt(0.5, 50), fmt(0.99, 50), fmt(0.99, 12)),
    )
}

fn pe_certificate() -> Outcome {
    let mut c = ExperimentConfig::figure1_default();
    c.p = 2;
    c.l_values = vec![4];
    c.delta = 0.1;
    c.trials = 200;
    c.input = InputConfig::Gaussian;
    c.m4 = 9.0;
    let res = run_pe_campaign(&c).expect("campaign runs");
    let cell = &res.cells[0];
    outcome(
        cell.frequency >= 0.9,
        format!(
            "frequency {:.3} >= 0.90 at T = required_T = {} ({} / {} trials, min lambda_min {:.4e} vs threshold {:.4e})",
            cell.frequency, cell.required_t, cell.successes, cell.trials, cell.lambda_min_min, cell.threshold
        ),
    )
}

fn gaussian_m4() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut parts = Vec::new();
    for (i, &(p, l)) in [(1, 1), (1, 3), (2, 1), (2, 3)].iter().enumerate() {
        let chk = m4_check(p, l, 100, 100_000, 9.0, 3.0, derive_seed(5, &[i as u64])).expect("m4 runs");
        worst = worst.min(chk.worst_margin);
        parts.push(format!("p={p} L={l} max {:.3}", chk.max_estimate));
    }
    let (est, se) = m4_axis(100_000, 55).expect("axis estimate runs");
    let axis_z = (est - 9.0).abs() / se;
    outcome(
        worst >= 0.0 && axis_z <= 3.0,
        format!("worst 9+3SE-est margin {worst:.3}; axis {est:.3} ± {se:.3} (z {axis_z:.2}); {}", parts.join(", ")),
    )
}

fn exact_recovery() -> Outcome {
    let (n, p, l) = (3, 2, 3);
    let horizon = l + 2 * p * p * l;
    let mut worst = 0.0f64;
    let mut ok = 0;
    for seed in 0..20u64 {
        let model = ModelConfig::Nilpotent { scale: 1.0 }.draw_seeded(n, p, 0.5, seed).expect("model");
        let traj = simulate(&model, &NoiseSpec::none(n), &InputDesign::GaussianIsotropic, horizon, seed + 100, false)
            .expect("simulation");
        let design = build_design(&traj, l).expect("design");
        let est = estimate_markov(&design);
        let err = (&est.g_hat - markov_params(&model, l).expect("markov").g).norm();
        worst = worst.max(err);
        if err <= 1e-8 {
            ok += 1;
        }
    }
    outcome(ok == 20, format!("{ok}/20 seeds with ||G_hat - G||_F <= 1e-8 (worst {worst:.2e}, T = {horizon})"))
}

fn ho_kalman_suite() -> Outcome {
    let (n, p, l) = (3, 2, 8);
    let model = random_model(n, p, 0.9, 21).expect("model");
    let g = markov_params(&model, l).expect("markov").g;
    let exact = ho_kalman(&g, n).expect("exact realization");
    let match_err = (exact.markov_blocks(l) - &g).norm();

    let sigma = exact.hankel.sigma_min_l;
    let radius = sigma / (2.0 * (2.0 * l as f64).sqrt());
    let mut rng = rng_from_seed(77);
    let mut passed = 0;
    let mut robust = 0;
    for trial in 0..50 {
        let dir = DMatrix::from_fn(p, p * l, |_, _| standard_normal(&mut rng));
        let scale = radius * (0.02 + 0.97 * trial as f64 / 49.0);
        let g_hat = &g + dir.normalize() * scale;
        let est = ho_kalman(&g_hat, n).expect("perturbed realization");
        let b = realization_error_bounds(&exact.hankel.h, &est.hankel.h, sigma, (&g - &g_hat).norm(), l)
            .expect("bounds");
        if !b.robustness_ok {
            continue;
        }
        robust += 1;
        let al = align_realizations(&exact, &est).expect("alignment");
        if al.d_b <= b.bound_bc && al.d_c <= b.bound_bc && al.d_a <= b.bound_a {
            passed += 1;
        }
    }
    outcome(
        match_err <= 1e-8 && robust == 50 && passed == 50,
        format!("Markov matching error {match_err:.2e}; bounds hold in {passed}/{robust} robust trials"),
    )
}

fn autocov_oracle() -> Outcome {
    let model = StateSpaceModel::new(
        DMatrix::from_row_slice(2, 2, &[0.6, 0.2, -0.1, 0.4]),
        DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
        DMatrix::from_row_slice(1, 2, &[0.8, -0.3]),
    )
    .expect("model");
    let noise = NoiseSpec::gaussian(DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]), 0.4).expect("noise");
    let inputs: Vec<DVector<f64>> =
        [0.9, -1.2, 0.4, 1.5, -0.7, 1.1, -0.3, 0.8, 1.3].iter().map(|&v| DVector::from_element(1, v)).collect();
    let chk = autocov_check(&model, &noise, &inputs, 2, 4, 1_000_000, 2024).expect("autocov runs");
    let worst = chk.pairs.iter().max_by(|a, b| a.z.total_cmp(&b.z)).expect("pairs");
    outcome(
        chk.passed(3.0),
        format!(
            "{} pairs, max |closed - MC| / SE = {:.2} at ({}, {}) (closed {:.4}, MC {:.4})",
            chk.pairs.len(),
            chk.max_z,
            worst.tau,
            worst.tau_prime,
            worst.closed_form,
            worst.monte_carlo
        ),
    )
}

fn bound_coverage() -> Outcome {
    let cfg = ExperimentConfig::validation_default();
    let model = cfg.model.draw_seeded(cfg.n, cfg.p, cfg.rho_values[0], 31).expect("model");
    let noise = cfg.noise.to_spec(cfg.n).expect("noise");
    let (l, horizon) = (cfg.l_values[0], cfg.t_values[0]);
    let inputs = cfg.input.to_design(cfg.p, horizon + 2);
    let res = bound_campaign(&model, &noise, &inputs, l, horizon, 0.1, 200, 100_000, 9).expect("campaign runs");
    outcome(
        res.coverage >= 0.85 && res.prediction_ok == 200,
        format!(
            "coverage {:.3} >= 0.85; prediction MSE below bound in {}/200 trials (worst ratio {:.3})",
            res.coverage, res.prediction_ok, res.worst_mse_ratio
        ),
    )
}

fn main() {
    // `cargo test` passes harness flags; only a filter-free run executes the suite
    if std::env::args().skip(1).any(|a| a == "--list") {
        return;
    }
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("rate of decay", rate_check),
        ("double descent", double_descent),
        ("memory trade-off", memory_tradeoff),
        ("persistence of excitation", pe_certificate),
        ("gaussian fourth moment", gaussian_m4),
        ("exact recovery", exact_recovery),
        ("ho-kalman", ho_kalman_suite),
        ("autocovariance oracle", autocov_oracle),
        ("bound coverage", bound_coverage),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let out = run();
        let verdict = if out.passed { "PASS" } else { "FAIL" };
        if !out.passed {
            failed += 1;
        }
        println!("criterion {} [{verdict}] {name}: {} ({:.1}s)", i + 1, out.detail, clock.elapsed().as_secs_f64());
    }
    println!("acceptance: {}/9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
