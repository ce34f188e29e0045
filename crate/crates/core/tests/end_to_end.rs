use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use bilinear_sysid::estimator::{build_design, choose_l, design_gram, estimate_markov, predict, SolverMode};
use bilinear_sysid::excitation::{pe_certificate, Regime};
use bilinear_sysid::experiment::ModelConfig;
use bilinear_sysid::hokalman::{align_realizations, ho_kalman};
use bilinear_sysid::io::{read_trajectory, write_trajectory};
use bilinear_sysid::par::{map_indexed_parallel, map_indexed_serial};
use bilinear_sysid::sysmodel::{markov_params, random_model, simulate, InputDesign, NoiseSpec, StateSpaceModel};

/// Noiseless data from a nilpotent system: the estimate is exact, so the
/// realization reproduces the Markov parameters and the next output.
#[test]
fn noiseless_trajectory_to_realization() {
    let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.7, 0.0, 0.0, -0.4, 0.9, 0.0]);
    let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, -0.5, 0.8, 0.3, 0.1]);
    let c = DMatrix::from_row_slice(2, 3, &[0.6, -0.2, 0.4, 0.1, 0.9, -0.7]);
    let model = StateSpaceModel::new(a, b, c).unwrap();
    let l = 6;
    let traj = simulate(&model, &NoiseSpec::none(3), &InputDesign::GaussianIsotropic, 200, 1, false).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    write_trajectory(&path, &traj).unwrap();
    let traj = read_trajectory(&path).unwrap();

    let fit = traj.prefix(199);
    let est = estimate_markov(&build_design(&fit, l).unwrap());
    assert_eq!(est.solver_mode, SolverMode::FullRank);
    let g = markov_params(&model, l).unwrap().g;
    assert!((&est.g_hat - &g).norm() < 1e-9);

    let y_hat = predict(&est.g_hat, &fit.u, &traj.u[200]).unwrap();
    assert!((y_hat - traj.y[200]).abs() < 1e-9);

    let real = ho_kalman(&est.g_hat, 3).unwrap();
    assert!((real.markov_blocks(l) - &g).norm() < 1e-8);
    let exact = ho_kalman(&g, 3).unwrap();
    let al = align_realizations(&exact, &real).unwrap();
    assert!(al.d_a < 1e-7 && al.d_b < 1e-7 && al.d_c < 1e-7);
}

#[test]
fn noisy_estimate_improves_with_horizon() {
    let model = random_model(3, 2, 0.6, 4).unwrap();
    let noise = NoiseSpec::exponential(3, 2.0, true).unwrap();
    let l = 8;
    let g = markov_params(&model, l).unwrap().g;
    let traj = simulate(&model, &noise, &InputDesign::GaussianIsotropic, 8000, 2, false).unwrap();
    let err = |t: usize| (estimate_markov(&build_design(&traj.prefix(t), l).unwrap()).g_hat - &g).norm();
    assert!(err(8000) < err(500));
}

#[test]
fn chosen_memory_feeds_the_estimator() {
    let model = random_model(2, 2, 0.5, 9).unwrap();
    let noise = NoiseSpec::gaussian(DMatrix::identity(2, 2) * 0.01, 0.1).unwrap();
    let beta = 2f64.sqrt();
    let choice = choose_l(&model, &noise, beta, None, 0.1, 2000, 40).unwrap();
    assert!(choice.l >= 4 && choice.l.is_multiple_of(2));
    let traj = simulate(&model, &noise, &InputDesign::unit_sphere_isotropic(2), 2000, 3, false).unwrap();
    let design = build_design(&traj, choice.l).unwrap();
    let cert = pe_certificate(&design, 0.1, Regime::FourthMomentB { m4: 9.0 }).unwrap();
    assert!(cert.passed);
    assert!((design_gram(&traj, choice.l).unwrap() - design.gram()).amax() < 1e-8 * design.gram().amax());
}

#[test]
fn parallel_and_serial_maps_agree() {
    let work = |i: usize| {
        let m = random_model(3, 2, 0.7, i as u64).unwrap();
        markov_params(&m, 4).unwrap().g
    };
    assert_eq!(map_indexed_serial(16, work), map_indexed_parallel(16, work));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Markov parameters, and therefore the estimator's target, are invariant
    /// under a change of state coordinates.
    #[test]
    fn similarity_leaves_estimate_target_fixed(seed in 0u64..1000, shift in 0.5f64..2.0) {
        let m = random_model(3, 2, 0.8, seed).unwrap();
        let t = DMatrix::identity(3, 3) * shift + DMatrix::from_fn(3, 3, |i, j| if i < j { 0.3 } else { 0.0 });
        let g = markov_params(&m, 5).unwrap().g;
        let g2 = markov_params(&m.similarity(&t).unwrap(), 5).unwrap().g;
        prop_assert!((&g - &g2).norm() <= 1e-9 * (1.0 + g2.norm()));
    }

    /// With more rows than unknowns the solver takes the full-rank path, and a
    /// nilpotent system with `L ≥ n` is fit with zero residual.
    #[test]
    fn overdetermined_designs_are_full_rank(seed in 0u64..1000, l in 2usize..5) {
        let m = ModelConfig::Nilpotent { scale: 1.0 }.draw_seeded(2, 2, 0.5, seed).unwrap();
        let horizon = l + 3 * 4 * l;
        let traj = simulate(&m, &NoiseSpec::none(2), &InputDesign::GaussianIsotropic, horizon, seed, false).unwrap();
        let est = estimate_markov(&build_design(&traj, l).unwrap());
        prop_assert_eq!(est.solver_mode, SolverMode::FullRank);
        prop_assert!(est.residual_norm < 1e-8);
    }

    /// Scaling every input by `c` scales the bilinear regression rows by `c²`.
    #[test]
    fn design_rows_are_quadratic_in_inputs(seed in 0u64..1000, c in 0.1f64..3.0) {
        let m = random_model(2, 2, 0.5, seed).unwrap();
        let traj = simulate(&m, &NoiseSpec::none(2), &InputDesign::GaussianIsotropic, 20, seed, false).unwrap();
        let scaled: Vec<DVector<f64>> = traj.u.iter().map(|u| u * c).collect();
        let traj2 = bilinear_sysid::sysmodel::Trajectory::new(scaled, traj.y.clone()).unwrap();
        let d1 = build_design(&traj, 3).unwrap().u_tilde;
        let d2 = build_design(&traj2, 3).unwrap().u_tilde;
        prop_assert!((d1 * (c * c) - d2).amax() < 1e-10);
    }
}
