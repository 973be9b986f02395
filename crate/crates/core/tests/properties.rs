mod common;

use biascorr::estimation::{
    self, forecast_errors, generate_observations, quadratic_objective, EstimateStatus,
    ObservationOperator, ObservationSchedule, ObservationSet, Perturbation,
};
use biascorr::iterate::{run_iteration, Estimator, IterationConfig, IterationStatus};
use biascorr::model::{self, ModelConfiguration};
use common::{central_gradient, cfg, fd_gradient, fd_jacobian_of, max_abs_diff};
use proptest::prelude::*;

const T0S: [f64; 3] = [0.0, 4.0, 8.0];
const KS: [u32; 4] = [1, 4, 8, 12];
const NS: [usize; 3] = [2, 4, 6];

fn truth() -> ModelConfiguration {
    cfg(0.5, 1.0)
}

fn model_cfg() -> ModelConfiguration {
    cfg(0.6, 0.9)
}

fn obs_with(truth: &ModelConfiguration, t0: f64, k: u32, n: usize) -> ObservationSet {
    let times = ObservationSchedule::new(t0, k, 0.5, n).unwrap().times();
    generate_observations(truth, &times).unwrap()
}

fn obs(t0: f64, k: u32, n: usize) -> ObservationSet {
    obs_with(&truth(), t0, k, n)
}

fn table_cells() -> impl Iterator<Item = (usize, f64, u32)> {
    NS.iter().flat_map(|&n| {
        T0S.iter()
            .flat_map(move |&t0| KS.iter().map(move |&k| (n, t0, k)))
    })
}

fn rel(got: f64, expected: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        (got - expected).abs()
    } else {
        (got - expected).abs() / scale
    }
}

#[test]
fn sensitivities_match_finite_differences_on_grid() {
    let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
    let alphas = [0.5, 0.75, 1.0, 1.25, 1.5];
    let times = [0.0, 2.5, 5.0, 7.5, 10.0];
    for &x0 in &grid {
        for &a in &alphas {
            for &t in &times {
                let (dx, da) = model::first_order_sensitivities(&cfg(x0, a), t);
                let fd = fd_gradient(x0, a, t);
                assert!(rel(dx, fd[0], dx.abs()) < 1e-5, "d_x0 at ({x0},{a},{t})");
                assert!(rel(da, fd[1], da.abs()) < 1e-5, "d_alpha at ({x0},{a},{t})");
            }
        }
    }
}

#[test]
fn solution_increases_to_one() {
    for x0 in [0.1, 0.5, 0.9] {
        let c = cfg(x0, 1.0);
        let xs: Vec<f64> = (0..=100)
            .map(|i| model::solve(&c, i as f64 * 0.1))
            .collect();
        assert!(xs.windows(2).all(|w| w[1] > w[0]), "x0 = {x0}");
    }
    for x0 in [0.1, 0.5, 0.9] {
        for a in [0.8, 1.0, 1.5] {
            assert!((model::solve(&cfg(x0, a), 40.0) - 1.0).abs() < 1e-10);
        }
    }
}

proptest! {
    #[test]
    fn sensitivities_match_finite_differences(x0 in 0.05f64..0.95, a in 0.3f64..2.0, t in 0.0f64..12.0) {
        let (dx, da) = model::first_order_sensitivities(&cfg(x0, a), t);
        let fd = fd_gradient(x0, a, t);
        prop_assert!(rel(dx, fd[0], dx.abs()) < 1e-5);
        prop_assert!(rel(da, fd[1], da.abs()) < 1e-5);
    }

    #[test]
    fn hessian_matches_finite_differences(x0 in 0.05f64..0.95, a in 0.3f64..2.0, t in 0.0f64..12.0) {
        let h = model::hessian_sensitivities(&cfg(x0, a), t);
        prop_assert_eq!(h[0][1].to_bits(), h[1][0].to_bits());
        let fd = fd_jacobian_of(x0, a, |p, q| {
            let (u, v) = model::first_order_sensitivities(&cfg(p, q), t);
            [u, v]
        });
        let scale = h.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!(rel(h[i][j], fd[i][j], scale) < 1e-4, "entry ({i},{j}): {} vs {}", h[i][j], fd[i][j]);
            }
        }
    }

    #[test]
    fn alpha_sensitivity_is_a_multiple(x0 in 0.01f64..2.0, a in 0.1f64..3.0, t in 0.0f64..50.0) {
        let (dx, da) = model::first_order_sensitivities(&cfg(x0, a), t);
        prop_assert!((da - x0 * (1.0 - x0) * t * dx).abs() <= 1e-12);
    }

    #[test]
    fn rk4_tracks_closed_form(x0 in 0.05f64..0.95, a in 0.3f64..1.5, t in 0.0f64..6.0) {
        let c = cfg(x0, a);
        prop_assert!((model::integrate_rk(&c, t, 1e-3) - model::solve(&c, t)).abs() < 1e-8);
    }

    #[test]
    fn twin_experiment_gives_exact_zero(
        x0 in 0.2f64..0.8, a in 0.5f64..1.5, t0 in 0.0f64..8.0, k in 1u32..=12, n in 2usize..=6,
    ) {
        let c = cfg(x0, a);
        let o = obs_with(&c, t0, k, n);
        let h = ObservationOperator::identity();
        let reports = [
            estimation::first_order_estimate(&c, &o, &h).unwrap(),
            estimation::second_order_estimate(&c, &o, &h).unwrap(),
            estimation::pseudo_inverse_estimate(&c, &o, &h).unwrap(),
            estimation::tikhonov_estimate(&c, &o, &h, 1e-12).unwrap(),
        ];
        for r in reports {
            prop_assert_eq!(r.beta.as_array(), [0.0, 0.0]);
            prop_assert_ne!(r.status, EstimateStatus::Diverged);
        }
    }

    #[test]
    fn second_order_estimate_is_stationary(
        x0 in 0.3f64..0.7, a in 0.7f64..1.3, k in 1u32..=12, n in 2usize..=6,
    ) {
        let m = cfg(x0, a);
        let o = obs(0.0, k, n);
        let r = estimation::second_order_estimate(&m, &o, &ObservationOperator::identity()).unwrap();
        prop_assume!(r.beta.is_finite());
        let q = |b: [f64; 2]| quadratic_objective(&m, &o, &Perturbation::from(b));
        // Q is quadratic, so central differences are exact up to rounding;
        // the step scales with β to keep that rounding small.
        let g = central_gradient(q, r.beta.as_array(), 1e-4 * r.beta.norm_inf().max(1.0));
        prop_assert!(g[0].abs().max(g[1].abs()) < 1e-10, "{g:?}");
    }

    #[test]
    fn starting_at_truth_is_a_fixed_point(x0 in 0.2f64..0.8, a in 0.5f64..1.5, k in 1u32..=12) {
        let c = cfg(x0, a);
        let o = obs_with(&c, 0.0, k, 4);
        for est in [Estimator::FirstOrder, Estimator::SecondOrder] {
            let it = IterationConfig::new(1e-6, 10, est).unwrap();
            let tr = run_iteration(&c, &o, &ObservationOperator::identity(), &it).unwrap();
            prop_assert_eq!(tr.status, IterationStatus::Converged);
            prop_assert_eq!(tr.iterations, 1);
            prop_assert!(tr.steps[0].beta.norm_inf() < 1e-12);
        }
    }

    #[test]
    fn trace_bookkeeping(x0 in 0.3f64..0.7, a in 0.8f64..1.2, t0 in prop::sample::select(vec![0.0, 4.0]), k in 1u32..=4) {
        let o = obs(t0, k, 4);
        let it = IterationConfig::new(1e-6, 100, Estimator::FirstOrder).unwrap();
        let tr = run_iteration(&cfg(x0, a), &o, &ObservationOperator::identity(), &it).unwrap();
        prop_assert_eq!(tr.steps.len(), tr.iterations);
        if tr.status != IterationStatus::Diverged {
            let sum = tr.steps.iter().fold(Perturbation::ZERO, |s, st| s + st.beta);
            prop_assert!(max_abs_diff(sum.as_array(), tr.cumulative.as_array()) <= 1e-12);
        }
    }
}

#[test]
fn estimator_paths_agree_on_table_cells() {
    let h = ObservationOperator::identity();
    // At t0 = 8 the smallest eigenvalue of H̄ᵀH̄ is 4e-11 to 6e-9, so a
    // weight of 1e-12 already shifts β by more than 1e-5 in these cells.
    let tikhonov_biased = [
        (2, 8.0, 1),
        (2, 8.0, 4),
        (2, 8.0, 8),
        (2, 8.0, 12),
        (4, 8.0, 8),
        (4, 8.0, 12),
        (6, 8.0, 8),
        (6, 8.0, 12),
    ];
    for (n, t0, k) in table_cells() {
        let o = obs(t0, k, n);
        let fo = estimation::first_order_estimate(&model_cfg(), &o, &h).unwrap();
        let pi = estimation::pseudo_inverse_estimate(&model_cfg(), &o, &h).unwrap();
        let tk = estimation::tikhonov_estimate(&model_cfg(), &o, &h, 1e-12).unwrap();
        assert!(
            max_abs_diff(fo.beta.as_array(), pi.beta.as_array()) < 1e-5,
            "pinv ({n},{t0},{k})"
        );
        let gap = max_abs_diff(fo.beta.as_array(), tk.beta.as_array());
        if tikhonov_biased.contains(&(n, t0, k)) {
            assert!(gap > 1e-5, "({n},{t0},{k}) now agrees: {gap:e}");
        } else {
            assert!(gap < 1e-5, "tikhonov ({n},{t0},{k}): {gap:e}");
        }
    }
}

#[test]
fn closer_spacing_worsens_conditioning() {
    let kappa = |delta: f64| {
        let times = ObservationSchedule::new(0.0, 1, delta, 2).unwrap().times();
        estimation::sensitivity_condition_number(&model_cfg(), &times).unwrap()
    };
    assert!(kappa(0.5) > kappa(2.0));
}

#[test]
fn late_windows_recover_worse() {
    let h = ObservationOperator::identity();
    let target = [-0.1, 0.1];
    for &n in &NS {
        for &k in &KS {
            let err = |t0| {
                let r = estimation::first_order_estimate(&model_cfg(), &obs(t0, k, n), &h).unwrap();
                max_abs_diff(r.beta.as_array(), target)
            };
            assert!(err(8.0) > err(0.0), "N={n} k={k}");
        }
    }
}

/// First-order relative error for `β_true = s·dir` on a `t₀ = 0` schedule.
fn taylor_errors(s: f64, dir: [f64; 2], k: u32) -> (f64, f64) {
    let base = model_cfg();
    let true_model = cfg(base.x0() - s * dir[0], base.alpha() - s * dir[1]);
    let o = obs_with(&true_model, 0.0, k, 4);
    let h = ObservationOperator::identity();
    let expected = [s * -dir[0], s * -dir[1]];
    let norm = expected[0].abs().max(expected[1].abs());
    let fo = estimation::first_order_estimate(&base, &o, &h).unwrap();
    let so = estimation::second_order_estimate(&base, &o, &h).unwrap();
    (
        max_abs_diff(fo.beta.as_array(), expected) / norm,
        max_abs_diff(so.beta.as_array(), expected) / norm,
    )
}

#[test]
fn linearization_error_scales_with_perturbation() {
    // Relative error is O(‖β‖): error/‖β‖ settles to a constant as the
    // perturbation shrinks.
    let dirs = [[1.0, -1.0], [-1.0, -1.0], [1.0, 0.5], [0.0, 1.0]];
    for dir in dirs {
        for k in KS {
            let ratios = |s: f64| {
                let (f, so) = taylor_errors(s, dir, k);
                (f / s, so / s)
            };
            let (f3, s3) = ratios(1e-3);
            let (f4, s4) = ratios(1e-4);
            let (f5, s5) = ratios(1e-5);
            for (name, r3, r4, r5) in [("first", f3, f4, f5), ("second", s3, s4, s5)] {
                assert!(
                    (r4 - r5).abs() <= 0.05 * r5,
                    "{name} {dir:?} k={k}: {r4:e} vs {r5:e}"
                );
                assert!(r3 <= 1.5 * r5, "{name} {dir:?} k={k}: {r3:e} vs {r5:e}");
            }
        }
    }
}

#[test]
fn tiny_perturbations_recovered_within_five_percent() {
    let dirs = [
        [1.0, -1.0],
        [-1.0, -1.0],
        [1.0, 1.0],
        [-1.0, 1.0],
        [1.0, 0.0],
        [0.0, 1.0],
    ];
    for dir in dirs {
        for k in KS {
            let (f, _) = taylor_errors(0.005, dir, k);
            assert!(f < 0.05, "{dir:?} k={k}: {f}");
        }
    }
}

fn residual(m: &ModelConfiguration, o: &ObservationSet) -> f64 {
    forecast_errors(m, o, &ObservationOperator::identity())
        .iter()
        .map(|e| e * e)
        .sum()
}

#[test]
fn residual_is_monotone_on_small_perturbation_runs() {
    // The first full step overshoots in these three cells and the residual
    // rises once (about 1.1e-8 to 1.5e-8) before converging.
    let exceptions = [(2, 4.0, 12), (4, 4.0, 12), (6, 4.0, 12)];
    let it = IterationConfig::new(1e-6, 10, Estimator::FirstOrder).unwrap();
    for (n, t0, k) in table_cells() {
        let o = obs(t0, k, n);
        let tr = run_iteration(&model_cfg(), &o, &ObservationOperator::identity(), &it).unwrap();
        assert_eq!(tr.status, IterationStatus::Converged);
        let mut seq: Vec<f64> = tr.steps.iter().map(|s| residual(&s.model, &o)).collect();
        seq.push(residual(&tr.final_model, &o));
        let monotone = seq.windows(2).all(|w| w[1] <= w[0]);
        if exceptions.contains(&(n, t0, k)) {
            assert!(!monotone, "({n},{t0},{k}) became monotone: {seq:?}");
        } else {
            assert!(monotone, "({n},{t0},{k}): {seq:?}");
        }
    }
}
