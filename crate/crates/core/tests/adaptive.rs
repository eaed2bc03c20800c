mod common;

use common::*;
use nearstat::adaptive::*;
use nearstat::linalg::norm;
use nearstat::reference::reference_optimum;
use nearstat::{CountingOracle, FiniteSum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Plain bisection on the cubic, independent of `solve_alpha`.
fn bisect_root(n: usize, kappa: f64) -> f64 {
    let s = |x: f64| {
        let n = n as f64;
        x * x * x - (2.0 * n - 3.0) * x * x - (2.0 * n * kappa + n - 3.0) * x - n * kappa + 1.0
    };
    let (mut lo, mut hi) = (0.0f64, 1e6f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if s(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn grid() -> Vec<(usize, f64)> {
    let mut g = Vec::new();
    for n in [1usize, 2, 10, 100, 5000] {
        for ratio in [1.0, 1e-2, 1e-4, 1e-7] {
            g.push((n, ratio));
        }
    }
    g
}

#[test]
fn cubic_roots() {
    let a = solve_alpha(1.0, 1.0, 1).unwrap();
    assert!((a - bisect_root(1, 2.0)).abs() < 1e-12);
    assert!((a - 1.24698).abs() < 1e-5);
    let a = solve_alpha(1.0, 1.0, 10).unwrap();
    assert!((a - bisect_root(10, 2.0)).abs() < 1e-10);
    assert!((a - 19.4648).abs() < 1e-4);
    assert!(a < alpha_bracket(10, 2.0));
    assert!((alpha_bracket(10, 2.0) - 28.944).abs() < 1e-3);
}

#[test]
fn parameter_grid() {
    let l = 1.0;
    for (n, ratio) in grid() {
        let delta = ratio * l;
        let st = RegularizationState::for_round(delta, l, n).unwrap();
        assert!(product_identity_residual(st.alpha, delta, l, n).abs() <= 1e-10, "n {n} δ {delta}");
        assert!(st.alpha / delta <= alpha_bracket(n, st.kappa));
        let mix = l * st.alpha * st.alpha * st.p / (l + (1.0 - st.p) * (st.alpha + delta));
        assert!(mix <= 6.0 * delta * (1.0 + 1e-12));
        let lhs = (1.0 - st.tau_x) / st.tau_x;
        let rhs = (1.0 - delta * st.tau_z / st.tau_x) * l / st.alpha;
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        for v in [st.alpha, st.tau_x, st.c_idc, st.c_ifc, st.p] {
            assert!(v.is_finite() && v > 0.0);
        }
        assert!(st.tau_z.is_finite());
    }
}

#[test]
fn break_iteration_matches_scan() {
    let st = RegularizationState::for_round(1.0, 1.0, 10).unwrap();
    for mode in [Mode::Idc, Mode::Ifc] {
        let thr = st.threshold(mode);
        let base = 1.0 + st.delta / st.alpha;
        let scan = (1..).find(|&k| base.powi(k as i32) >= thr).unwrap();
        assert_eq!(inner_break_iteration(&st, mode), scan);
    }
    for (n, ratio) in grid() {
        let st = RegularizationState::for_round(ratio, 1.0, n).unwrap();
        for mode in [Mode::Idc, Mode::Ifc] {
            let k = inner_break_iteration(&st, mode);
            let base = 1.0 + st.delta / st.alpha;
            let thr = st.threshold(mode);
            if thr <= 1.0 {
                assert_eq!(k, 1);
            } else {
                assert!(base.powf(k as f64) >= thr);
                if k > 1 {
                    assert!(base.powf((k - 1) as f64) < thr);
                }
            }
        }
    }
}

#[test]
fn stationary_start_terminates_immediately() {
    let f = random_logistic(1, 40, 3);
    let x0 = reference_optimum(&f, &vec![0.0; f.dim()]).unwrap().x_star;
    let mut o = CountingOracle::new(&f);
    let out = run_r_acc_svrg_g(&mut o, &x0, &RAccSvrgOptions::new(1e-6, Mode::Idc, 0)).unwrap();
    assert!(out.terminated);
    assert_eq!(out.rounds_used, 1);
    assert_eq!(out.rounds[0].steps, 0);
    assert_eq!(out.oracle_calls, 40);
}

#[test]
fn rejects_bad_options() {
    let f = random_logistic(2, 10, 2);
    let x0 = vec![0.0; f.dim()];
    for (eps, beta) in [(0.0, 2.0), (-1.0, 2.0), (1e-3, 1.0), (1e-3, 0.5)] {
        let mut o = CountingOracle::new(&f);
        let mut opts = RAccSvrgOptions::new(eps, Mode::Ifc, 0);
        opts.beta = beta;
        assert!(run_r_acc_svrg_g(&mut o, &x0, &opts).is_err());
    }
}

#[test]
fn terminates_with_certified_gradient() {
    let f = random_logistic(3, 200, 10);
    let x0 = vec![0.0; f.dim()];
    let star = reference_optimum(&f, &x0).unwrap();
    let r0 = star.r0(&x0);
    let eps = 1e-4;
    for seed in 0..5 {
        for mode in [Mode::Idc, Mode::Ifc] {
            let mut o = CountingOracle::new(&f);
            let out = run_r_acc_svrg_g(&mut o, &x0, &RAccSvrgOptions::new(eps, mode, seed)).unwrap();
            assert!(out.terminated);
            assert!(norm(&f.full_grad(&out.output)) <= eps * (1.0 + 1e-9));
            assert_eq!(out.trace.oracle_calls, o.calls());
            // δ shrinks by exactly β each round.
            for w in out.rounds.windows(2) {
                assert!((w[0].state.delta / w[1].state.delta - 2.0).abs() < 1e-12);
            }
            if mode == Mode::Idc {
                assert!(out.final_delta >= delta_star_idc(eps, 0.5, r0) / 2.0);
            }
        }
    }
}

#[test]
fn inner_contraction_in_expectation() {
    let f = random_logistic(4, 10, 3);
    let x0 = vec![0.0; f.dim()];
    let star = reference_optimum(&f, &x0).unwrap();
    let r0 = star.r0(&x0);
    let delta0 = star.delta0(&f, &x0);
    let l = f.smoothness();
    for delta in [l, l / 8.0, l / 64.0] {
        let st = RegularizationState::for_round(delta, l, f.n_components()).unwrap();
        for (mode, k) in [(Mode::Idc, 5u64), (Mode::Idc, inner_break_iteration(&st, Mode::Idc)), (Mode::Ifc, inner_break_iteration(&st, Mode::Ifc))] {
            let norms: Vec<f64> = (0..400)
                .map(|seed| {
                    let mut o = CountingOracle::new(&f);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    run_round(&mut o, &x0, &st, k, 0.0, &mut rng, None, None).unwrap().grad_norm
                })
                .collect();
            let (mean, se) = mean_and_se(&norms);
            let bound = match mode {
                Mode::Idc => (delta + st.contraction(k) * st.c_idc.sqrt()) * r0,
                Mode::Ifc => ((2.0 * delta).sqrt() + st.contraction(k) * st.c_ifc.sqrt()) * delta0.sqrt(),
            };
            assert!(mean <= 1.1 * bound + 3.0 * se, "δ {delta} k {k}: {mean} vs {bound}");
            if mode == Mode::Idc && k == inner_break_iteration(&st, Mode::Idc) {
                assert!(mean <= 2.0 * delta * r0 * 1.1 + 3.0 * se);
            }
        }
    }
}

#[test]
fn first_round_below_threshold() {
    assert_eq!(first_round_below(1.0, 2.0, 0.3), 2);
    assert_eq!(first_round_below(1.0, 2.0, 1.0), 0);
    assert_eq!(first_round_below(0.25, 2.0, 0.25 / 1024.0), 10);
}
