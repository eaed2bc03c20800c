mod common;

use common::*;
use nearstat::deterministic::*;
use nearstat::linalg::{dist_sq, norm, norm_sq, DenseMatrix};
use nearstat::objective::make_quadratic;
use nearstat::reference::reference_optimum;
use nearstat::{CountingOracle, FiniteSum, Quadratic};

fn scalar_half_square() -> Quadratic {
    make_quadratic(DenseMatrix::identity(1), vec![0.0]).unwrap()
}

#[test]
fn theta_examples() {
    let t = theta_schedule(1);
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((t.get(0) - golden).abs() < 1e-15);
    assert_eq!(t.get(1), 1.0);
    assert_eq!(t.get(2), 0.0);
    let t = theta_schedule(2);
    assert!((t.get(1) - golden).abs() < 1e-15);
    assert!((t.get(0) - 2.1936).abs() < 1e-4);
    for n in 1..=1000 {
        let t = theta_schedule(n);
        assert!(t.get(0) >= (n as f64 + 2.0) / 2.0);
    }
    assert_eq!(theta_schedule(0).as_slice(), &[1.0]);
}

#[test]
fn ogm_g_hand_trace() {
    let q = scalar_half_square();
    let mut o = CountingOracle::new(&q);
    let mut seen_v = Vec::new();
    let (x, theta) = ogm_g_with(&mut o, &[2.0], 1, |_, _, _, _, v| seen_v.push(v[0])).unwrap();
    // L comes from power iteration, so allow its tolerance.
    assert!((seen_v[1] - 2.0 / theta.get(0)).abs() < 1e-9);
    assert!((seen_v[1] - 1.23607).abs() < 1e-5);
    assert!((x[0] + 1.23607).abs() < 1e-5);
    let g_sq = x[0] * x[0];
    assert!((g_sq - 1.5279).abs() < 1e-4);
    assert!(g_sq <= ogm_g_bound(1.0, 2.0, 1));
    assert!((ogm_g_bound(1.0, 2.0, 1) - 16.0 / 9.0).abs() < 1e-15);
}

#[test]
fn stationary_starts_stay_put() {
    let q = random_quadratic(2, 5);
    let star = reference_optimum(&q, &[0.0; 5]).unwrap();
    // Start exactly at a point whose gradient is zero in floating point.
    let a = q.mean_hessian().clone();
    let x_star = star.x_star.clone();
    let b = a.mul_vec(&x_star);
    let q = make_quadratic(a, b).unwrap();
    let g = q.full_grad(&x_star);
    assert!(norm(&g) < 1e-12);
    for method in [
        DetMethod::Gd,
        DetMethod::Nag,
        DetMethod::OgmG,
        DetMethod::OgmGOriginal,
        DetMethod::MOgmG(OutputRule::Last),
    ] {
        let mut o = CountingOracle::new(&q);
        let t = method.solve(&mut o, &x_star, 10, 0).unwrap();
        assert!(dist_sq(&t.output, &x_star).sqrt() < 1e-9, "{}", method.name());
    }
    let zero = scalar_half_square();
    for method in [DetMethod::Gd, DetMethod::Nag, DetMethod::OgmG, DetMethod::OgmGOriginal, DetMethod::MOgmG(OutputRule::MinGrad)] {
        let mut o = CountingOracle::new(&zero);
        let t = method.solve(&mut o, &[0.0], 7, 0).unwrap();
        assert_eq!(t.output, vec![0.0]);
    }
}

#[test]
fn original_form_matches_momentum_form() {
    for seed in 0..20 {
        let q = random_quadratic(50 + seed, 2 + (seed as usize % 9));
        let mut r = rng(seed);
        let x0 = gaussian_vec(&mut r, q.dim());
        let n_iters = 1 + (seed as usize * 7) % 50;
        let mut o = CountingOracle::new(&q);
        let h = ogm_g_history(&mut o, &x0, n_iters).unwrap();
        let mut o = CountingOracle::new(&q);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        ogm_g_original_with(&mut o, &x0, n_iters, |_, _, x, y, _| {
            xs.push(x.to_vec());
            ys.push(y.to_vec());
        })
        .unwrap();
        for k in 0..=n_iters {
            assert!(relative_gap(&xs[k], &h.xs[k]) <= 1e-8, "seed {seed} k {k}");
            let t = h.theta.get(k);
            let scale = 1.0 / ((2.0 * t - 1.0) * t * t);
            let bridge: Vec<f64> = ys[k].iter().zip(&xs[k]).map(|(y, x)| (y - x) * scale).collect();
            assert!(relative_gap(&bridge, &h.vs[k]) <= 1e-8, "bridge seed {seed} k {k}");
        }
    }
}

#[test]
fn potential_replay_scalar_and_random() {
    let q = scalar_half_square();
    let mut o = CountingOracle::new(&q);
    let rep = verify_ogmg_potential(&mut o, &[2.0], 1, 0.0).unwrap();
    assert!(rep.worst_slack <= 1e-12);
    for seed in 0..20 {
        let d = 1 + seed as usize % 10;
        let q = random_quadratic(500 + seed, d);
        let mut r = rng(seed);
        let x0 = gaussian_vec(&mut r, d);
        let star = reference_optimum(&q, &x0).unwrap();
        let delta0 = star.delta0(&q, &x0);
        let n_iters = 1 + seed as usize % 20;
        let mut o = CountingOracle::new(&q);
        let rep = verify_ogmg_potential(&mut o, &x0, n_iters, star.f_star).unwrap();
        let scale = q.smoothness() * delta0;
        assert!(rep.worst_slack <= 1e-9 * scale, "seed {seed}: {}", rep.worst_slack);
        assert!(rep.cross_term_total.abs() <= 1e-10 * scale.max(1.0));
        for t in &rep.terms {
            assert!(t.a >= -1e-12 * scale.max(1.0) && t.b >= -1e-12 * scale.max(1.0) && t.c >= -1e-12);
        }
    }
}

#[test]
fn m_ogm_g_coefficients_by_hand() {
    assert!((m_ogm_g_weight(0, 2) - 0.2).abs() < 1e-16);
    assert_eq!(m_ogm_g_weight(2, 2), 2.0);
    // f = x²/2, N = 2, x₀ = 1: v₁ = 0.2, x₁ = 1 − 1 − 4·0.2.
    let q = scalar_half_square();
    let mut o = CountingOracle::new(&q);
    let mut xs = Vec::new();
    m_ogm_g_with(&mut o, &[1.0], 2, OutputRule::Last, |_, _, x, _| xs.push(x[0])).unwrap();
    assert!((xs[1] + 0.8).abs() < 1e-9);
}

#[test]
fn m_ogm_g_bounds_on_random_instances() {
    for seed in 0..30 {
        let d = 2 + seed as usize % 12;
        let q = random_quadratic(900 + seed, d);
        let mut r = rng(seed);
        let x0 = gaussian_vec(&mut r, d);
        let star = reference_optimum(&q, &x0).unwrap();
        let delta0 = star.delta0(&q, &x0);
        let l = q.smoothness();
        let n_iters = 1 + (seed as usize * 13) % 64;
        let mut o = CountingOracle::new(&q);
        let mut weighted = 0.0;
        let mut min_sq = f64::INFINITY;
        m_ogm_g_with(&mut o, &x0, n_iters, OutputRule::MinGrad, |_, k, _, g| {
            weighted += m_ogm_g_weight(k, n_iters) / 2.0 * norm_sq(g);
            min_sq = min_sq.min(norm_sq(g));
        })
        .unwrap();
        let tol = 1e-9 * l * delta0;
        assert!(weighted <= m_ogm_g_bound(l, delta0, n_iters) + tol, "seed {seed}");
        assert!(min_sq <= m_ogm_g_min_bound(l, delta0, n_iters) + tol, "seed {seed}");
    }
}

#[test]
fn gd_examples() {
    let q = make_quadratic(DenseMatrix::identity(4), vec![0.0; 4]).unwrap();
    let mut o = CountingOracle::new(&q);
    let t = run_gd(&mut o, &[1.0; 4], 1).unwrap();
    assert!(t.output.iter().all(|v| v.abs() < 1e-9));

    let f = random_logistic(12, 200, 8);
    let x0 = vec![0.0; f.dim()];
    let mut o = CountingOracle::new(&f);
    let t = run_gd(&mut o, &x0, 40).unwrap();
    let fs: Vec<f64> = t.events.iter().map(|e| e.f_value.unwrap()).collect();
    assert!(fs.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    // Brute recomputation straight from component gradients.
    let l = f.smoothness();
    let mut x = x0.clone();
    let mut gi = vec![0.0; f.dim()];
    for _ in 0..40 {
        let mut g = vec![0.0; f.dim()];
        for i in 0..f.n_components() {
            f.component_grad_into(i, &x, &mut gi);
            for (a, b) in g.iter_mut().zip(&gi) {
                *a += b;
            }
        }
        for (xj, gj) in x.iter_mut().zip(&g) {
            *xj -= gj / (f.n_components() as f64 * l);
        }
    }
    assert!(relative_gap(&x, &t.output) < 1e-12);
}

#[test]
fn nag_examples() {
    let t1 = (1.0 + (1.0f64 + 4.0).sqrt()) / 2.0;
    assert!((t1 - 1.618033988749895).abs() < 1e-15);
    for seed in 0..20 {
        let d = 2 + seed as usize % 15;
        let q = random_quadratic(1200 + seed, d);
        let mut r = rng(seed);
        let x0 = gaussian_vec(&mut r, d);
        let star = reference_optimum(&q, &x0).unwrap();
        let r0 = star.r0(&x0);
        for n_iters in [1, 5, 32, 100] {
            let mut o = CountingOracle::new(&q);
            let t = run_nag(&mut o, &x0, n_iters).unwrap();
            let gap = q.value(&t.output) - star.f_star;
            assert!(gap <= nag_bound(q.smoothness(), r0, n_iters) * (1.0 + 1e-9) + 1e-14);
        }
    }
}

#[test]
fn deterministic_cost_is_n_per_iteration() {
    let q = random_finite_sum_quadratic(3, 4, 6, 18);
    for method in [DetMethod::Gd, DetMethod::Nag, DetMethod::OgmG, DetMethod::OgmGOriginal, DetMethod::MOgmG(OutputRule::Last)] {
        let mut o = CountingOracle::new(&q);
        let t = method.solve(&mut o, &[0.5; 4], 9, 0).unwrap();
        assert_eq!(t.events.len(), 10);
        for (k, e) in t.events.iter().enumerate() {
            assert_eq!(e.oracle_calls, 6 * (k as u64 + 1));
        }
        assert_eq!(o.calls(), 60);
    }
}

#[test]
fn chain_examples() {
    let q = random_quadratic(77, 20);
    let mut r = rng(77);
    let x0 = gaussian_vec(&mut r, 20);
    let star = reference_optimum(&q, &x0).unwrap();
    let l = q.smoothness();
    let r0 = star.r0(&x0);
    let chain = Chain::new(DetMethod::Nag, DetMethod::MOgmG(OutputRule::Last), 0.5).unwrap();
    let mut o = CountingOracle::new(&q);
    let t = chain.solve(&mut o, &x0, 256, 0).unwrap();
    let g_sq = norm_sq(&q.full_grad(&t.output));
    assert!(g_sq <= nag_m_ogm_g_bound(l, r0, 128, 128) * (1.0 + 1e-9));

    // Degenerate split is the first solver alone.
    let whole = Chain::new(DetMethod::OgmG, DetMethod::Gd, 1.0).unwrap();
    let mut o1 = CountingOracle::new(&q);
    let a = whole.solve(&mut o1, &x0, 17, 0).unwrap();
    let mut o2 = CountingOracle::new(&q);
    let b = DetMethod::OgmG.solve(&mut o2, &x0, 17, 0).unwrap();
    assert_eq!(a.output, b.output);
    assert_eq!(o1.calls(), o2.calls());

    // Oracle counts add up.
    let split = Chain::new(DetMethod::Nag, DetMethod::OgmG, 0.5).unwrap();
    assert_eq!(split.split(9), (5, 4));
    let mut o = CountingOracle::new(&q);
    split.solve(&mut o, &x0, 9, 0).unwrap();
    let mut oa = CountingOracle::new(&q);
    let mid = DetMethod::Nag.solve(&mut oa, &x0, 5, 0).unwrap();
    let mut ob = CountingOracle::new(&q);
    DetMethod::OgmG.solve(&mut ob, &mid.output, 4, 0).unwrap();
    assert_eq!(o.calls(), oa.calls() + ob.calls());
}
