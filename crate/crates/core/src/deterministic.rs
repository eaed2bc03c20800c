//! Full-gradient methods: GD, NAG, OGM-G in both of its forms, the
//! memory-saving M-OGM-G, and a two-phase chain combinator.
//!
//! Every method evaluates (and charges) the full gradient at each recorded
//! point, including the returned iterate, so a run of `N` iterations costs
//! `(N + 1)·n` oracle calls and yields `N + 1` trace events.

use crate::error::{Error, Result};
use crate::linalg::{self, axpy, check_vector, dot, norm, norm_sq};
use crate::oracle::CountingOracle;
use crate::trace::{Trace, TraceEvent};

/// Backward recurrence `θ_N = 1`, `θ_k² − θ_k = θ_{k+1}²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSchedule {
    theta: Vec<f64>,
}

impl ThetaSchedule {
    pub fn n_iters(&self) -> usize {
        self.theta.len() - 1
    }

    /// `θ_k` for `k ≤ N`, and `θ_{N+1} = 0`.
    pub fn get(&self, k: usize) -> f64 {
        self.theta.get(k).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }
}

pub fn theta_schedule(n_iters: usize) -> ThetaSchedule {
    let mut theta = vec![0.0f64; n_iters + 1];
    theta[n_iters] = 1.0;
    for k in (0..n_iters).rev() {
        let next = theta[k + 1];
        theta[k] = (1.0 + (1.0 + 4.0 * next * next).sqrt()) / 2.0;
    }
    ThetaSchedule { theta }
}

/// `8LΔ₀/(N+2)²`
pub fn ogm_g_bound(l: f64, delta0: f64, n_iters: usize) -> f64 {
    let n = n_iters as f64;
    8.0 * l * delta0 / ((n + 2.0) * (n + 2.0))
}

/// Weight `δ_{k+1} = 12/((N−k+1)(N−k+2)(N−k+3))`, for `k = 0..=N`.
pub fn m_ogm_g_weight(k: usize, n_iters: usize) -> f64 {
    let r = (n_iters - k) as f64;
    12.0 / ((r + 1.0) * (r + 2.0) * (r + 3.0))
}

/// `12LΔ₀/((N+2)(N+3))`, bounding `Σ_k δ_{k+1}/2 ‖∇f(x_k)‖²`.
pub fn m_ogm_g_bound(l: f64, delta0: f64, n_iters: usize) -> f64 {
    let n = n_iters as f64;
    12.0 * l * delta0 / ((n + 2.0) * (n + 3.0))
}

/// `8LΔ₀/((N+2)(N+3) − 2)`, bounding the smallest squared gradient norm.
pub fn m_ogm_g_min_bound(l: f64, delta0: f64, n_iters: usize) -> f64 {
    let n = n_iters as f64;
    8.0 * l * delta0 / ((n + 2.0) * (n + 3.0) - 2.0)
}

/// `2LR₀²/(N+1)²` on `f(x_N) − f*`.
pub fn nag_bound(l: f64, r0: f64, n_iters: usize) -> f64 {
    let n = n_iters as f64;
    2.0 * l * r0 * r0 / ((n + 1.0) * (n + 1.0))
}

/// NAG for `N_A` iterations feeding M-OGM-G for `N_B`: the NAG function-gap
/// bound substituted for `Δ` in the last-iterate M-OGM-G bound.
pub fn nag_m_ogm_g_bound(l: f64, r0: f64, n_a: usize, n_b: usize) -> f64 {
    m_ogm_g_bound(l, nag_bound(l, r0, n_a), n_b)
}

fn record(trace: &mut Trace, oracle: &CountingOracle<'_>, k: usize, x: &[f64], g: &[f64]) {
    trace.push(TraceEvent {
        iteration: k as u64,
        oracle_calls: oracle.calls(),
        snapshot: true,
        grad_norm: Some(norm(g)),
        f_value: Some(oracle.metric().value(x)),
    });
}

fn finish(mut trace: Trace, oracle: &CountingOracle<'_>, output: Vec<f64>) -> Trace {
    trace.output = output;
    trace.oracle_calls = oracle.calls();
    trace
}

pub fn run_gd(oracle: &mut CountingOracle<'_>, x0: &[f64], n_iters: usize) -> Result<Trace> {
    check_vector("x0", x0, oracle.dim())?;
    let l = oracle.smoothness();
    let mut trace = Trace::new(oracle.n(), None);
    let mut x = x0.to_vec();
    let mut g = vec![0.0; x.len()];
    for k in 0..=n_iters {
        oracle.grad_full(&x, &mut g);
        record(&mut trace, oracle, k, &x, &g);
        if k < n_iters {
            axpy(-1.0 / l, &g, &mut x);
        }
    }
    Ok(finish(trace, oracle, x))
}

/// Nesterov's method for convex `f`. Events are recorded at the gradient
/// points `y_0..y_{N−1}` and at the returned `x_N`.
pub fn run_nag(oracle: &mut CountingOracle<'_>, x0: &[f64], n_iters: usize) -> Result<Trace> {
    check_vector("x0", x0, oracle.dim())?;
    let l = oracle.smoothness();
    let d = x0.len();
    let mut trace = Trace::new(oracle.n(), None);
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut x_next = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut t = 1.0f64;
    for k in 0..n_iters {
        oracle.grad_full(&y, &mut g);
        record(&mut trace, oracle, k, &y, &g);
        for i in 0..d {
            x_next[i] = y[i] - g[i] / l;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        for i in 0..d {
            y[i] = x_next[i] + beta * (x_next[i] - x[i]);
        }
        std::mem::swap(&mut x, &mut x_next);
        t = t_next;
    }
    oracle.grad_full(&x, &mut g);
    record(&mut trace, oracle, n_iters, &x, &g);
    Ok(finish(trace, oracle, x))
}

/// Momentum form of OGM-G. `observe(k, x_k, ∇f(x_k), v_k)` sees every point
/// `k = 0..=N`.
pub fn ogm_g_with(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    n_iters: usize,
    mut observe: impl FnMut(&CountingOracle<'_>, usize, &[f64], &[f64], &[f64]),
) -> Result<(Vec<f64>, ThetaSchedule)> {
    check_vector("x0", x0, oracle.dim())?;
    let l = oracle.smoothness();
    let theta = theta_schedule(n_iters);
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut v = vec![0.0; d];
    let mut g = vec![0.0; d];
    for k in 0..=n_iters {
        oracle.grad_full(&x, &mut g);
        observe(oracle, k, &x, &g, &v);
        if k == n_iters {
            break;
        }
        let (tk, tk1) = (theta.get(k), theta.get(k + 1));
        axpy(1.0 / (l * tk * tk1 * tk1), &g, &mut v);
        let pull = 2.0 * tk1 * tk1 * tk1 - tk1 * tk1;
        for i in 0..d {
            x[i] -= g[i] / l + pull * v[i];
        }
    }
    Ok((x, theta))
}

pub fn run_ogm_g(oracle: &mut CountingOracle<'_>, x0: &[f64], n_iters: usize) -> Result<Trace> {
    let mut trace = Trace::new(oracle.n(), None);
    let (x, _) = ogm_g_with(oracle, x0, n_iters, |o, k, x, g, _| record(&mut trace, o, k, x, g))?;
    Ok(finish(trace, oracle, x))
}

/// Two-sequence form with `y_{k+1} = x_k − ∇f(x_k)/L`. `observe(k, x_k, y_k, ∇f(x_k))`.
pub fn ogm_g_original_with(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    n_iters: usize,
    mut observe: impl FnMut(&CountingOracle<'_>, usize, &[f64], &[f64], &[f64]),
) -> Result<Vec<f64>> {
    check_vector("x0", x0, oracle.dim())?;
    let l = oracle.smoothness();
    let theta = theta_schedule(n_iters);
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut y_next = vec![0.0; d];
    let mut g = vec![0.0; d];
    for k in 0..=n_iters {
        oracle.grad_full(&x, &mut g);
        observe(oracle, k, &x, &y, &g);
        if k == n_iters {
            break;
        }
        let (tk, tk1) = (theta.get(k), theta.get(k + 1));
        let c_mom = (tk - 1.0) * (2.0 * tk1 - 1.0) / (tk * (2.0 * tk - 1.0));
        let c_grad = (2.0 * tk1 - 1.0) / (2.0 * tk - 1.0);
        for i in 0..d {
            y_next[i] = x[i] - g[i] / l;
        }
        for i in 0..d {
            x[i] = y_next[i] + c_mom * (y_next[i] - y[i]) + c_grad * (y_next[i] - x[i]);
        }
        std::mem::swap(&mut y, &mut y_next);
    }
    Ok(x)
}

pub fn run_ogm_g_original(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    n_iters: usize,
) -> Result<Trace> {
    let mut trace = Trace::new(oracle.n(), None);
    let x = ogm_g_original_with(oracle, x0, n_iters, |o, k, x, _, g| record(&mut trace, o, k, x, g))?;
    Ok(finish(trace, oracle, x))
}

/// Full record of a momentum-form OGM-G run.
#[derive(Debug, Clone)]
pub struct OgmgHistory {
    pub theta: ThetaSchedule,
    pub xs: Vec<Vec<f64>>,
    pub grads: Vec<Vec<f64>>,
    pub vs: Vec<Vec<f64>>,
    pub f_values: Vec<f64>,
}

pub fn ogm_g_history(oracle: &mut CountingOracle<'_>, x0: &[f64], n_iters: usize) -> Result<OgmgHistory> {
    let (mut xs, mut grads, mut vs, mut f_values) = (vec![], vec![], vec![], vec![]);
    let (_, theta) = ogm_g_with(oracle, x0, n_iters, |o, _, x, g, v| {
        xs.push(x.to_vec());
        grads.push(g.to_vec());
        vs.push(v.to_vec());
        f_values.push(o.metric().value(x));
    })?;
    Ok(OgmgHistory {
        theta,
        xs,
        grads,
        vs,
        f_values,
    })
}

/// The four potential pieces at one iteration. `a`, `b`, `c` are
/// nonnegative up to rounding; `e` has no sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialTerms {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub e: f64,
}

#[derive(Debug, Clone)]
pub struct PotentialReport {
    /// Terms at `k = 0..=N`.
    pub terms: Vec<PotentialTerms>,
    /// `LHS − RHS` of the per-iteration inequality, `k = 0..N−1`.
    pub slacks: Vec<f64>,
    pub worst_slack: f64,
    /// The non-telescoping cross term at each `k`; these sum to zero.
    pub cross_terms: Vec<f64>,
    pub cross_term_total: f64,
}

/// Replays OGM-G and evaluates the one-step potential inequality
///
/// `A_k + B_{k+1} + C_{k+1} + E_{k+1} ≤ A_{k+1} + B_k + C_k + E_k + R_k`
///
/// where `R_k = −θ_{k+1}⟨g_{k+1}, v_{k+1}⟩ + Σ_{i>k} θ_i/(Lθ_kθ_{k+1}²)⟨g_k, g_i⟩`.
pub fn verify_ogmg_potential(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    n_iters: usize,
    f_star: f64,
) -> Result<PotentialReport> {
    if n_iters == 0 {
        return Err(Error::invalid("potential replay needs at least one iteration"));
    }
    let l = oracle.smoothness();
    let h = ogm_g_history(oracle, x0, n_iters)?;
    let th = |k: usize| h.theta.get(k);
    let gap_n = h.f_values[n_iters] - f_star;
    let gn_sq = norm_sq(&h.grads[n_iters]);
    let terms: Vec<PotentialTerms> = (0..=n_iters)
        .map(|k| {
            let t2 = th(k) * th(k);
            PotentialTerms {
                a: (gap_n - gn_sq / (2.0 * l)) / t2,
                b: (h.f_values[k] - f_star) / t2,
                c: norm_sq(&h.grads[k]) / (2.0 * l * t2),
                e: th(k + 1) * th(k + 1) / th(k) * dot(&h.grads[k], &h.vs[k]),
            }
        })
        .collect();
    let mut slacks = Vec::with_capacity(n_iters);
    let mut cross_terms = Vec::with_capacity(n_iters);
    for k in 0..n_iters {
        let coef = 1.0 / (l * th(k) * th(k + 1) * th(k + 1));
        let mut r = -th(k + 1) * dot(&h.grads[k + 1], &h.vs[k + 1]);
        for i in k + 1..=n_iters {
            r += th(i) * coef * dot(&h.grads[k], &h.grads[i]);
        }
        let (now, next) = (terms[k], terms[k + 1]);
        let lhs = now.a + next.b + next.c + next.e;
        let rhs = next.a + now.b + now.c + now.e + r;
        slacks.push(lhs - rhs);
        cross_terms.push(r);
    }
    Ok(PotentialReport {
        terms,
        worst_slack: slacks.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        cross_term_total: cross_terms.iter().sum(),
        slacks,
        cross_terms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputRule {
    #[default]
    Last,
    MinGrad,
}

/// M-OGM-G with an observer; holds only `O(d)` state. `observe(k, x_k, ∇f(x_k))`.
pub fn m_ogm_g_with(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    n_iters: usize,
    rule: OutputRule,
    mut observe: impl FnMut(&CountingOracle<'_>, usize, &[f64], &[f64]),
) -> Result<Vec<f64>> {
    check_vector("x0", x0, oracle.dim())?;
    let l = oracle.smoothness();
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut v = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut best = match rule {
        OutputRule::MinGrad => x0.to_vec(),
        OutputRule::Last => Vec::new(),
    };
    let mut best_norm = f64::INFINITY;
    for k in 0..=n_iters {
        oracle.grad_full(&x, &mut g);
        observe(oracle, k, &x, &g);
        if rule == OutputRule::MinGrad {
            let gn = norm_sq(&g);
            if gn < best_norm {
                best_norm = gn;
                best.copy_from_slice(&x);
            }
        }
        if k == n_iters {
            break;
        }
        let r = (n_iters - k) as f64;
        let push = 12.0 / (l * (r + 1.0) * (r + 2.0) * (r + 3.0));
        let pull = r * (r + 1.0) * (r + 2.0) / 6.0;
        axpy(push, &g, &mut v);
        for i in 0..d {
            x[i] -= g[i] / l + pull * v[i];
        }
    }
    Ok(match rule {
        OutputRule::Last => x,
        OutputRule::MinGrad => best,
    })
}

pub fn run_m_ogm_g(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    n_iters: usize,
    rule: OutputRule,
) -> Result<Trace> {
    let mut trace = Trace::new(oracle.n(), None);
    let x = m_ogm_g_with(oracle, x0, n_iters, rule, |o, k, x, g| record(&mut trace, o, k, x, g))?;
    Ok(finish(trace, oracle, x))
}

/// Anything that maps `(oracle, x₀, budget)` to a trace; `budget` is an
/// iteration count.
pub trait Solver: Send + Sync {
    fn name(&self) -> String;

    fn solve(&self, oracle: &mut CountingOracle<'_>, x0: &[f64], budget: usize, seed: u64) -> Result<Trace>;
}

impl Solver for Box<dyn Solver> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn solve(&self, oracle: &mut CountingOracle<'_>, x0: &[f64], budget: usize, seed: u64) -> Result<Trace> {
        (**self).solve(oracle, x0, budget, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetMethod {
    Gd,
    Nag,
    OgmG,
    OgmGOriginal,
    MOgmG(OutputRule),
}

impl Solver for DetMethod {
    fn name(&self) -> String {
        match self {
            DetMethod::Gd => "gd".into(),
            DetMethod::Nag => "nag".into(),
            DetMethod::OgmG => "ogm_g".into(),
            DetMethod::OgmGOriginal => "ogm_g_original".into(),
            DetMethod::MOgmG(OutputRule::Last) => "m_ogm_g".into(),
            DetMethod::MOgmG(OutputRule::MinGrad) => "m_ogm_g_min".into(),
        }
    }

    fn solve(&self, oracle: &mut CountingOracle<'_>, x0: &[f64], budget: usize, _seed: u64) -> Result<Trace> {
        match *self {
            DetMethod::Gd => run_gd(oracle, x0, budget),
            DetMethod::Nag => run_nag(oracle, x0, budget),
            DetMethod::OgmG => run_ogm_g(oracle, x0, budget),
            DetMethod::OgmGOriginal => run_ogm_g_original(oracle, x0, budget),
            DetMethod::MOgmG(rule) => run_m_ogm_g(oracle, x0, budget, rule),
        }
    }
}

/// Runs `first` on its share of the budget and warm-starts `second` at its
/// output. The first phase gets `⌈share · budget⌉` iterations.
pub struct Chain<A, B> {
    pub first: A,
    pub second: B,
    pub share: f64,
}

impl<A: Solver, B: Solver> Chain<A, B> {
    pub fn new(first: A, second: B, share: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&share) {
            return Err(Error::invalid(format!("chain share must lie in [0, 1], got {share}")));
        }
        Ok(Chain { first, second, share })
    }

    pub fn split(&self, budget: usize) -> (usize, usize) {
        let a = ((self.share * budget as f64) - 1e-9).ceil().max(0.0) as usize;
        let a = a.min(budget);
        (a, budget - a)
    }
}

/// Seed for the second phase, so its random stream differs from the first's.
fn second_phase_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

impl<A: Solver, B: Solver> Solver for Chain<A, B> {
    fn name(&self) -> String {
        format!("{}+{}", self.first.name(), self.second.name())
    }

    fn solve(&self, oracle: &mut CountingOracle<'_>, x0: &[f64], budget: usize, seed: u64) -> Result<Trace> {
        check_vector("x0", x0, oracle.dim())?;
        let (na, nb) = self.split(budget);
        let mut trace = Trace::new(oracle.n(), Some(seed));
        trace.output = x0.to_vec();
        trace.oracle_calls = oracle.calls();
        let mut offset = 0;
        if na > 0 {
            let a = self.first.solve(oracle, x0, na, seed)?;
            offset = na as u64;
            trace.extend_from(a, 0);
        }
        if nb > 0 {
            let start = trace.output.clone();
            let b = self.second.solve(oracle, &start, nb, second_phase_seed(seed))?;
            trace.extend_from(b, offset);
        }
        Ok(trace)
    }
}

/// Distance moved between two iterates, for tests comparing trajectories.
pub fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    linalg::dist_sq(a, b).sqrt() / norm(a).max(norm(b)).max(1.0)
}
