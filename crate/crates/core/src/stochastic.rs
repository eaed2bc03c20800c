//! Loopless variance-reduced methods: Acc-SVRG-G under three parameter
//! schedules, and the SVRG, SAGA and L2S baselines.
//!
//! Random draws come from a ChaCha8 stream seeded by the run seed, in a fixed
//! order: a presampled output index first (only for rules that need one),
//! then per iteration the component index `i_k` followed by the snapshot or
//! restart coin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::deterministic::Solver;
use crate::error::{Error, Result};
use crate::linalg::{check_vector, norm};
use crate::oracle::CountingOracle;
use crate::trace::{Trace, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `p_k = 1/n`, `τ_k = 3/(k/n + 6)`
    SingleStage,
    /// `p_k = max(6/(k+8), 1/n)`, `τ_k = 3/(p_k(k+8))`
    TwoStage,
    /// `p_k = 1/n`, `τ_k = 1 − 1/√(n+1)`
    LowAccuracy,
}

/// `(τ_k, p_k)` for iteration `k`.
pub fn schedule(k: u64, n: usize, kind: Schedule) -> (f64, f64) {
    let n = n as f64;
    let k = k as f64;
    match kind {
        Schedule::SingleStage => (3.0 / (k / n + 6.0), 1.0 / n),
        Schedule::TwoStage => {
            let p = (6.0 / (k + 8.0)).max(1.0 / n);
            (3.0 / (p * (k + 8.0)), p)
        }
        Schedule::LowAccuracy => (1.0 - 1.0 / (n + 1.0).sqrt(), 1.0 / n),
    }
}

/// `E f(x̃_K) − f* ≤ (36n²Δ₀ + 9nLR₀²)/(K+6n−1)²` under the single-stage choice.
pub fn single_stage_f_bound(n: usize, l: f64, delta0: f64, r0: f64, k: u64) -> f64 {
    let n = n as f64;
    let denom = k as f64 + 6.0 * n - 1.0;
    (36.0 * n * n * delta0 + 9.0 * n * l * r0 * r0) / (denom * denom)
}

/// `(E f − f*, E ‖∇f‖²)` bounds for the low-accuracy early stop.
pub fn low_accuracy_bounds(n: usize, l: f64, r0: f64) -> (f64, f64) {
    let s = (n as f64 + 1.0).sqrt() + 1.0;
    (l * r0 * r0 / s, 1.6 * l * l * r0 * r0 / s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StochOutput {
    /// `x̃_j` with `P(j = k) ∝ τ_k^{-2}` over `k < K`; needs an iteration budget.
    GradSample,
    LastSnapshot,
    /// The snapshot with the smallest full-gradient norm seen.
    MinTrackedGrad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    Iterations(u64),
    /// Stop before the first iteration that would start at or past this many calls.
    OracleCalls(u64),
}

impl StopRule {
    fn done(&self, k: u64, calls: u64) -> bool {
        match *self {
            StopRule::Iterations(max) => k >= max,
            StopRule::OracleCalls(max) => calls >= max,
        }
    }
}

/// Run controls shared by the stochastic methods.
#[derive(Debug, Clone, PartialEq)]
pub struct StochOptions {
    pub stop: StopRule,
    pub seed: u64,
    /// Emit an extra uncounted metric event every this many oracle calls.
    pub metric_every: Option<u64>,
    /// Evaluate `f` (uncounted) at every event.
    pub record_f: bool,
}

impl StochOptions {
    pub fn iterations(k: u64, seed: u64) -> Self {
        StochOptions {
            stop: StopRule::Iterations(k),
            seed,
            metric_every: None,
            record_f: false,
        }
    }
}

struct Recorder {
    trace: Trace,
    every: Option<u64>,
    next: u64,
    record_f: bool,
}

impl Recorder {
    fn new(oracle: &CountingOracle<'_>, opts: &StochOptions) -> Result<Self> {
        if opts.metric_every == Some(0) {
            return Err(Error::invalid("metric cadence must be positive"));
        }
        Ok(Recorder {
            trace: Trace::new(oracle.n(), Some(opts.seed)),
            every: opts.metric_every,
            next: opts.metric_every.unwrap_or(u64::MAX),
            record_f: opts.record_f,
        })
    }

    fn event(&mut self, oracle: &CountingOracle<'_>, k: u64, snapshot: bool, grad_norm: Option<f64>, x: &[f64]) {
        self.trace.push(TraceEvent {
            iteration: k,
            oracle_calls: oracle.calls(),
            snapshot,
            grad_norm,
            f_value: self.record_f.then(|| oracle.metric().value(x)),
        });
    }

    /// Metric event at `x` once the cadence boundary is crossed. `known` is a
    /// gradient norm the method already has for `x`.
    fn tick(&mut self, oracle: &CountingOracle<'_>, k: u64, x: &[f64], known: Option<f64>) {
        let Some(every) = self.every else { return };
        if oracle.calls() < self.next {
            return;
        }
        while self.next <= oracle.calls() {
            self.next += every;
        }
        let g = known.unwrap_or_else(|| norm(&oracle.metric().full_grad(x)));
        self.event(oracle, k, false, Some(g), x);
    }

    fn finish(mut self, oracle: &CountingOracle<'_>, k: u64, x: &[f64], known: Option<f64>, output: Vec<f64>) -> Trace {
        let stale = self
            .trace
            .events
            .last()
            .map_or(true, |e| e.oracle_calls != oracle.calls() || e.iteration != k);
        if stale {
            self.event(oracle, k, false, known, x);
        }
        self.trace.output = output;
        self.trace.oracle_calls = oracle.calls();
        self.trace
    }
}

/// `out = ∇f_i(y) − ∇f_i(x̃) + g̃`, two oracle calls.
pub fn variance_reduced_grad(
    oracle: &mut CountingOracle<'_>,
    i: usize,
    y: &[f64],
    x_tilde: &[f64],
    g_tilde: &[f64],
    out: &mut [f64],
) {
    oracle.grad_component(i, y, out);
    oracle.accumulate_component(i, x_tilde, -1.0, out);
    for (o, g) in out.iter_mut().zip(g_tilde) {
        *o += g;
    }
}

/// Samples `j ∈ [0, K)` with probability `∝ τ_j^{-2}` in two streaming passes.
fn sample_output_index(rng: &mut ChaCha8Rng, k_max: u64, n: usize, kind: Schedule) -> u64 {
    let weight = |k: u64| schedule(k, n, kind).0.powi(-2);
    let total: f64 = (0..k_max).map(weight).sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for k in 0..k_max {
        acc += weight(k);
        if target < acc {
            return k;
        }
    }
    k_max - 1
}

/// State after one Acc-SVRG-G iteration `k`, handed to observers.
#[derive(Debug)]
pub struct AccSvrgStep<'s> {
    pub k: u64,
    pub tau: f64,
    pub p: f64,
    pub sample: usize,
    pub y: &'s [f64],
    pub z_next: &'s [f64],
    /// `x̃_{k+1}`
    pub x_tilde: &'s [f64],
    /// `∇f(x̃_{k+1})` as maintained by the method.
    pub g_tilde: &'s [f64],
    pub snapshot: bool,
    pub calls_before: u64,
    pub calls_after: u64,
}

fn validate_start(oracle: &CountingOracle<'_>, x0: &[f64]) -> Result<()> {
    check_vector("x0", x0, oracle.dim())?;
    if oracle.n() == 0 {
        return Err(Error::invalid("objective has no components"));
    }
    Ok(())
}

/// Acc-SVRG-G with an observer called after every iteration.
pub fn acc_svrg_g_with(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    kind: Schedule,
    rule: StochOutput,
    opts: &StochOptions,
    mut observe: impl FnMut(&AccSvrgStep<'_>),
) -> Result<Trace> {
    validate_start(oracle, x0)?;
    let n = oracle.n();
    let l = oracle.smoothness();
    let d = x0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let out_index = match (rule, opts.stop) {
        (StochOutput::GradSample, StopRule::Iterations(k_max)) if k_max > 0 => {
            Some(sample_output_index(&mut rng, k_max, n, kind))
        }
        (StochOutput::GradSample, _) => {
            return Err(Error::invalid("gradient-sampled output needs a positive iteration budget"))
        }
        _ => None,
    };
    let mut rec = Recorder::new(oracle, opts)?;
    let mut z = x0.to_vec();
    let mut xt = x0.to_vec();
    let mut gt = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut gk = vec![0.0; d];
    oracle.grad_full(&xt, &mut gt);
    let mut gt_norm = norm(&gt);
    rec.event(oracle, 0, true, Some(gt_norm), &xt);

    let mut keep = match rule {
        StochOutput::LastSnapshot => Vec::new(),
        _ => x0.to_vec(),
    };
    let mut keep_norm = gt_norm;
    let mut k = 0u64;
    while !opts.stop.done(k, oracle.calls()) {
        let (tau, p) = schedule(k, n, kind);
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::invalid(format!("schedule produced τ = {tau} at k = {k}")));
        }
        let alpha = l * tau / (1.0 - tau);
        let calls_before = oracle.calls();
        for j in 0..d {
            y[j] = tau * z[j] + (1.0 - tau) * (xt[j] - gt[j] / l);
        }
        let i = rng.random_range(0..n);
        variance_reduced_grad(oracle, i, &y, &xt, &gt, &mut gk);
        for j in 0..d {
            z[j] -= gk[j] / alpha;
        }
        let flip = rng.random::<f64>() < p;
        if flip {
            xt.copy_from_slice(&y);
            oracle.grad_full(&xt, &mut gt);
            gt_norm = norm(&gt);
        }
        observe(&AccSvrgStep {
            k,
            tau,
            p,
            sample: i,
            y: &y,
            z_next: &z,
            x_tilde: &xt,
            g_tilde: &gt,
            snapshot: flip,
            calls_before,
            calls_after: oracle.calls(),
        });
        k += 1;
        if flip {
            rec.event(oracle, k, true, Some(gt_norm), &xt);
            if rule == StochOutput::MinTrackedGrad && gt_norm < keep_norm {
                keep_norm = gt_norm;
                keep.copy_from_slice(&xt);
            }
        }
        if out_index == Some(k) {
            keep.copy_from_slice(&xt);
        }
        rec.tick(oracle, k, &xt, Some(gt_norm));
    }
    let output = match rule {
        StochOutput::LastSnapshot => xt.clone(),
        _ => keep,
    };
    Ok(rec.finish(oracle, k, &xt, Some(gt_norm), output))
}

pub fn run_acc_svrg_g(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    k_max: u64,
    kind: Schedule,
    seed: u64,
    rule: StochOutput,
) -> Result<Trace> {
    acc_svrg_g_with(oracle, x0, kind, rule, &StochOptions::iterations(k_max, seed), |_| {})
}

#[derive(Debug, Clone)]
pub struct LowAccuracyRun {
    pub trace: Trace,
    /// First iteration `N` whose snapshot coin came up; the output is `y_N`.
    pub stop_iteration: u64,
}

/// Low-accuracy schedule, terminated at the first snapshot flip. The output
/// `x̃_{N+1} = y_N` is returned without paying for its full gradient, so the
/// expected cost is `n + 2n`.
pub fn run_acc_svrg_g_low_accuracy(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    seed: u64,
) -> Result<LowAccuracyRun> {
    validate_start(oracle, x0)?;
    let n = oracle.n();
    let l = oracle.smoothness();
    let d = x0.len();
    let (tau, p) = schedule(0, n, Schedule::LowAccuracy);
    if !(tau > 0.0) {
        return Err(Error::invalid("low-accuracy schedule needs n >= 1 with τ > 0"));
    }
    let alpha = l * tau / (1.0 - tau);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = Trace::new(n, Some(seed));
    let mut z = x0.to_vec();
    let mut gt = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut gk = vec![0.0; d];
    oracle.grad_full(x0, &mut gt);
    trace.push(TraceEvent {
        iteration: 0,
        oracle_calls: oracle.calls(),
        snapshot: true,
        grad_norm: Some(norm(&gt)),
        f_value: None,
    });
    // x̃ stays at x₀ until the first flip, which ends the run.
    let shifted: Vec<f64> = x0.iter().zip(&gt).map(|(x, g)| x - g / l).collect();
    let mut k = 0u64;
    loop {
        for j in 0..d {
            y[j] = tau * z[j] + (1.0 - tau) * shifted[j];
        }
        let i = rng.random_range(0..n);
        variance_reduced_grad(oracle, i, &y, x0, &gt, &mut gk);
        for j in 0..d {
            z[j] -= gk[j] / alpha;
        }
        if rng.random::<f64>() < p {
            break;
        }
        k += 1;
    }
    trace.push(TraceEvent {
        iteration: k + 1,
        oracle_calls: oracle.calls(),
        snapshot: false,
        grad_norm: None,
        f_value: None,
    });
    trace.output = y;
    trace.oracle_calls = oracle.calls();
    Ok(LowAccuracyRun {
        trace,
        stop_iteration: k,
    })
}

/// Loopless SVRG with step `η = 1/(4L)` and snapshot probability `1/n`. The
/// snapshot moves to the freshly updated iterate.
pub fn svrg_with(oracle: &mut CountingOracle<'_>, x0: &[f64], opts: &StochOptions) -> Result<Trace> {
    validate_start(oracle, x0)?;
    let n = oracle.n();
    let eta = 1.0 / (4.0 * oracle.smoothness());
    let p = 1.0 / n as f64;
    let d = x0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rec = Recorder::new(oracle, opts)?;
    let mut x = x0.to_vec();
    let mut w = x0.to_vec();
    let mut gw = vec![0.0; d];
    let mut gk = vec![0.0; d];
    oracle.grad_full(&w, &mut gw);
    rec.event(oracle, 0, true, Some(norm(&gw)), &w);
    let mut k = 0u64;
    while !opts.stop.done(k, oracle.calls()) {
        let i = rng.random_range(0..n);
        variance_reduced_grad(oracle, i, &x, &w, &gw, &mut gk);
        for j in 0..d {
            x[j] -= eta * gk[j];
        }
        k += 1;
        if rng.random::<f64>() < p {
            w.copy_from_slice(&x);
            oracle.grad_full(&w, &mut gw);
            rec.event(oracle, k, true, Some(norm(&gw)), &w);
        }
        rec.tick(oracle, k, &x, None);
    }
    let known = (x == w).then(|| norm(&gw));
    Ok(rec.finish(oracle, k, &x, known, x.clone()))
}

pub fn run_svrg(oracle: &mut CountingOracle<'_>, x0: &[f64], k_max: u64, seed: u64) -> Result<Trace> {
    svrg_with(oracle, x0, &StochOptions::iterations(k_max, seed))
}

/// Default SAGA table cap: 2^25 stored entries (256 MiB of `f64`).
pub const SAGA_DEFAULT_CAP: usize = 1 << 25;

/// SAGA's stored component gradients, one dense row per component.
#[derive(Debug, Clone)]
pub struct SagaTable {
    n: usize,
    d: usize,
    rows: Vec<f64>,
    mean: Vec<f64>,
}

impl SagaTable {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    /// Running mean maintained by the method.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Sum of the rows, recomputed from scratch.
    pub fn sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.d];
        for i in 0..self.n {
            for (sj, r) in s.iter_mut().zip(self.row(i)) {
                *sj += r;
            }
        }
        s
    }
}

/// SAGA with step `η = 1/(3L)`. Returns the final gradient table for audits.
pub fn saga_with(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    opts: &StochOptions,
    cap: usize,
) -> Result<(Trace, SagaTable)> {
    validate_start(oracle, x0)?;
    let n = oracle.n();
    let d = x0.len();
    let requested = n.saturating_mul(d);
    if requested > cap {
        return Err(Error::MemoryCap { requested, cap });
    }
    let eta = 1.0 / (3.0 * oracle.smoothness());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rec = Recorder::new(oracle, opts)?;
    let mut rows = vec![0.0; requested];
    let mut mean = vec![0.0; d];
    for i in 0..n {
        let row = &mut rows[i * d..(i + 1) * d];
        oracle.grad_component(i, x0, row);
        for (m, r) in mean.iter_mut().zip(row.iter()) {
            *m += r;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    rec.event(oracle, 0, true, Some(norm(&mean)), x0);
    let mut x = x0.to_vec();
    let mut g_new = vec![0.0; d];
    let mut k = 0u64;
    while !opts.stop.done(k, oracle.calls()) {
        let i = rng.random_range(0..n);
        oracle.grad_component(i, &x, &mut g_new);
        let row = &mut rows[i * d..(i + 1) * d];
        for j in 0..d {
            let diff = g_new[j] - row[j];
            x[j] -= eta * (diff + mean[j]);
            mean[j] += diff / n as f64;
        }
        row.copy_from_slice(&g_new);
        k += 1;
        rec.tick(oracle, k, &x, None);
    }
    let trace = rec.finish(oracle, k, &x, None, x.clone());
    Ok((trace, SagaTable { n, d, rows, mean }))
}

pub fn run_saga(oracle: &mut CountingOracle<'_>, x0: &[f64], k_max: u64, seed: u64) -> Result<Trace> {
    saga_with(oracle, x0, &StochOptions::iterations(k_max, seed), SAGA_DEFAULT_CAP).map(|(t, _)| t)
}

/// Loopless SARAH (L2S) with `m = n`: a full-gradient restart with
/// probability `1/n`, otherwise the recursive estimator. The output is an
/// iterate `x_j`, `j` uniform on `[0, T)`, presampled when the budget is an
/// iteration count and the last iterate otherwise.
pub fn l2s_with(oracle: &mut CountingOracle<'_>, x0: &[f64], eta: f64, opts: &StochOptions) -> Result<Trace> {
    validate_start(oracle, x0)?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid(format!("L2S step size must be positive, got {eta}")));
    }
    let n = oracle.n();
    let p = 1.0 / n as f64;
    let d = x0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let out_index = match opts.stop {
        StopRule::Iterations(t) if t > 0 => Some(rng.random_range(0..t)),
        _ => None,
    };
    let mut rec = Recorder::new(oracle, opts)?;
    let mut x = x0.to_vec();
    let mut x_prev = x0.to_vec();
    let mut v = vec![0.0; d];
    oracle.grad_full(&x, &mut v);
    rec.event(oracle, 0, true, Some(norm(&v)), &x);
    let mut keep = x0.to_vec();
    let mut k = 0u64;
    while !opts.stop.done(k, oracle.calls()) {
        if k > 0 {
            let i = rng.random_range(0..n);
            if rng.random::<f64>() < p {
                oracle.grad_full(&x, &mut v);
                rec.event(oracle, k, true, Some(norm(&v)), &x);
            } else {
                oracle.accumulate_component(i, &x, 1.0, &mut v);
                oracle.accumulate_component(i, &x_prev, -1.0, &mut v);
            }
        }
        if out_index == Some(k) {
            keep.copy_from_slice(&x);
        }
        x_prev.copy_from_slice(&x);
        for j in 0..d {
            x[j] -= eta * v[j];
        }
        k += 1;
        rec.tick(oracle, k, &x, None);
    }
    let output = if out_index.is_some() { keep } else { x.clone() };
    Ok(rec.finish(oracle, k, &x, None, output))
}

pub fn run_l2s(oracle: &mut CountingOracle<'_>, x0: &[f64], t: u64, eta: f64, seed: u64) -> Result<Trace> {
    l2s_with(oracle, x0, eta, &StochOptions::iterations(t, seed))
}

/// Stochastic methods behind the [`Solver`] interface, budgets in iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StochMethod {
    AccSvrgG(Schedule, StochOutput),
    Svrg,
    Saga,
    L2s { eta_times_l: f64 },
    /// L2S with `η = 1/(L√n)`.
    L2sSqrtN,
}

impl Solver for StochMethod {
    fn name(&self) -> String {
        match self {
            StochMethod::AccSvrgG(..) => "acc_svrg_g".into(),
            StochMethod::Svrg => "svrg".into(),
            StochMethod::Saga => "saga".into(),
            StochMethod::L2s { eta_times_l } => format!("l2s_c{eta_times_l}"),
            StochMethod::L2sSqrtN => "l2s_sqrt_n".into(),
        }
    }

    fn solve(&self, oracle: &mut CountingOracle<'_>, x0: &[f64], budget: usize, seed: u64) -> Result<Trace> {
        let k = budget as u64;
        let l = oracle.smoothness();
        match *self {
            StochMethod::AccSvrgG(kind, rule) => run_acc_svrg_g(oracle, x0, k, kind, seed, rule),
            StochMethod::Svrg => run_svrg(oracle, x0, k, seed),
            StochMethod::Saga => run_saga(oracle, x0, k, seed),
            StochMethod::L2s { eta_times_l } => run_l2s(oracle, x0, k, eta_times_l / l, seed),
            StochMethod::L2sSqrtN => {
                let eta = 1.0 / (l * (oracle.n() as f64).sqrt());
                run_l2s(oracle, x0, k, eta, seed)
            }
        }
    }
}
