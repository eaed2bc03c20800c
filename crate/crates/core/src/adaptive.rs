//! R-Acc-SVRG-G: guess-and-check regularization around a loopless
//! BS-SVRG inner solver.
//!
//! Round `t` minimizes `f^δ(x) = f(x) + (δ/2)‖x − x₀‖²` with `δ = L/β^t`,
//! restarting from `x₀`. The round ends early when the maintained full
//! gradient certifies `‖∇f(x̃)‖ ≤ ε`, and otherwise after `k_max` steps, a
//! count fixed by the round's parameters and the chosen mode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{check_vector, norm};
use crate::objective::{regularize, FiniteSum};
use crate::oracle::CountingOracle;
use crate::trace::{Trace, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Initial distance to the solution set is bounded.
    Idc,
    /// Initial function gap is bounded.
    Ifc,
}

/// The cubic whose positive root is `α/δ`.
pub fn alpha_cubic(x: f64, n: usize, kappa: f64) -> f64 {
    let n = n as f64;
    ((x - (2.0 * n - 3.0)) * x - (2.0 * n * kappa + n - 3.0)) * x - n * kappa + 1.0
}

fn alpha_cubic_derivative(x: f64, n: usize, kappa: f64) -> f64 {
    let n = n as f64;
    (3.0 * x - 2.0 * (2.0 * n - 3.0)) * x - (2.0 * n * kappa + n - 3.0)
}

/// Upper end of the root bracket, `2n + 2√(nκ)`.
pub fn alpha_bracket(n: usize, kappa: f64) -> f64 {
    let n = n as f64;
    2.0 * n + 2.0 * (n * kappa).sqrt()
}

/// `α` such that `(1 − p(α+δ)/(α+L+δ))(1 + δ/α)² = 1` with `p = 1/n`.
///
/// The root of the cubic in `α/δ` is bracketed on `(0, 2n + 2√(nκ)]`,
/// bisected to a relative width of 1e-13 and polished by Newton steps that
/// are kept inside the final bracket.
pub fn solve_alpha(delta: f64, l: f64, n: usize) -> Result<f64> {
    if !(delta > 0.0 && l > 0.0) || !delta.is_finite() || !l.is_finite() || n == 0 {
        return Err(Error::invalid("solve_alpha needs δ > 0, L > 0 and n >= 1"));
    }
    let kappa = (l + delta) / delta;
    let mut lo = 0.0f64;
    let mut hi = alpha_bracket(n, kappa);
    if !(alpha_cubic(lo, n, kappa) < 0.0 && alpha_cubic(hi, n, kappa) > 0.0) {
        return Err(Error::invalid(format!("cubic root not bracketed for n = {n}, κ = {kappa}")));
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if alpha_cubic(mid, n, kappa) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let dv = alpha_cubic_derivative(x, n, kappa);
        if dv == 0.0 {
            break;
        }
        let next = x - alpha_cubic(x, n, kappa) / dv;
        if !(next >= lo && next <= hi) {
            break;
        }
        x = next;
    }
    Ok(x * delta)
}

/// `(1 − p(α+δ)/(α+L+δ))(1 + δ/α)² − 1`, zero at the chosen `α`.
pub fn product_identity_residual(alpha: f64, delta: f64, l: f64, n: usize) -> f64 {
    let p = 1.0 / n as f64;
    let r = 1.0 + delta / alpha;
    (1.0 - p * (alpha + delta) / (alpha + l + delta)) * r * r - 1.0
}

/// Parameters of one outer round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationState {
    pub delta: f64,
    pub l: f64,
    pub n: usize,
    pub kappa: f64,
    pub alpha: f64,
    pub tau_x: f64,
    pub tau_z: f64,
    pub p: f64,
    pub c_idc: f64,
    pub c_ifc: f64,
}

/// Fills in `τ_x`, `τ_z`, `p = 1/n` and the constants `C_IDC`, `C_IFC`.
pub fn derive_inner_params(alpha: f64, delta: f64, l: f64, n: usize) -> Result<RegularizationState> {
    if !(alpha > 0.0 && delta > 0.0 && l > 0.0) || n == 0 {
        return Err(Error::invalid("inner parameters need α, δ, L > 0 and n >= 1"));
    }
    let p = 1.0 / n as f64;
    let tau_x = (alpha + delta) / (alpha + l + delta);
    let tau_z = tau_x / delta - alpha * (1.0 - tau_x) / (delta * l);
    let mix = l * alpha * alpha * p / (l + (1.0 - p) * (alpha + delta));
    let c_idc = l * l + mix;
    let c_ifc = 2.0 * l + 2.0 * mix / delta;
    let slack = 1.0 + 1e-12;
    if c_idc > (l * l + 6.0 * l * delta) * slack || c_ifc > 14.0 * l * slack {
        return Err(Error::invalid(format!(
            "constants out of range for α = {alpha}, δ = {delta}: C_IDC = {c_idc}, C_IFC = {c_ifc}"
        )));
    }
    Ok(RegularizationState {
        delta,
        l,
        n,
        kappa: (l + delta) / delta,
        alpha,
        tau_x,
        tau_z,
        p,
        c_idc,
        c_ifc,
    })
}

impl RegularizationState {
    pub fn for_round(delta: f64, l: f64, n: usize) -> Result<Self> {
        derive_inner_params(solve_alpha(delta, l, n)?, delta, l, n)
    }

    pub fn threshold(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Idc => self.c_idc.sqrt() / self.delta,
            Mode::Ifc => (self.c_ifc / (2.0 * self.delta)).sqrt(),
        }
    }

    /// `(1 + δ/α)^{−k}`
    pub fn contraction(&self, k: u64) -> f64 {
        (1.0 + self.delta / self.alpha).powf(-(k as f64))
    }
}

/// Smallest `k ≥ 1` with `(1 + δ/α)^k ≥ threshold`.
pub fn inner_break_iteration(state: &RegularizationState, mode: Mode) -> u64 {
    let thr = state.threshold(mode);
    if thr <= 1.0 {
        return 1;
    }
    let base = 1.0 + state.delta / state.alpha;
    let mut k = (thr.ln() / base.ln()).ceil().max(1.0) as u64;
    // Guard against rounding in the logarithms.
    while base.powf(k as f64) < thr {
        k += 1;
    }
    while k > 1 && base.powf((k - 1) as f64) >= thr {
        k -= 1;
    }
    k
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub terminated: bool,
    /// Final snapshot `x̃` of the round.
    pub x_tilde: Vec<f64>,
    /// `‖∇f(x̃)‖` of the unregularized objective at that snapshot.
    pub grad_norm: f64,
    pub steps: u64,
}

/// One inner loop on `f^δ` for at most `k_max` steps, with termination
/// checks on `x̃` at the start and after every snapshot change.
pub fn run_round(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    state: &RegularizationState,
    k_max: u64,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
    mut trace: Option<&mut Trace>,
    call_budget: Option<u64>,
) -> Result<RoundResult> {
    let base = oracle.metric();
    check_vector("x0", x0, base.dim())?;
    let reg = regularize(base, x0, state.delta)?;
    let mut inner = CountingOracle::new(&reg);
    let n = reg.n_components();
    let d = x0.len();
    let (delta, alpha, tau_x, tau_z) = (state.delta, state.alpha, state.tau_x, state.tau_z);
    let start_calls = oracle.calls();

    let mut z = x0.to_vec();
    let mut xt = x0.to_vec();
    let mut gt = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut gk = vec![0.0; d];
    inner.grad_full(&xt, &mut gt);
    let mut base_norm = norm(&reg.base_grad_from(&xt, &gt));
    let mut log = |calls: u64, k: u64, g: f64, snapshot: bool| {
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceEvent {
                iteration: k,
                oracle_calls: calls,
                snapshot,
                grad_norm: Some(g),
                f_value: None,
            });
        }
    };
    log(start_calls + inner.calls(), 0, base_norm, true);

    let mut k = 0;
    let mut terminated = base_norm <= epsilon;
    while !terminated && k < k_max {
        if call_budget.is_some_and(|b| start_calls + inner.calls() >= b) {
            break;
        }
        for j in 0..d {
            y[j] = tau_x * z[j] + (1.0 - tau_x) * xt[j] + tau_z * (delta * (xt[j] - z[j]) - gt[j]);
        }
        let i = rng.random_range(0..n);
        inner.grad_component(i, &y, &mut gk);
        inner.accumulate_component(i, &xt, -1.0, &mut gk);
        for j in 0..d {
            gk[j] += gt[j];
            z[j] = (alpha * z[j] + delta * y[j] - gk[j]) / (alpha + delta);
        }
        k += 1;
        if rng.random::<f64>() < state.p {
            xt.copy_from_slice(&y);
            inner.grad_full(&xt, &mut gt);
            base_norm = norm(&reg.base_grad_from(&xt, &gt));
            log(start_calls + inner.calls(), k, base_norm, true);
            terminated = base_norm <= epsilon;
        }
    }
    oracle.absorb(inner.calls());
    Ok(RoundResult {
        terminated,
        x_tilde: xt,
        grad_norm: base_norm,
        steps: k,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub state: RegularizationState,
    pub k_max: u64,
    pub steps: u64,
    pub terminated: bool,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub terminated: bool,
    pub output: Vec<f64>,
    /// Outer rounds started, including the terminating one.
    pub rounds_used: usize,
    pub final_delta: f64,
    pub oracle_calls: u64,
    pub rounds: Vec<RoundRecord>,
    pub trace: Trace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RAccSvrgOptions {
    pub epsilon: f64,
    pub beta: f64,
    pub mode: Mode,
    pub seed: u64,
    pub max_outer: usize,
    /// Stop (unterminated) once this many oracle calls are spent.
    pub max_oracle_calls: Option<u64>,
}

impl RAccSvrgOptions {
    pub fn new(epsilon: f64, mode: Mode, seed: u64) -> Self {
        RAccSvrgOptions {
            epsilon,
            beta: 2.0,
            mode,
            seed,
            max_outer: 64,
            max_oracle_calls: None,
        }
    }
}

pub fn run_r_acc_svrg_g(oracle: &mut CountingOracle<'_>, x0: &[f64], opts: &RAccSvrgOptions) -> Result<Outcome> {
    check_vector("x0", x0, oracle.dim())?;
    if !(opts.epsilon > 0.0) || !opts.epsilon.is_finite() {
        return Err(Error::invalid(format!("ε must be positive, got {}", opts.epsilon)));
    }
    if !(opts.beta > 1.0) || !opts.beta.is_finite() {
        return Err(Error::invalid(format!("β must exceed 1, got {}", opts.beta)));
    }
    if opts.max_outer == 0 {
        return Err(Error::invalid("max_outer must be at least 1"));
    }
    let l = oracle.smoothness();
    let n = oracle.n();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut trace = Trace::new(n, Some(opts.seed));
    let mut rounds = Vec::new();
    let mut delta = l;
    let mut last = RoundResult {
        terminated: false,
        x_tilde: x0.to_vec(),
        grad_norm: f64::INFINITY,
        steps: 0,
    };
    let mut offset = 0;
    for _ in 0..opts.max_outer {
        if opts.max_oracle_calls.is_some_and(|b| oracle.calls() >= b) {
            break;
        }
        let state = RegularizationState::for_round(delta, l, n)?;
        let k_max = inner_break_iteration(&state, opts.mode);
        let mut round_trace = Trace::new(n, None);
        last = run_round(
            oracle,
            x0,
            &state,
            k_max,
            opts.epsilon,
            &mut rng,
            Some(&mut round_trace),
            opts.max_oracle_calls,
        )?;
        trace.extend_from(round_trace, offset);
        offset += last.steps;
        rounds.push(RoundRecord {
            state,
            k_max,
            steps: last.steps,
            terminated: last.terminated,
            grad_norm: last.grad_norm,
        });
        if last.terminated {
            break;
        }
        delta /= opts.beta;
    }
    trace.output = last.x_tilde.clone();
    trace.oracle_calls = oracle.calls();
    Ok(Outcome {
        terminated: last.terminated,
        output: last.x_tilde,
        rounds_used: rounds.len(),
        final_delta: rounds.last().map_or(l, |r| r.state.delta),
        oracle_calls: oracle.calls(),
        rounds,
        trace,
    })
}

/// `δ*_IDC = εq/(2R₀)`
pub fn delta_star_idc(epsilon: f64, q: f64, r0: f64) -> f64 {
    epsilon * q / (2.0 * r0)
}

/// `δ*_IFC = ε²q²/(8Δ₀)`
pub fn delta_star_ifc(epsilon: f64, q: f64, delta0: f64) -> f64 {
    epsilon * epsilon * q * q / (8.0 * delta0)
}

/// First round `ℓ` with `L/β^ℓ ≤ δ*`.
pub fn first_round_below(l: f64, beta: f64, delta_star: f64) -> usize {
    let mut t = 0;
    let mut delta = l;
    while delta > delta_star {
        delta /= beta;
        t += 1;
    }
    t
}
