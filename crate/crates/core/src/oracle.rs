//! Counted gradient access. Every solver goes through a [`CountingOracle`];
//! its counter is the only complexity measure reported anywhere.

use crate::objective::FiniteSum;

pub struct CountingOracle<'a> {
    objective: &'a dyn FiniteSum,
    calls: u64,
}

impl<'a> CountingOracle<'a> {
    pub fn new(objective: &'a dyn FiniteSum) -> Self {
        CountingOracle { objective, calls: 0 }
    }

    pub fn n(&self) -> usize {
        self.objective.n_components()
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn smoothness(&self) -> f64 {
        self.objective.smoothness()
    }

    /// Number of component-gradient evaluations so far.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// `out = ∇f_i(x)`, one call.
    pub fn grad_component(&mut self, i: usize, x: &[f64], out: &mut [f64]) {
        self.calls += 1;
        self.objective.component_grad_into(i, x, out);
    }

    /// `out += alpha ∇f_i(x)`, one call.
    pub fn accumulate_component(&mut self, i: usize, x: &[f64], alpha: f64, out: &mut [f64]) {
        self.calls += 1;
        self.objective.accumulate_component_grad(i, x, alpha, out);
    }

    /// `out = ∇f(x)`, n calls.
    pub fn grad_full(&mut self, x: &[f64], out: &mut [f64]) {
        self.calls += self.n() as u64;
        self.objective.full_grad_into(x, out);
    }

    /// Uncounted access for metrics and tests. Solvers must not use it to
    /// drive their iterates.
    pub fn metric(&self) -> &'a dyn FiniteSum {
        self.objective
    }

    /// Folds in calls made through another oracle (e.g. on a wrapped objective).
    pub fn absorb(&mut self, calls: u64) {
        self.calls += calls;
    }
}

impl std::fmt::Debug for CountingOracle<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CountingOracle")
            .field("n", &self.n())
            .field("calls", &self.calls)
            .finish()
    }
}
