//! Per-run event records shared by every solver.

/// One recorded point of a run. `oracle_calls` is cumulative.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub iteration: u64,
    pub oracle_calls: u64,
    /// A full gradient was computed (counted) at this event.
    pub snapshot: bool,
    /// Full-gradient norm at the method's reference point, if known.
    pub grad_norm: Option<f64>,
    /// Objective value at the reference point, if evaluated.
    pub f_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    pub output: Vec<f64>,
    pub seed: Option<u64>,
    /// Total oracle calls charged by the run.
    pub oracle_calls: u64,
    /// Component count of the objective, so passes can be derived.
    pub n: usize,
}

impl Trace {
    pub fn new(n: usize, seed: Option<u64>) -> Self {
        Trace {
            events: Vec::new(),
            output: Vec::new(),
            seed,
            oracle_calls: 0,
            n,
        }
    }

    pub fn push(&mut self, event: TraceEvent) {
        debug_assert!(self
            .events
            .last()
            .map_or(true, |e| e.oracle_calls <= event.oracle_calls));
        self.events.push(event);
    }

    /// Smallest gradient norm over all recorded events.
    pub fn min_grad_norm(&self) -> Option<f64> {
        self.events
            .iter()
            .filter_map(|e| e.grad_norm)
            .fold(None, |m, g| Some(m.map_or(g, |m: f64| m.min(g))))
    }

    /// Running minimum of the gradient norm, aligned with `events`.
    pub fn min_tracked(&self) -> Vec<Option<f64>> {
        let mut best: Option<f64> = None;
        self.events
            .iter()
            .map(|e| {
                if let Some(g) = e.grad_norm {
                    best = Some(best.map_or(g, |b| b.min(g)));
                }
                best
            })
            .collect()
    }

    pub fn passes(&self, calls: u64) -> f64 {
        calls as f64 / self.n as f64
    }

    /// Appends another run's events, shifting iteration indices so they stay
    /// increasing. Oracle counts are taken as already cumulative.
    pub fn extend_from(&mut self, other: Trace, iteration_offset: u64) {
        for mut e in other.events {
            e.iteration += iteration_offset;
            self.push(e);
        }
        self.output = other.output;
        self.oracle_calls = other.oracle_calls;
    }

    pub fn last_iteration(&self) -> u64 {
        self.events.last().map_or(0, |e| e.iteration)
    }
}
