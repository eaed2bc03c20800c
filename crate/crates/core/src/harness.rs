//! Multi-seed experiment runner: TOML configs, oracle-indexed traces, CSV
//! output and per-pass summary statistics.
//!
//! A config names one dataset, a pass budget, a seed list and a list of
//! methods. Every (method, seed) pair runs independently; results are
//! gathered in (method, seed) order, so output files are byte-identical
//! across runs of the same config.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Deserialize;

use crate::adaptive::{run_r_acc_svrg_g, Mode, RAccSvrgOptions};
use crate::data::{preprocess, read_libsvm_path, synth_dataset, LabelMode, Preprocess};
use crate::deterministic::{Chain, DetMethod, OutputRule, Solver};
use crate::error::{Error, Result};
use crate::objective::{make_logistic, make_quadratic_row_blocks, FiniteSum};
use crate::oracle::CountingOracle;
use crate::reference::reference_optimum;
use crate::stochastic::{
    acc_svrg_g_with, l2s_with, saga_with, svrg_with, Schedule, StochOptions, StochOutput, StopRule,
    SAGA_DEFAULT_CAP,
};
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub dataset: DatasetSpec,
    /// Budget in passes; one pass is `n` oracle calls.
    pub budget_passes: u64,
    pub seeds: Vec<u64>,
    /// Spacing of uncounted metric evaluations, in passes.
    #[serde(default = "one")]
    pub metric_every_passes: f64,
    /// Evaluate `f` at every event so the trace carries a function gap.
    #[serde(default = "yes")]
    pub record_f: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub methods: Vec<MethodSpec>,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Seeded Gaussian logistic data, bias-augmented and row-normalized.
    Synthetic {
        n: usize,
        d: usize,
        #[serde(default = "default_separability")]
        separability: f64,
        #[serde(default)]
        seed: u64,
    },
    Libsvm {
        path: PathBuf,
        #[serde(default = "yes")]
        bias: bool,
        #[serde(default = "yes")]
        normalize: bool,
        #[serde(default)]
        normalize_first: bool,
        #[serde(default)]
        strict_labels: bool,
    },
    /// Random least squares `½ xᵀMᵀMx − bᵀx` split into `n` row blocks.
    Quadratic {
        rows: usize,
        d: usize,
        n: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_separability() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleName {
    SingleStage,
    TwoStage,
    LowAccuracy,
}

impl From<ScheduleName> for Schedule {
    fn from(s: ScheduleName) -> Self {
        match s {
            ScheduleName::SingleStage => Schedule::SingleStage,
            ScheduleName::TwoStage => Schedule::TwoStage,
            ScheduleName::LowAccuracy => Schedule::LowAccuracy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StochOutputName {
    GradSample,
    LastSnapshot,
    #[default]
    MinTracked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetOutputName {
    #[default]
    Last,
    MinGrad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    Idc,
    Ifc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L2sStep {
    /// `η = c/L` for each `c` in the grid.
    Grid,
    /// `η = 1/(L√n)`.
    SqrtN,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    Gd {
        label: Option<String>,
    },
    Nag {
        label: Option<String>,
    },
    OgmG {
        label: Option<String>,
    },
    MOgmG {
        label: Option<String>,
        #[serde(default)]
        output: DetOutputName,
    },
    Chain {
        label: Option<String>,
        first: String,
        second: String,
        #[serde(default = "half")]
        share: f64,
    },
    AccSvrgG {
        label: Option<String>,
        schedule: ScheduleName,
        #[serde(default)]
        output: StochOutputName,
    },
    Svrg {
        label: Option<String>,
    },
    Saga {
        label: Option<String>,
        memory_cap: Option<usize>,
    },
    L2s {
        label: Option<String>,
        step: L2sStep,
        #[serde(default)]
        c_grid: Vec<f64>,
    },
    RAccSvrgG {
        label: Option<String>,
        epsilon: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default)]
        mode: ModeName,
        #[serde(default = "default_max_outer")]
        max_outer: usize,
    },
}

fn default_beta() -> f64 {
    2.0
}

fn default_max_outer() -> usize {
    64
}

/// Registered method names with one-line descriptions.
pub fn list_methods() -> Vec<(&'static str, &'static str)> {
    vec![
        ("gd", "gradient descent, step 1/L"),
        ("nag", "Nesterov's accelerated gradient for convex f"),
        ("ogm_g", "OGM-G, momentum form (stores its θ schedule)"),
        ("m_ogm_g", "memory-saving OGM-G; output = last | min_grad"),
        ("chain", "two deterministic phases, e.g. nag then m_ogm_g; share = first phase fraction"),
        ("acc_svrg_g", "Acc-SVRG-G; schedule = single_stage | two_stage | low_accuracy"),
        ("svrg", "loopless SVRG, step 1/(4L)"),
        ("saga", "SAGA, step 1/(3L), n×d gradient table"),
        ("l2s", "loopless SARAH; step = grid (c_grid, plus the tuned pick) | sqrt_n"),
        ("r_acc_svrg_g", "R-Acc-SVRG-G; epsilon, beta, mode = idc | ifc"),
    ]
}

fn det_by_name(name: &str) -> Result<DetMethod> {
    Ok(match name {
        "gd" => DetMethod::Gd,
        "nag" => DetMethod::Nag,
        "ogm_g" => DetMethod::OgmG,
        "ogm_g_original" => DetMethod::OgmGOriginal,
        "m_ogm_g" => DetMethod::MOgmG(OutputRule::Last),
        "m_ogm_g_min" => DetMethod::MOgmG(OutputRule::MinGrad),
        other => return Err(Error::Config(format!("unknown chain phase '{other}'"))),
    })
}

/// One concrete run kind after expanding grids.
#[derive(Debug, Clone, PartialEq)]
enum Job {
    Det(DetMethod),
    Chain(DetMethod, DetMethod, f64),
    AccSvrg(Schedule, StochOutput),
    Svrg,
    Saga(usize),
    L2s(f64),
    L2sSqrtN,
    RAcc(f64, f64, Mode, usize),
}

#[derive(Debug, Clone)]
struct PlannedMethod {
    label: String,
    job: Job,
    /// Index of the L2S grid this entry belongs to, for tuning.
    grid: Option<usize>,
}

fn plan(config: &ExperimentConfig) -> Result<Vec<PlannedMethod>> {
    let mut out = Vec::new();
    for (idx, m) in config.methods.iter().enumerate() {
        let pick = |label: &Option<String>, default: &str| label.clone().unwrap_or_else(|| default.to_string());
        match m {
            MethodSpec::Gd { label } => out.push(PlannedMethod {
                label: pick(label, "gd"),
                job: Job::Det(DetMethod::Gd),
                grid: None,
            }),
            MethodSpec::Nag { label } => out.push(PlannedMethod {
                label: pick(label, "nag"),
                job: Job::Det(DetMethod::Nag),
                grid: None,
            }),
            MethodSpec::OgmG { label } => out.push(PlannedMethod {
                label: pick(label, "ogm_g"),
                job: Job::Det(DetMethod::OgmG),
                grid: None,
            }),
            MethodSpec::MOgmG { label, output } => {
                let (rule, name) = match output {
                    DetOutputName::Last => (OutputRule::Last, "m_ogm_g"),
                    DetOutputName::MinGrad => (OutputRule::MinGrad, "m_ogm_g_min"),
                };
                out.push(PlannedMethod {
                    label: pick(label, name),
                    job: Job::Det(DetMethod::MOgmG(rule)),
                    grid: None,
                })
            }
            MethodSpec::Chain {
                label,
                first,
                second,
                share,
            } => {
                if !(0.0..=1.0).contains(share) {
                    return Err(Error::Config(format!("chain share must lie in [0, 1], got {share}")));
                }
                let (a, b) = (det_by_name(first)?, det_by_name(second)?);
                out.push(PlannedMethod {
                    label: pick(label, &format!("{first}+{second}")),
                    job: Job::Chain(a, b, *share),
                    grid: None,
                })
            }
            MethodSpec::AccSvrgG {
                label,
                schedule,
                output,
            } => {
                let rule = match output {
                    StochOutputName::GradSample => {
                        return Err(Error::Config(
                            "acc_svrg_g output grad_sample needs an iteration budget; use min_tracked or last_snapshot"
                                .into(),
                        ))
                    }
                    StochOutputName::LastSnapshot => StochOutput::LastSnapshot,
                    StochOutputName::MinTracked => StochOutput::MinTrackedGrad,
                };
                out.push(PlannedMethod {
                    label: pick(label, "acc_svrg_g"),
                    job: Job::AccSvrg((*schedule).into(), rule),
                    grid: None,
                })
            }
            MethodSpec::Svrg { label } => out.push(PlannedMethod {
                label: pick(label, "svrg"),
                job: Job::Svrg,
                grid: None,
            }),
            MethodSpec::Saga { label, memory_cap } => out.push(PlannedMethod {
                label: pick(label, "saga"),
                job: Job::Saga(memory_cap.unwrap_or(SAGA_DEFAULT_CAP)),
                grid: None,
            }),
            MethodSpec::L2s { label, step, c_grid } => match step {
                L2sStep::SqrtN => {
                    if !c_grid.is_empty() {
                        return Err(Error::Config("l2s with step = sqrt_n takes no c_grid".into()));
                    }
                    out.push(PlannedMethod {
                        label: pick(label, "l2s_sqrt_n"),
                        job: Job::L2sSqrtN,
                        grid: None,
                    })
                }
                L2sStep::Grid => {
                    if c_grid.is_empty() || c_grid.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
                        return Err(Error::Config("l2s c_grid must be non-empty and positive".into()));
                    }
                    let base = pick(label, "l2s");
                    for c in c_grid {
                        out.push(PlannedMethod {
                            label: format!("{base}_c{c}"),
                            job: Job::L2s(*c),
                            grid: Some(idx),
                        });
                    }
                }
            },
            MethodSpec::RAccSvrgG {
                label,
                epsilon,
                beta,
                mode,
                max_outer,
            } => {
                if !(*epsilon > 0.0) || !(*beta > 1.0) || *max_outer == 0 {
                    return Err(Error::Config(
                        "r_acc_svrg_g needs epsilon > 0, beta > 1 and max_outer >= 1".into(),
                    ));
                }
                let mode = match mode {
                    ModeName::Idc => Mode::Idc,
                    ModeName::Ifc => Mode::Ifc,
                };
                out.push(PlannedMethod {
                    label: pick(label, "r_acc_svrg_g"),
                    job: Job::RAcc(*epsilon, *beta, mode, *max_outer),
                    grid: None,
                })
            }
        }
    }
    let mut labels: Vec<&str> = out.iter().map(|m| m.label.as_str()).collect();
    labels.sort_unstable();
    if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!("duplicate method label '{}'; set label explicitly", w[0])));
    }
    Ok(out)
}

/// Checks everything that can be checked without loading data.
pub fn validate_config(config: &ExperimentConfig) -> Result<()> {
    if config.budget_passes == 0 {
        return Err(Error::Config("budget_passes must be positive".into()));
    }
    if config.seeds.is_empty() {
        return Err(Error::Config("seeds must be non-empty".into()));
    }
    if config.methods.is_empty() {
        return Err(Error::Config("at least one method is required".into()));
    }
    if !(config.metric_every_passes > 0.0) || !config.metric_every_passes.is_finite() {
        return Err(Error::Config("metric_every_passes must be positive".into()));
    }
    match &config.dataset {
        DatasetSpec::Synthetic { n, d, separability, .. } => {
            if *n == 0 || *d == 0 || !(*separability >= 0.0) {
                return Err(Error::Config("synthetic dataset needs n, d >= 1 and separability >= 0".into()));
            }
        }
        DatasetSpec::Quadratic { rows, d, n, .. } => {
            if *d == 0 || *n == 0 || rows < n {
                return Err(Error::Config("quadratic dataset needs d >= 1 and rows >= n >= 1".into()));
            }
        }
        DatasetSpec::Libsvm { .. } => {}
    }
    plan(config).map(|_| ())
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    validate_config(&config)?;
    Ok(config)
}

/// Reads and validates a config file. Relative dataset paths are resolved
/// against the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = parse_config(&text)?;
    if let DatasetSpec::Libsvm { path: data, .. } = &mut config.dataset {
        if data.is_relative() {
            if let Some(dir) = path.parent() {
                *data = dir.join(&*data);
            }
        }
    }
    Ok(config)
}

/// The objective an experiment runs on.
pub enum Problem {
    Logistic(crate::Logistic),
    Quadratic(crate::Quadratic),
}

impl Problem {
    pub fn objective(&self) -> &dyn FiniteSum {
        match self {
            Problem::Logistic(f) => f,
            Problem::Quadratic(q) => q,
        }
    }
}

pub fn random_least_squares(rows: usize, d: usize, n: usize, seed: u64) -> Result<crate::Quadratic> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (rows as f64).sqrt();
    let m: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            (0..d)
                .map(|j| scale * rng.sample::<f64, _>(StandardNormal) / (1.0 + j as f64).sqrt())
                .collect()
        })
        .collect();
    // b = Mᵀc lies in the range of MᵀM, so a minimizer exists.
    let c: Vec<f64> = (0..rows).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut b = vec![0.0; d];
    for (row, ci) in m.iter().zip(&c) {
        for (bj, mj) in b.iter_mut().zip(row) {
            *bj += ci * mj;
        }
    }
    make_quadratic_row_blocks(&m, b, n)
}

pub fn build_problem(spec: &DatasetSpec) -> Result<Problem> {
    let to_config = |e: Error| Error::Config(format!("dataset: {e}"));
    match spec {
        DatasetSpec::Synthetic {
            n,
            d,
            separability,
            seed,
        } => {
            let raw = synth_dataset(*seed, *n, *d, *separability).map_err(to_config)?;
            let ds = preprocess(&raw, Preprocess::default());
            Ok(Problem::Logistic(make_logistic(&ds).map_err(to_config)?))
        }
        DatasetSpec::Libsvm {
            path,
            bias,
            normalize,
            normalize_first,
            strict_labels,
        } => {
            let mode = if *strict_labels {
                LabelMode::Strict
            } else {
                LabelMode::Lenient
            };
            let raw = read_libsvm_path(path, mode).map_err(to_config)?;
            let ds = preprocess(
                &raw,
                Preprocess {
                    bias: *bias,
                    normalize: *normalize,
                    normalize_first: *normalize_first,
                },
            );
            Ok(Problem::Logistic(make_logistic(&ds).map_err(to_config)?))
        }
        DatasetSpec::Quadratic { rows, d, n, seed } => {
            Ok(Problem::Quadratic(random_least_squares(*rows, *d, *n, *seed).map_err(to_config)?))
        }
    }
}

/// One finished (method, seed) run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub method: String,
    pub seed: u64,
    pub trace: Trace,
}

/// Per-pass summary of one method: statistics of `log10` of the
/// min-tracked gradient norm across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub passes: u64,
    pub mean_log10: f64,
    pub std_log10: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryStats {
    pub rows: Vec<SummaryRow>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<RunRecord>,
    pub summary: SummaryStats,
    pub n: usize,
    pub f_star: Option<f64>,
    /// Label of the L2S grid entry picked as tuned, per grid.
    pub l2s_tuned: Vec<(String, String)>,
}

fn run_job(job: &Job, obj: &dyn FiniteSum, config: &ExperimentConfig, seed: u64) -> Result<Trace> {
    let n = obj.n_components() as u64;
    let x0 = vec![0.0; obj.dim()];
    let budget_calls = config.budget_passes * n;
    let metric_calls = ((config.metric_every_passes * n as f64).round() as u64).max(1);
    let opts = StochOptions {
        stop: StopRule::OracleCalls(budget_calls),
        seed,
        metric_every: Some(metric_calls),
        record_f: config.record_f,
    };
    // A deterministic run of N iterations costs N + 1 passes.
    let det_iters = (config.budget_passes - 1) as usize;
    let mut oracle = CountingOracle::new(obj);
    let mut trace = match *job {
        Job::Det(m) => m.solve(&mut oracle, &x0, det_iters, seed)?,
        Job::Chain(a, b, share) => Chain::new(a, b, share)?.solve(&mut oracle, &x0, det_iters, seed)?,
        Job::AccSvrg(kind, rule) => acc_svrg_g_with(&mut oracle, &x0, kind, rule, &opts, |_| {})?,
        Job::Svrg => svrg_with(&mut oracle, &x0, &opts)?,
        Job::Saga(cap) => saga_with(&mut oracle, &x0, &opts, cap)?.0,
        Job::L2s(c) => l2s_with(&mut oracle, &x0, c / obj.smoothness(), &opts)?,
        Job::L2sSqrtN => {
            let eta = 1.0 / (obj.smoothness() * (n as f64).sqrt());
            l2s_with(&mut oracle, &x0, eta, &opts)?
        }
        Job::RAcc(epsilon, beta, mode, max_outer) => {
            let ropts = RAccSvrgOptions {
                epsilon,
                beta,
                mode,
                seed,
                max_outer,
                max_oracle_calls: Some(budget_calls),
            };
            run_r_acc_svrg_g(&mut oracle, &x0, &ropts)?.trace
        }
    };
    trace.seed = Some(seed);
    Ok(trace)
}

/// Runs every (method, seed) pair of a validated config on a built problem.
pub fn run_experiment_on(config: &ExperimentConfig, problem: &Problem) -> Result<ExperimentResult> {
    validate_config(config)?;
    let planned = plan(config)?;
    let obj = problem.objective();
    let n = obj.n_components();
    let f_star = if config.record_f {
        reference_optimum(obj, &vec![0.0; obj.dim()]).ok().map(|r| r.f_star)
    } else {
        None
    };
    let jobs: Vec<(usize, u64)> = (0..planned.len())
        .flat_map(|m| config.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let traces: Vec<Result<Trace>> = jobs
        .par_iter()
        .map(|&(m, seed)| run_job(&planned[m].job, obj, config, seed))
        .collect();
    let mut runs = Vec::with_capacity(jobs.len());
    for (&(m, seed), trace) in jobs.iter().zip(traces) {
        runs.push(RunRecord {
            method: planned[m].label.clone(),
            seed,
            trace: trace?,
        });
    }

    let mut labels: Vec<String> = planned.iter().map(|p| p.label.clone()).collect();
    let mut aliases = Vec::new();
    let mut grids: Vec<usize> = planned.iter().filter_map(|p| p.grid).collect();
    grids.dedup();
    for g in grids {
        let members: Vec<&PlannedMethod> = planned.iter().filter(|p| p.grid == Some(g)).collect();
        let best = members
            .iter()
            .map(|p| (p.label.clone(), final_median(&runs, &p.label)))
            .fold(None::<(String, f64)>, |acc, (l, v)| match acc {
                Some((_, bv)) if bv <= v => acc,
                _ => Some((l, v)),
            });
        if let Some((best, _)) = best {
            let base = best.rsplit_once("_c").map_or("l2s", |(b, _)| b).to_string();
            let tuned = format!("{base}_tuned");
            for r in runs.clone().into_iter().filter(|r| r.method == best) {
                runs.push(RunRecord {
                    method: tuned.clone(),
                    ..r
                });
            }
            labels.push(tuned.clone());
            aliases.push((tuned, best));
        }
    }
    let summary = summarize(&runs, &labels, config.budget_passes, n);
    Ok(ExperimentResult {
        runs,
        summary,
        n,
        f_star,
        l2s_tuned: aliases,
    })
}

/// Loads the dataset, then runs the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    validate_config(config)?;
    let problem = build_problem(&config.dataset)?;
    run_experiment_on(config, &problem)
}

fn final_median(runs: &[RunRecord], label: &str) -> f64 {
    let mut v: Vec<f64> = runs
        .iter()
        .filter(|r| r.method == label)
        .map(|r| r.trace.min_grad_norm().unwrap_or(f64::INFINITY))
        .collect();
    median(&mut v)
}

pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Min-tracked gradient norm over events within `passes` passes.
pub fn min_tracked_at(trace: &Trace, n: usize, passes: u64) -> Option<f64> {
    let limit = passes * n as u64;
    trace
        .events
        .iter()
        .take_while(|e| e.oracle_calls <= limit)
        .filter_map(|e| e.grad_norm)
        .fold(None, |m, g| Some(m.map_or(g, |m: f64| m.min(g))))
}

/// Sample mean and standard deviation (divisor `m − 1`), shifted by the
/// first value so identical inputs give a standard deviation of exactly 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let k = values[0];
    let s: f64 = values.iter().map(|v| v - k).sum();
    let s2: f64 = values.iter().map(|v| (v - k) * (v - k)).sum();
    let mean = k + s / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let var = ((s2 - s * s / m as f64) / (m as f64 - 1.0)).max(0.0);
    (mean, var.sqrt())
}

pub fn summarize(runs: &[RunRecord], labels: &[String], budget_passes: u64, n: usize) -> SummaryStats {
    let mut rows = Vec::new();
    for label in labels {
        let traces: Vec<&Trace> = runs.iter().filter(|r| &r.method == label).map(|r| &r.trace).collect();
        for p in 1..=budget_passes {
            let logs: Vec<f64> = traces
                .iter()
                .filter_map(|t| min_tracked_at(t, n, p))
                .map(|g| g.max(f64::MIN_POSITIVE).log10())
                .collect();
            if logs.len() != traces.len() || logs.is_empty() {
                continue;
            }
            let (mean_log10, std_log10) = mean_std(&logs);
            rows.push(SummaryRow {
                method: label.clone(),
                passes: p,
                mean_log10,
                std_log10,
            });
        }
    }
    SummaryStats { rows }
}

pub const TRACE_HEADER: [&str; 8] = [
    "method",
    "seed",
    "event_index",
    "oracle_calls",
    "passes",
    "grad_norm_min_tracked",
    "grad_norm_event",
    "f_gap",
];

pub const SUMMARY_HEADER: [&str; 4] = ["method", "passes", "mean_log10_metric", "std_log10_metric"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the per-event trace CSV. Refuses an empty run set without
/// touching the file system.
pub fn emit_csv(runs: &[RunRecord], f_star: Option<f64>, path: &Path) -> Result<()> {
    if runs.is_empty() {
        return Err(Error::invalid("no traces to write"));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for r in runs {
        let running = r.trace.min_tracked();
        for (i, (e, best)) in r.trace.events.iter().zip(running).enumerate() {
            let gap = match (e.f_value, f_star) {
                (Some(f), Some(fs)) => Some(f - fs),
                _ => None,
            };
            w.write_record([
                r.method.clone(),
                r.seed.to_string(),
                i.to_string(),
                e.oracle_calls.to_string(),
                r.trace.passes(e.oracle_calls).to_string(),
                opt(best),
                opt(e.grad_norm),
                opt(gap),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn emit_summary(stats: &SummaryStats, path: &Path) -> Result<()> {
    if stats.rows.is_empty() {
        return Err(Error::invalid("no summary rows to write"));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in &stats.rows {
        w.write_record([
            r.method.clone(),
            r.passes.to_string(),
            r.mean_log10.to_string(),
            r.std_log10.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes `traces.csv` and `summary.csv` into `dir`, creating it if needed.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let traces = dir.join("traces.csv");
    let summary = dir.join("summary.csv");
    emit_csv(&result.runs, result.f_star, &traces)?;
    emit_summary(&result.summary, &summary)?;
    Ok((traces, summary))
}
