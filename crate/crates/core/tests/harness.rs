use nearstat::deterministic::run_gd;
use nearstat::harness::*;
use nearstat::{CountingOracle, Error};

const GD_QUAD: &str = r#"
budget_passes = 4
seeds = [3]

[dataset]
kind = "quadratic"
rows = 12
d = 4
n = 3
seed = 1

[[methods]]
name = "gd"
"#;

fn read(path: &std::path::Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn gd_passes_through() {
    let config = parse_config(GD_QUAD).unwrap();
    let problem = build_problem(&config.dataset).unwrap();
    let result = run_experiment_on(&config, &problem).unwrap();
    assert_eq!(result.runs.len(), 1);
    let mut o = CountingOracle::new(problem.objective());
    let direct = run_gd(&mut o, &[0.0; 4], 3).unwrap();
    assert_eq!(result.runs[0].trace.events, direct.events);
    assert_eq!(result.runs[0].trace.output, direct.output);
}

#[test]
fn gd_n3_has_four_rows_and_exact_headers() {
    let config = parse_config(GD_QUAD).unwrap();
    let result = run_experiment(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (traces, summary) = write_outputs(&result, dir.path()).unwrap();
    let text = read(&traces);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,seed,event_index,oracle_calls,passes,grad_norm_min_tracked,grad_norm_event,f_gap"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for (k, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[0], "gd");
        assert_eq!(cols[2], k.to_string());
        assert_eq!(cols[3], (3 * (k + 1)).to_string());
        assert_eq!(cols[4].parse::<f64>().unwrap(), (k + 1) as f64);
        assert!(cols[7].parse::<f64>().unwrap() >= -1e-12);
    }
    let s = read(&summary);
    assert_eq!(s.lines().next().unwrap(), "method,passes,mean_log10_metric,std_log10_metric");
    assert_eq!(s.lines().count(), 1 + 4);
}

#[test]
fn empty_trace_set_creates_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traces.csv");
    assert!(emit_csv(&[], None, &path).is_err());
    assert!(!path.exists());
    let path = dir.path().join("summary.csv");
    assert!(emit_summary(&SummaryStats::default(), &path).is_err());
    assert!(!path.exists());
}

#[test]
fn unwritable_path_is_an_error() {
    let config = parse_config(GD_QUAD).unwrap();
    let result = run_experiment(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert!(write_outputs(&result, &blocker.join("sub")).is_err());
}

const MIXED: &str = r#"
budget_passes = 6
seeds = [1, 2, 3, 4, 5]
metric_every_passes = 0.5

[dataset]
kind = "synthetic"
n = 120
d = 6
seed = 9

[[methods]]
name = "gd"

[[methods]]
name = "m_ogm_g"
output = "min_grad"

[[methods]]
name = "chain"
first = "nag"
second = "m_ogm_g"

[[methods]]
name = "acc_svrg_g"
schedule = "two_stage"

[[methods]]
name = "svrg"

[[methods]]
name = "saga"

[[methods]]
name = "l2s"
step = "grid"
c_grid = [0.1, 0.5, 1.0]

[[methods]]
name = "l2s"
step = "sqrt_n"

[[methods]]
name = "r_acc_svrg_g"
epsilon = 1e-3
"#;

#[test]
fn mixed_run_is_byte_identical_and_well_formed() {
    let config = parse_config(MIXED).unwrap();
    let a = run_experiment(&config).unwrap();
    let b = run_experiment(&config).unwrap();
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ta, sa) = write_outputs(&a, da.path()).unwrap();
    let (tb, sb) = write_outputs(&b, db.path()).unwrap();
    assert_eq!(std::fs::read(&ta).unwrap(), std::fs::read(&tb).unwrap());
    assert_eq!(std::fs::read(&sa).unwrap(), std::fs::read(&sb).unwrap());

    // Every (method, seed) pair ran, plus the tuned L2S alias.
    let labels: std::collections::BTreeSet<&str> = a.runs.iter().map(|r| r.method.as_str()).collect();
    for l in ["gd", "m_ogm_g_min", "nag+m_ogm_g", "acc_svrg_g", "svrg", "saga", "l2s_c0.1", "l2s_c0.5", "l2s_c1", "l2s_tuned", "l2s_sqrt_n", "r_acc_svrg_g"] {
        assert_eq!(a.runs.iter().filter(|r| r.method == l).count(), 5, "{l}");
        assert!(labels.contains(l));
    }
    assert_eq!(a.l2s_tuned.len(), 1);

    let n = a.n as u64;
    for r in &a.runs {
        assert!(r.trace.oracle_calls <= 6 * n + 2 * n + 2, "{} used {}", r.method, r.trace.oracle_calls);
        for e in &r.trace.events {
            assert_eq!(r.trace.passes(e.oracle_calls), e.oracle_calls as f64 / n as f64);
        }
    }

    // Deterministic methods have zero spread; stochastic ones do not.
    for row in &a.summary.rows {
        if ["gd", "m_ogm_g_min", "nag+m_ogm_g"].contains(&row.method.as_str()) {
            assert_eq!(row.std_log10, 0.0, "{row:?}");
        }
    }
    let svrg_last = a.summary.rows.iter().filter(|r| r.method == "svrg").last().unwrap();
    assert!(svrg_last.std_log10 > 0.0);
}

#[test]
fn summary_has_every_pass() {
    let config = parse_config(MIXED).unwrap();
    let r = run_experiment(&config).unwrap();
    for m in ["acc_svrg_g", "svrg", "saga", "l2s_tuned"] {
        let passes: Vec<u64> = r.summary.rows.iter().filter(|x| x.method == m).map(|x| x.passes).collect();
        assert_eq!(passes, (1..=6).collect::<Vec<_>>(), "{m}");
    }
}

#[test]
fn configuration_errors_come_first() {
    let bad = [
        GD_QUAD.replace("name = \"gd\"", "name = \"katyusha\""),
        GD_QUAD.replace("seeds = [3]", "seeds = []"),
        GD_QUAD.replace("budget_passes = 4", "budget_passes = 0"),
        GD_QUAD.replace("n = 3", "n = 30"),
        GD_QUAD.replace("name = \"gd\"", "name = \"chain\"\nfirst = \"nag\"\nsecond = \"svrg\""),
        GD_QUAD.replace("name = \"gd\"", "name = \"r_acc_svrg_g\"\nepsilon = 0.0"),
        GD_QUAD.replace("name = \"gd\"", "name = \"acc_svrg_g\"\nschedule = \"weekly\""),
    ];
    for text in &bad {
        assert!(matches!(parse_config(text), Err(Error::Config(_))), "{text}");
    }
    let missing = GD_QUAD
        .replace("kind = \"quadratic\"\nrows = 12\nd = 4\nn = 3\nseed = 1", "kind = \"libsvm\"\npath = \"/nonexistent/file\"");
    let config = parse_config(&missing).unwrap();
    assert!(matches!(run_experiment(&config), Err(Error::Config(_))));
}

#[test]
fn config_paths_resolve_against_the_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.svm"), "+1 1:1 2:0.5\n-1 1:-1\n+1 2:2\n-1 1:0.3 2:-1\n").unwrap();
    let text = GD_QUAD.replace(
        "kind = \"quadratic\"\nrows = 12\nd = 4\nn = 3\nseed = 1",
        "kind = \"libsvm\"\npath = \"tiny.svm\"",
    );
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, text).unwrap();
    let config = load_config(&cfg).unwrap();
    let result = run_experiment(&config).unwrap();
    assert_eq!(result.n, 4);
}

#[test]
fn list_covers_every_method_name() {
    let names: Vec<&str> = list_methods().iter().map(|(n, _)| *n).collect();
    for n in ["gd", "nag", "ogm_g", "m_ogm_g", "chain", "acc_svrg_g", "svrg", "saga", "l2s", "r_acc_svrg_g"] {
        assert!(names.contains(&n));
    }
}
