//! End-to-end acceptance checks, one line per criterion. They run one after
//! another inside a single test so that the wall-clock budgets are measured
//! without competing tests on the same cores.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use bilevel::diagnostics::{
    adjoint_test, gradient_check, rate_report, tcc_ratio_with, DEFAULT_TAUS,
};
use bilevel::forward::reference_solve;
use bilevel::grid::norm_l2_spacetime;
use bilevel::harness::{
    canned_config, prepare, run_experiment, run_sweep, ExperimentConfig, RunSummary,
};
use bilevel::upper::RunLog;
use bilevel::{
    BuiltinReaction, InversionMode, PdeProblem, RangeGrid, ReactionCurve, SpaceGrid,
    SpaceTimeField, SpatialField, TimeGrid,
};

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

fn check(
    id: usize,
    name: &'static str,
    budget_s: u64,
    f: impl FnOnce() -> (bool, String),
) -> Outcome {
    let t = Instant::now();
    let (pass, detail) = f();
    let elapsed = t.elapsed();
    let budget = Duration::from_secs(budget_s);
    let out = Outcome {
        id,
        name,
        pass: pass && elapsed <= budget,
        detail,
        elapsed,
        budget,
    };
    println!(
        "criterion {:>2} {} {}: {} [{:.1} s, budget {} s]",
        out.id,
        if out.pass { "PASS" } else { "FAIL" },
        out.name,
        out.detail,
        out.elapsed.as_secs_f64(),
        out.budget.as_secs()
    );
    out
}

fn config(name: &str, dir: &Path) -> ExperimentConfig {
    let mut cfg = canned_config(name).unwrap();
    cfg.output = dir.join(name);
    cfg
}

fn run(name: &str, dir: &Path) -> RunSummary {
    run_experiment(&config(name, dir)).unwrap()
}

fn read_log(path: &Path) -> RunLog {
    let text = fs::read_to_string(path).unwrap();
    let mut log = RunLog::default();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let opt = |s: &str| {
            if s.is_empty() {
                None
            } else {
                Some(s.parse().unwrap())
            }
        };
        log.push(bilevel::RunRecord {
            j: f[0].parse().unwrap(),
            kappa: f[1].parse().unwrap(),
            lower_residual: f[2].parse().unwrap(),
            misfit: f[3].parse().unwrap(),
            param_error: opt(f[4]),
            state_error: opt(f[5]),
            wall_ms: f[6].parse().unwrap(),
        })
        .unwrap();
    }
    log
}

fn manufactured_error(nx: usize, nt: usize) -> f64 {
    let s = SpaceGrid::unit(nx).unwrap();
    let t = TimeGrid::new(nt, 0.1).unwrap();
    let fisher = BuiltinReaction::Fisher;
    let exact = |tt: f64, x: f64| (-tt).exp() * (PI * x).sin();
    let phi = SpaceTimeField::from_fn(s, t, |tt, x| {
        (PI * PI - 1.0) * exact(tt, x) + fisher.eval(exact(tt, x))
    });
    let p = PdeProblem::heat(phi, SpatialField::from_fn(s, |x| exact(0.0, x))).unwrap();
    let curve = ReactionCurve::builtin(fisher, RangeGrid::new(4001, -1.0, 1.0).unwrap());
    let u = reference_solve(&p, &curve).unwrap();
    norm_l2_spacetime(&u.sub(&SpaceTimeField::from_fn(s, t, exact)).unwrap())
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let fisher_cfg = config("fisher_full", dir);
    let fisher = prepare(&fisher_cfg).unwrap();
    let mut results = Vec::new();

    results.push(check(1, "adjoint exactness", 1, || {
        let rep = adjoint_test(&fisher.problem, &fisher.truth, &fisher.truth_state, 20, 1).unwrap();
        (
            rep.pass && rep.worst < 1e-10,
            format!("worst mismatch {:.2e} < 1e-10 over 20 trials", rep.worst),
        )
    }));

    results.push(check(2, "gradient fidelity", 30, || {
        let rep = gradient_check(
            &fisher.problem,
            &fisher.initial,
            &fisher.observation,
            5,
            &DEFAULT_TAUS,
            fisher_cfg.inversion.sobolev,
            1,
        )
        .unwrap();
        let med = rep.median();
        (
            med < 1e-2,
            format!("median relative error {med:.2e} < 1e-2 over 5 directions"),
        )
    }));

    results.push(check(3, "forward consistency", 10, || {
        // dt and h² both halve
        let ratio = manufactured_error(101, 51) / manufactured_error(142, 101);
        (
            (1.7..=2.6).contains(&ratio),
            format!("error ratio {ratio:.3} in [1.7, 2.6]"),
        )
    }));

    results.push(check(4, "lower-level rate", 30, || {
        let rep = rate_report(
            &fisher.problem,
            &fisher.truth,
            fisher_cfg.inversion.lower.metric,
            10,
            200,
        )
        .unwrap();
        (
            rep.pass,
            format!(
                "log-log slope {:.3} <= -0.25 over k in [10, 200]",
                rep.worst
            ),
        )
    }));

    results.push(check(5, "lane-emden full-data reconstruction", 300, || {
        let r = run("lane_emden_full", dir).runs[0].clone();
        let ok = r.j_stop == 4000
            && r.relative_param_error.unwrap_or(f64::NAN) <= 0.1
            && r.relative_misfit.unwrap_or(f64::NAN) <= 0.05;
        (
            ok,
            format!(
                "{} steps, reaction error x{:.4} <= 0.1, misfit x{:.4} <= 0.05",
                r.j_stop,
                r.relative_param_error.unwrap_or(f64::NAN),
                r.relative_misfit.unwrap_or(f64::NAN)
            ),
        )
    }));

    results.push(check(6, "zfk terminal-data reconstruction", 300, || {
        let r = run("zfk_terminal", dir).runs[0].clone();
        let log = read_log(&r.run_log);
        let decreasing = log.records.windows(2).all(|w| w[1].misfit < w[0].misfit);
        (
            decreasing && r.relative_param_error.unwrap_or(f64::NAN) <= 0.2,
            format!(
                "misfit strictly decreasing over {} steps: {decreasing}, reaction error x{:.4} <= 0.2",
                r.j_stop, r.relative_param_error.unwrap_or(f64::NAN)
            ),
        )
    }));

    results.push(check(7, "sequential acceleration", 120, || {
        let s = run("zfk_terminal_seq_vs_std", dir);
        let (std, seq) = (s.run(InversionMode::Standard).unwrap(), s.run(InversionMode::Sequential).unwrap());
        let log = read_log(&seq.run_log);
        let q = log.records.len() * 3 / 4;
        let ones = log.records[q..].iter().all(|r| r.kappa == 1);
        (
            seq.total_kappa < std.total_kappa && ones,
            format!(
                "sum kappa sequential {} < standard {}, sequential kappa = 1 in final quarter: {ones}",
                seq.total_kappa, std.total_kappa
            ),
        )
    }));

    results.push(check(8, "incremental trajectory", 120, || {
        let r = run("fisher_trajectory", dir).runs[0].clone();
        (
            r.relative_state_error.unwrap_or(f64::NAN) < 0.1,
            format!(
                "state error x{:.4} < 0.1 after {} steps of 10 lower iterations",
                r.relative_state_error.unwrap_or(f64::NAN),
                r.j_stop
            ),
        )
    }));

    results.push(check(9, "regularization under noise", 900, || {
        let sweep = run_sweep(&fisher_cfg, &[0.04, 0.02, 0.01], 3, 0).unwrap();
        let errs: Vec<String> = sweep.rows.iter().map(|r| format!("{:.4}", r.param_error)).collect();
        let votes = sweep.per_seed_nonincreasing.iter().filter(|&&b| b).count();
        (
            sweep.majority_nonincreasing,
            format!(
                "median error at stop for delta 0.04/0.02/0.01: {}; nonincreasing for {votes} of 3 seeds",
                errs.join("/")
            ),
        )
    }));

    results.push(check(10, "tangential cone", 120, || {
        let rep = tcc_ratio_with(
            &fisher.problem,
            &fisher.truth,
            0.1,
            20,
            1,
            fisher_cfg.inversion.sobolev,
            fisher_cfg.observation,
        )
        .unwrap();
        (rep.pass, format!("worst of 20 ratios {:.4} < 1", rep.worst))
    }));

    results.push(check(11, "determinism", 120, || {
        let first = dir.join("fisher_trajectory").join("run_log.csv");
        let again = config("fisher_trajectory", &dir.join("repeat"));
        run_experiment(&again).unwrap();
        let a = fs::read(&first).unwrap();
        let b = fs::read(again.output.join("run_log.csv")).unwrap();
        (
            !a.is_empty() && a == b,
            format!(
                "repeated fisher_trajectory run_log.csv identical: {}",
                a == b
            ),
        )
    }));

    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{} ({})", r.id, r.name))
        .collect();
    println!(
        "acceptance: {} of {} criteria pass",
        results.len() - failed.len(),
        results.len()
    );
    assert!(failed.is_empty(), "failing criteria: {}", failed.join(", "));
}
