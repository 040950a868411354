//! Acceptance checks. Run with `cargo test --test acceptance`; prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use saa_conic::apps::kantorovich::{w1_on_line, KantorovichProgram};
use saa_conic::apps::quadratic::{Atom, QuadraticProgram};
use saa_conic::apps::regression::{RegressionConfig, RegressionProgram};
use saa_conic::apps::semilinear::{Coefficients, SemilinearConfig, SemilinearProgram};
use saa_conic::cli::max_gradient_error;
use saa_conic::cones::Cone;
use saa_conic::kkt::kkt_report;
use saa_conic::lab::feasibility::{certify_epsilon_feasibility, sample_size_for_feasibility, CertifyConfig};
use saa_conic::lab::phi::{estimate_error_measure, PhiConfig};
use saa_conic::lab::solve::{Method, OracleConfig};
use saa_conic::lab::sweep::{median_by_n, reference_solution, run_consistency_sweep, SweepConfig, SweepRecord};
use saa_conic::linalg::fit_slope;
use saa_conic::penalty::{solve_penalty_path_on, PenaltyPathConfig};
use saa_conic::program::{saa_objective, scenario_rng, ScenarioSet, StochasticProgram};
use saa_conic::prox::{check_gradient, SolverOptions};
use saa_conic::regularizer::Regularizer;

type Check = std::result::Result<String, String>;

struct Harness {
    failures: usize,
}

impl Harness {
    fn run(&mut self, id: usize, name: &str, budget_s: f64, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok(d) if secs <= budget_s => (true, d),
            Ok(d) => (false, format!("{d}; runtime over budget")),
            Err(d) => (false, d),
        };
        if !ok {
            self.failures += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {detail} ({secs:.1} s, budget {budget_s} s)",
            if ok { "PASS" } else { "FAIL" }
        );
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

// 1

fn random_cone(kind: usize, rng: &mut impl Rng) -> Cone {
    let d = rng.random_range(1..=6);
    match kind {
        0 => Cone::Nonnegative(d),
        1 => Cone::Nonpositive(d),
        2 => Cone::Zero(d),
        3 => Cone::Free(d),
        _ => {
            let blocks = rng.random_range(2..=4);
            let children = (0..blocks).map(|_| random_cone(rng.random_range(0..4), rng)).collect();
            Cone::product(children).expect("nonempty product")
        }
    }
}

fn cone_suite() -> Check {
    let mut rng = scenario_rng(11);
    let mut worst_fd: f64 = 0.0;
    let names = ["nonnegative", "nonpositive", "zero", "free", "product"];
    for (kind, name) in names.iter().enumerate() {
        for trial in 0..1000 {
            let cone = random_cone(kind, &mut rng);
            let r: Vec<f64> = (0..cone.dim())
                .map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let p = cone.project(&r).map_err(e)?;
            let q = cone.project_polar(&r).map_err(e)?;
            let pp = cone.project(&p).map_err(e)?;
            ensure(pp == p, || format!("{name} #{trial}: projection not idempotent"))?;
            let split: f64 = r.iter().zip(&p).zip(&q).map(|((a, b), c)| (a - b - c).abs()).fold(0.0, f64::max);
            let orth: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
            ensure(split <= 1e-12 && orth.abs() <= 1e-12, || {
                format!("{name} #{trial}: Moreau decomposition off by {split:e}, ⟨Πr, Π°r⟩ = {orth:e}")
            })?;
            let beta = cone.penalty_beta(&r).map_err(e)?;
            let inside = cone.contains(&r).map_err(e)?;
            ensure((beta == 0.0) == inside, || format!("{name} #{trial}: β = {beta:e} but r ∈ K is {inside}"))?;
            ensure(cone.penalty_beta(&p).map_err(e)? == 0.0 && cone.contains(&p).map_err(e)?, || {
                format!("{name} #{trial}: projected point has positive penalty")
            })?;
            let fd = check_gradient(
                |x: &[f64]| Ok((cone.penalty_beta(x)?, cone.penalty_beta_grad(x)?)),
                &r,
                1e-6,
            )
            .map_err(e)?;
            worst_fd = worst_fd.max(fd);
            ensure(fd <= 1e-6, || format!("{name} #{trial}: Dβ finite-difference error {fd:e}"))?;
        }
    }
    Ok(format!("5 kinds × 1000 inputs, max Dβ FD rel. error {worst_fd:.2e} ≤ 1e-6"))
}

// 2

fn gradients() -> Check {
    let reg = RegressionProgram::new(RegressionConfig::default()).map_err(e)?;
    let kan = KantorovichProgram::from_config(&Default::default()).map_err(e)?;
    let pde = SemilinearProgram::new(SemilinearConfig::default()).map_err(e)?;
    let worst = |errs: Vec<(f64, f64)>| errs.iter().fold(0.0_f64, |m, (a, b)| m.max(*a).max(*b));
    let r = worst(max_gradient_error(&reg, 20, 1, 10.0, 1e-6).map_err(e)?);
    let k = worst(max_gradient_error(&kan, 20, 2, 10.0, 1e-6).map_err(e)?);
    let s = worst(max_gradient_error(&pde, 20, 3, 10.0, 1e-6).map_err(e)?);
    let m = r.max(k).max(s);
    ensure(m <= 1e-4, || format!("max rel. error {m:.2e} > 1e-4 (regression {r:.1e}, kantorovich {k:.1e}, semilinear {s:.1e})"))?;
    Ok(format!(
        "20 points each, rel. errors regression {r:.1e}, kantorovich {k:.1e}, semilinear {s:.1e} ≤ 1e-4"
    ))
}

// 3

fn random_weights(m: usize, d: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut counts = vec![1usize; m];
    for _ in m..d {
        counts[rng.random_range(0..m)] += 1;
    }
    counts.iter().map(|&c| c as f64 / d as f64).collect()
}

fn kantorovich_exactness() -> Check {
    let mut rng = scenario_rng(23);
    let (mut worst_w1, mut worst_stat, mut worst_comp): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let d = 12;
    for inst in 0..10 {
        let m = rng.random_range(2..=6);
        let mut pos: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        pos.sort_by(f64::total_cmp);
        let p1 = random_weights(m, d, &mut rng);
        let p2 = random_weights(m, d, &mut rng);
        let prog = KantorovichProgram::on_line(pos.clone(), p1.clone(), p2.clone(), 2.0).map_err(e)?;
        let pairs = prog.product_design(d).map_err(e)?;
        let exact = prog.exact_saa(&pairs).expect("Kantorovich has an exact oracle").map_err(e)?;
        let set = ScenarioSet::from_scenarios(pairs, inst).map_err(e)?;
        let (f, _) = saa_objective(&prog, &set, &exact.u).map_err(e)?;
        let w1 = w1_on_line(&pos, &p1, &p2);
        let err = ((2.0 * prog.radius() - f) - w1).abs();
        let rep = kkt_report(&prog, &set, &exact.u, &exact.multipliers, None).map_err(e)?;
        worst_w1 = worst_w1.max(err);
        worst_stat = worst_stat.max(rep.stationarity);
        worst_comp = worst_comp.max(rep.complementarity.abs());
    }
    ensure(worst_w1 <= 1e-6 && worst_stat <= 1e-8 && worst_comp <= 1e-8, || {
        format!("|W1 error| {worst_w1:.2e}, stationarity {worst_stat:.2e}, complementarity {worst_comp:.2e}")
    })?;
    Ok(format!(
        "10 instances, |W1 error| {worst_w1:.1e} ≤ 1e-6, stationarity {worst_stat:.1e} and complementarity {worst_comp:.1e} ≤ 1e-8"
    ))
}

// 4

fn penalty_path_law() -> Check {
    let p = QuadraticProgram::scalar(2.0, 1.0, -10.0, 10.0, 0.0).map_err(e)?;
    let set = ScenarioSet::from_scenarios(vec![p.sample(0)], 0).map_err(e)?;
    let gammas: Vec<f64> = (0..=6).map(|k| 10f64.powi(k)).collect();
    let opts = SolverOptions { tol: 1e-10, max_iter: 100_000, accelerate: true, ..Default::default() };
    let path = solve_penalty_path_on(&p, &set, &gammas, &[0.0], 1e-10, &opts).map_err(e)?;
    let mut worst: f64 = 0.0;
    for s in &path.stages {
        let exact = (2.0 + s.gamma) / (1.0 + s.gamma);
        worst = worst.max((s.result.u_star[0] - exact).abs());
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = path
        .stages
        .iter()
        .filter(|s| s.gamma >= 10.0)
        .map(|s| (s.gamma.ln(), s.max_violation.ln()))
        .unzip();
    let slope = fit_slope(&xs, &ys);
    ensure(worst <= 1e-6 && (slope + 1.0).abs() <= 0.1, || format!("path error {worst:.2e}, slope {slope:.3}"))?;
    Ok(format!("γ = 1…1e6, max |u − (2+γ)/(1+γ)| = {worst:.1e} ≤ 1e-6, violation slope {slope:.3} ∈ −1 ± 0.1"))
}

// 5 and 6

fn regression_sweep() -> Result<(Vec<SweepRecord>, f64), String> {
    let p = RegressionProgram::new(RegressionConfig::default()).map_err(e)?;
    let oracle = OracleConfig::default();
    let reference = reference_solution(&p, 8192, 0, &oracle).map_err(e)?;
    let cfg = SweepConfig {
        n_list: vec![8, 32, 128, 512],
        seeds: (0..10).collect(),
        method: Method::MyPath,
        penalty: PenaltyPathConfig { c_gamma: 1.0, exponent: 0.25, ..Default::default() },
        oracle,
        solver: SolverOptions { max_iter: 50_000, accelerate: true, ..Default::default() },
        validation_samples: 2000,
    };
    let records = run_consistency_sweep(&p, &cfg, Some(&reference.u)).map_err(e)?;
    if let Some(r) = records.iter().find(|r| r.error.is_some()) {
        return Err(format!("cell N={} seed={} failed: {}", r.n, r.seed, r.error.as_deref().unwrap_or("")));
    }
    Ok((records, reference.value))
}

fn strictly_decreasing(v: &[(usize, f64)]) -> bool {
    v.windows(2).all(|w| w[1].1 < w[0].1)
}

fn fmt_series(v: &[(usize, f64)]) -> String {
    v.iter().map(|(n, x)| format!("{n}:{x:.2e}")).collect::<Vec<_>>().join(" ")
}

fn consistency(sweep: &Result<(Vec<SweepRecord>, f64), String>) -> Check {
    let (records, reference) = sweep.as_ref().map_err(Clone::clone)?;
    let err = median_by_n(records, |r| Some((r.opt_value - reference).abs()));
    let first = err[0].1;
    let last = err[err.len() - 1].1;
    ensure(strictly_decreasing(&err) && last <= 0.2 * first, || {
        format!("median |value − ref| {}", fmt_series(&err))
    })?;
    Ok(format!(
        "median |value − ref| {} strictly decreasing, final/initial = {:.2} ≤ 0.2",
        fmt_series(&err),
        last / first
    ))
}

fn multipliers(sweep: &Result<(Vec<SweepRecord>, f64), String>) -> Check {
    let (records, _) = sweep.as_ref().map_err(Clone::clone)?;
    let norms: Vec<f64> = records.iter().filter_map(|r| r.kkt.as_ref().map(|k| k.multiplier_norm)).collect();
    let max = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let med = saa_conic::linalg::median(&norms);
    let comp = median_by_n(records, |r| r.kkt.as_ref().map(|k| k.complementarity.abs()));
    ensure(max <= 3.0 * med && strictly_decreasing(&comp), || {
        format!("max/median multiplier norm {:.2}, median complementarity {}", max / med, fmt_series(&comp))
    })?;
    Ok(format!(
        "max/median multiplier norm {:.2} ≤ 3, median complementarity {} decreasing",
        max / med,
        fmt_series(&comp)
    ))
}

// 7

fn phi_sanity() -> Check {
    let atoms = [1.0, 1.2, 1.4]
        .iter()
        .map(|&t| Atom { target: vec![t], bound: vec![1.0], prob: 1.0 / 3.0 })
        .collect();
    let p = QuadraticProgram::new(atoms, Regularizer::boxed(vec![-5.0], vec![5.0], 0.1).map_err(e)?).map_err(e)?;
    let (_, s_star) = p.true_solution().map_err(e)?;
    let cfg = PhiConfig::default();
    let at = estimate_error_measure(&p, s_star, &cfg).map_err(e)?;
    let off = estimate_error_measure(&p, s_star - 0.1, &cfg).map_err(e)?;
    ensure(at.phi <= 1e-3 && off.phi >= 0.05, || {
        format!("Φ(s*) = {:.2e}, Φ(s* − 0.1) = {:.3e}", at.phi, off.phi)
    })?;
    Ok(format!(
        "s* = {s_star:.6}, Φ(s*) = {:.1e} ≤ 1e-3, Φ(s* − 0.1) = {:.4} ≥ 0.05",
        at.phi, off.phi
    ))
}

// 8

fn feasibility() -> Check {
    let n = sample_size_for_feasibility(0.1, 0.05, 100).map_err(e)?;
    ensure(n == 77, || format!("sample_size_for_feasibility(0.1, 0.05, 100) = {n}, expected 77"))?;
    let p = RegressionProgram::new(RegressionConfig::default()).map_err(e)?;
    let cert = certify_epsilon_feasibility(&p, &CertifyConfig::default()).map_err(e)?;
    ensure(cert.passed && cert.trials == 50, || {
        format!("empirical rate {:.3} < threshold {:.3} over {} trials", cert.empirical_rate, cert.threshold, cert.trials)
    })?;
    Ok(format!(
        "sample size 77; regression N = {} over {} trials, empirical rate {:.3} ≥ {:.3}",
        cert.required_n, cert.trials, cert.empirical_rate, cert.threshold
    ))
}

// 9

fn pde_regularity() -> Check {
    let p = SemilinearProgram::new(SemilinearConfig::default()).map_err(e)?;
    let c = p.regularity_constant();
    let n = p.dim();
    let mut rng = scenario_rng(91);
    let mut tightest = f64::INFINITY;
    for k in 0..100u64 {
        let cube: Vec<f64> = (0..=n).map(|_| rng.random()).collect();
        let u = p.regularizer().from_unit_cube(n, &cube).map_err(e)?;
        let a: Coefficients = p.sample(2 * k);
        let b: Coefficients = p.sample(2 * k + 1);
        let ya = p.solve_state(&u, &a).map_err(e)?;
        let yb = p.solve_state(&u, &b).map_err(e)?;
        let diff: Vec<f64> = yb.iter().zip(&ya).map(|(x, y)| x - y).collect();
        let dk = p
            .kappa_midpoints(&a.0)
            .iter()
            .zip(p.kappa_midpoints(&b.0))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let lhs = c * p.h1_norm(&diff);
        let rhs = dk * p.grad_norm(&ya);
        ensure(lhs <= rhs * (1.0 + 1e-10), || format!("pair {k}: {lhs:e} > {rhs:e}"))?;
        if lhs > 0.0 {
            tightest = tightest.min(rhs / lhs);
        }
    }
    Ok(format!("100 pairs, c = {c:.4}, smallest rhs/lhs ratio {tightest:.2} ≥ 1"))
}

// 10

const REPRO_CONFIG: &str = r#"
N_list = [8, 32]
seeds = [0, 1, 2]

[sweep]
reference_n = 1024
validation_samples = 500

[certify]
trials = 20
validation_samples = 5000

[phi]
validation_samples = 16
offsets = [0.0, -0.1]
"#;

fn strip_timing_csv(text: &str) -> String {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let keep: Vec<bool> = header.iter().map(|h| *h != "wall_time_ms").collect();
    let filter = |line: &str| -> String {
        line.split(',').zip(&keep).filter(|(_, k)| **k).map(|(c, _)| c).collect::<Vec<_>>().join(",")
    };
    std::iter::once(filter(&header.join(",")))
        .chain(lines.map(filter))
        .collect::<Vec<_>>()
        .join("\n")
}

fn strip_timing_json(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove("wall_time_ms");
            m.values_mut().for_each(strip_timing_json);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_timing_json),
        _ => {}
    }
}

fn snapshot(dir: &Path) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for entry in walk(dir)? {
        let rel = entry.strip_prefix(dir).map_err(e)?.display().to_string();
        let text = std::fs::read_to_string(&entry).map_err(e)?;
        let body = match entry.extension().and_then(|x| x.to_str()) {
            Some("csv") => strip_timing_csv(&text),
            Some("json") => {
                let mut v: serde_json::Value = serde_json::from_str(&text).map_err(e)?;
                strip_timing_json(&mut v);
                v.to_string()
            }
            _ => text,
        };
        out.insert(rel, body);
    }
    Ok(out)
}

fn walk(dir: &Path) -> Result<Vec<std::path::PathBuf>, String> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(e)? {
        let path = entry.map_err(e)?.path();
        if path.is_dir() {
            files.extend(walk(&path)?);
        } else {
            files.push(path);
        }
    }
    Ok(files)
}

fn reproducibility() -> Check {
    let root = tempfile::tempdir().map_err(e)?;
    let cfg = root.path().join("repro.toml");
    std::fs::write(&cfg, REPRO_CONFIG).map_err(e)?;
    let jobs = [
        ("solve", "regression"),
        ("sweep", "regression"),
        ("certify", "regression"),
        ("solve", "scalar"),
        ("phi", "scalar"),
        ("sweep", "kantorovich"),
    ];
    let mut snaps = Vec::new();
    for run in ["a", "b"] {
        for (cmd, problem) in jobs {
            let out = root.path().join(run).join(format!("{cmd}-{problem}"));
            let args = [
                "saa-conic",
                cmd,
                "--config",
                cfg.to_str().unwrap(),
                "--problem",
                problem,
                "--out",
                out.to_str().unwrap(),
            ];
            let code = saa_conic::cli::run(args);
            ensure(code == 0, || format!("`{cmd} --problem {problem}` exited with {code}"))?;
        }
        snaps.push(snapshot(&root.path().join(run))?);
    }
    ensure(snaps[0].keys().eq(snaps[1].keys()), || "runs wrote different file sets".into())?;
    for (name, body) in &snaps[0] {
        ensure(&snaps[1][name] == body, || format!("{name} differs between runs"))?;
    }
    let raw_identical = snaps[0].keys().filter(|k| k.ends_with(".svg")).count();
    Ok(format!(
        "{} files identical modulo wall_time_ms ({raw_identical} SVGs byte-identical)",
        snaps[0].len()
    ))
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut h = Harness { failures: 0 };
    h.run(1, "cone and penalty suite", 5.0, cone_suite);
    h.run(2, "gradient correctness", 60.0, gradients);
    h.run(3, "Kantorovich exactness", 120.0, kantorovich_exactness);
    h.run(4, "penalty-path law", 30.0, penalty_path_law);
    let mut sweep = None;
    h.run(5, "consistency surrogate", 600.0, || {
        let s = regression_sweep();
        let r = consistency(&s);
        sweep = Some(s);
        r
    });
    let sweep = sweep.expect("criterion 5 ran");
    h.run(6, "multiplier boundedness (sweep shared with 5)", 600.0, || multipliers(&sweep));
    h.run(7, "Φ sanity", 120.0, phi_sanity);
    h.run(8, "sample-size formula and certification", 900.0, feasibility);
    h.run(9, "PDE regularity", 60.0, pde_regularity);
    h.run(10, "reproducibility", 600.0, reproducibility);
    if h.failures > 0 {
        println!("{} of 10 criteria failed", h.failures);
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
