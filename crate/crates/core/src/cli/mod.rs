//! Command-line front end: `solve`, `sweep`, `certify`, `phi` and
//! `check-grad`.
//!
//! Exit codes: 0 on success, 1 for invalid input or configuration, 2 for
//! numerical failures (including a failed gradient check).

pub mod config;
pub mod output;
pub mod plot;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::Serialize;

use crate::apps::kantorovich::KantorovichProgram;
use crate::apps::quadratic::QuadraticProgram;
use crate::apps::regression::RegressionProgram;
use crate::apps::semilinear::SemilinearProgram;
use crate::error::{Error, Result};
use crate::kkt::{kkt_report, KktReport};
use crate::lab::feasibility::{certify_epsilon_feasibility, FeasibilityCertificate};
use crate::lab::phi::{estimate_error_measure, PhiEstimate};
use crate::lab::solve::{solve_saa_oracle, Method};
use crate::lab::sweep::{cell_seed, median_by_n, reference_solution, run_consistency_sweep, SweepConfig, SweepRecord};
use crate::penalty::{assemble_penalized, recover_multipliers, solve_penalty_path_on, StageRecord};
use crate::program::{draw_scenarios, saa_objective, scenario_rng, sub_seed, ScenarioSet, StochasticProgram};
use crate::prox::check_gradient;

use config::{CheckGradConfig, Format, KantorovichSection, ProblemId, RunConfig};
use plot::{write_chart, Chart, Series};

#[derive(Parser, Debug)]
#[command(name = "saa-conic", version, about = "SAA experiments for stochastic programs with conic constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one SAA instance at the last N of N_list with the first seed.
    Solve(CommonArgs),
    /// Run the N × seed sweep and write sweep.csv, a summary and plots.
    Sweep(CommonArgs),
    /// Certify ε-feasibility at the covering-number sample size.
    Certify(CommonArgs),
    /// Estimate the error measure Φ at configured levels.
    Phi(CommonArgs),
    /// Compare analytic gradients with central differences.
    CheckGrad(CommonArgs),
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: config out_dir, then $SAA_OUT_DIR, then ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// regression, kantorovich, semilinear or scalar.
    #[arg(long)]
    problem: Option<String>,
    /// saa-oracle or my-path.
    #[arg(long)]
    method: Option<String>,
    /// Replaces the seed list by a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// c in γ_N = c N^p.
    #[arg(long = "gamma-c")]
    gamma_c: Option<f64>,
    /// p in γ_N = c N^p.
    #[arg(long = "gamma-exp")]
    gamma_exp: Option<f64>,
    /// Number of halving continuation stages.
    #[arg(long = "gamma-stages")]
    gamma_stages: Option<usize>,
    /// Skip SVG output.
    #[arg(long = "no-plots")]
    no_plots: bool,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    let (args, kind) = match command {
        Command::Solve(a) => (a, "solve"),
        Command::Sweep(a) => (a, "sweep"),
        Command::Certify(a) => (a, "certify"),
        Command::Phi(a) => (a, "phi"),
        Command::CheckGrad(a) => (a, "check-grad"),
    };
    let cfg = load(&args)?;
    let dir = cfg.resolved_out_dir();
    match kind {
        "solve" => with_program(&cfg, SolveJob { cfg: &cfg, dir: &dir }),
        "sweep" => with_program(&cfg, SweepJob { cfg: &cfg, dir: &dir }),
        "certify" => with_program(&cfg, CertifyJob { cfg: &cfg, dir: &dir }),
        "phi" => with_program(&cfg, PhiJob { cfg: &cfg, dir: &dir }),
        _ => with_program(&cfg, CheckGradJob { cfg: &cfg.check_grad, seed: cfg.seeds[0] }),
    }
}

fn load(args: &CommonArgs) -> Result<RunConfig> {
    let mut errs = Vec::new();
    let mut cfg = match &args.config {
        Some(p) => match RunConfig::from_file(p) {
            Ok(c) => c,
            Err(Error::Config(m)) => {
                errs.extend(m);
                RunConfig::default()
            }
            Err(e) => return Err(e),
        },
        None => RunConfig::default(),
    };
    let parsed_ok = errs.is_empty();
    if let Some(p) = &args.problem {
        match p.parse() {
            Ok(p) => cfg.problem = Some(p),
            Err(e) => errs.push(format!("--problem: {e}")),
        }
    }
    if let Some(m) = &args.method {
        match m.parse() {
            Ok(m) => cfg.method = m,
            Err(e) => errs.push(format!("--method: {e}")),
        }
    }
    if let Some(s) = args.seed {
        cfg.seeds = vec![s];
        cfg.certify.base_seed = s;
    }
    if let Some(c) = args.gamma_c {
        cfg.penalty.c_gamma = c;
    }
    if let Some(p) = args.gamma_exp {
        cfg.penalty.exponent = p;
    }
    match args.gamma_stages {
        Some(0) => errs.push("--gamma-stages: must be ≥ 1".into()),
        Some(k) => cfg.penalty.stage_fractions = crate::penalty::PenaltyPathConfig::halving_fractions(k),
        None => {}
    }
    if let Some(o) = &args.out {
        cfg.out_dir = Some(o.clone());
    }
    if args.no_plots {
        cfg.plots = false;
    }
    if parsed_ok {
        if let Err(Error::Config(m)) = cfg.validate() {
            errs.extend(m);
        }
    }
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errs))
    }
}

/// A command body generic over the program type.
trait Job {
    fn run<P: StochasticProgram>(self, program: &P) -> Result<i32>;
}

fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    Error::invalid(format!("{} row {}: `{s}` is not a number", path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn build_kantorovich(k: &KantorovichSection) -> Result<KantorovichProgram> {
    let l = &k.line;
    match (&k.distances_csv, &k.cost_csv) {
        (None, None) => KantorovichProgram::from_config(l),
        (Some(d), None) => KantorovichProgram::new(read_matrix_csv(d)?, l.p1.clone(), l.p2.clone(), l.radius),
        (Some(d), Some(c)) => KantorovichProgram::with_cost(
            read_matrix_csv(d)?,
            read_matrix_csv(c)?,
            l.p1.clone(),
            l.p2.clone(),
            l.radius,
        ),
        (None, Some(_)) => Err(Error::invalid("kantorovich.cost_csv needs kantorovich.distances_csv")),
    }
}

fn with_program<J: Job>(cfg: &RunConfig, job: J) -> Result<i32> {
    match cfg.problem()? {
        ProblemId::Regression => job.run(&RegressionProgram::new(cfg.regression.clone())?),
        ProblemId::Kantorovich => job.run(&build_kantorovich(&cfg.kantorovich)?),
        ProblemId::Semilinear => job.run(&SemilinearProgram::new(cfg.semilinear.clone())?),
        ProblemId::Scalar => {
            let s = &cfg.scalar;
            job.run(&QuadraticProgram::scalar(s.target, s.bound, s.lower, s.upper, s.alpha)?)
        }
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[derive(Serialize)]
struct StageSummary {
    gamma: f64,
    tol: f64,
    objective: f64,
    prox_residual: f64,
    iterations: usize,
    converged: bool,
    mean_penalty: f64,
    max_violation: f64,
    wall_time_ms: f64,
}

#[derive(Serialize)]
struct SolveReport<'a> {
    problem_id: &'a str,
    method: Method,
    #[serde(rename = "N")]
    n: usize,
    seed: u64,
    gamma: Option<f64>,
    opt_value: f64,
    converged: bool,
    iterations: usize,
    u: Vec<f64>,
    kkt: KktReport,
    stages: Vec<StageSummary>,
    wall_time_ms: f64,
}

fn path_chart(stages: &[StageRecord]) -> Chart {
    Chart {
        title: "Constraint violation along the penalty path".into(),
        x_label: "γ".into(),
        y_label: "violation".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series { label: "max dist(G, K)".into(), points: stages.iter().map(|s| (s.gamma, s.max_violation)).collect() },
            Series { label: "mean β(G)".into(), points: stages.iter().map(|s| (s.gamma, s.mean_penalty)).collect() },
        ],
    }
}

struct SolveJob<'a> {
    cfg: &'a RunConfig,
    dir: &'a Path,
}

impl Job for SolveJob<'_> {
    fn run<P: StochasticProgram>(self, program: &P) -> Result<i32> {
        let cfg = self.cfg;
        let start = Instant::now();
        let n = *cfg.n_list.last().expect("validated");
        let seed = cfg.seeds[0];
        let set = draw_scenarios(program, n, cell_seed(seed, n))?;
        let (u, mu, gamma, converged, iterations, stages) = match cfg.method {
            Method::MyPath => {
                let gammas = cfg.gamma_ladder.clone().unwrap_or_else(|| cfg.penalty.stages(n));
                let u0 = program.regularizer().project(&vec![0.0; program.dim()])?;
                let path = solve_penalty_path_on(program, &set, &gammas, &u0, cfg.penalty.tol_per_stage, &cfg.solver)?;
                let u = path.final_result().u_star.clone();
                let mu = recover_multipliers(program, &set, &u, path.gamma_final)?;
                let it = path.stages.iter().map(|s| s.result.iterations).sum();
                (u, mu, Some(path.gamma_final), path.converged, it, path.stages)
            }
            Method::SaaOracle => {
                let sol = solve_saa_oracle(program, &set, &cfg.oracle)?;
                (sol.u, sol.multipliers, sol.gamma, sol.converged, sol.iterations, Vec::new())
            }
        };
        let kkt = kkt_report(program, &set, &u, &mu, gamma)?;
        let (f, _) = saa_objective(program, &set, &u)?;
        let opt_value = f + program.regularizer().value(&u);
        let dir = output::prepare_dir(self.dir)?;
        let mut files = Vec::new();
        if !stages.is_empty() {
            let p = dir.join("path.csv");
            output::write_path_csv(&p, &stages)?;
            files.push(p);
            if cfg.plots {
                files.push(write_chart(&path_chart(&stages), &dir, "violation_vs_gamma.svg")?);
            }
        }
        let report = SolveReport {
            problem_id: program.name(),
            method: cfg.method,
            n,
            seed,
            gamma,
            opt_value,
            converged,
            iterations,
            u,
            kkt,
            stages: stages
                .iter()
                .map(|s| StageSummary {
                    gamma: s.gamma,
                    tol: s.tol,
                    objective: s.result.objective,
                    prox_residual: s.result.prox_residual,
                    iterations: s.result.iterations,
                    converged: s.result.converged,
                    mean_penalty: s.mean_penalty,
                    max_violation: s.max_violation,
                    wall_time_ms: s.result.wall_time_ms,
                })
                .collect(),
            wall_time_ms: ms_since(start),
        };
        let p = dir.join("solve.json");
        output::write_json(&p, &report)?;
        files.push(p);
        println!(
            "{} N={} method={} opt_value={} stationarity={:.3e} converged={}",
            program.name(),
            n,
            cfg.method.as_str(),
            output::num(opt_value),
            report.kkt.stationarity,
            converged
        );
        print_files(&files);
        Ok(0)
    }
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

#[derive(Serialize)]
struct NSummary {
    #[serde(rename = "N")]
    n: usize,
    cells: usize,
    failed_cells: usize,
    median_gamma: Option<f64>,
    median_opt_value: f64,
    median_abs_value_error: Option<f64>,
    median_dist_to_reference: Option<f64>,
    median_multiplier_norm: f64,
    max_multiplier_norm: f64,
    median_complementarity: f64,
    median_primal_feasibility: f64,
}

#[derive(Serialize)]
pub struct SweepSummaryRef {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub value: f64,
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    problem_id: &'a str,
    method: Method,
    reference: Option<SweepSummaryRef>,
    per_n: Vec<NSummary>,
}

#[derive(Serialize)]
struct SweepJson<'a> {
    records: &'a [SweepRecord],
}

fn kkt_stat(records: &[SweepRecord], f: fn(&KktReport) -> f64) -> Vec<(usize, f64)> {
    median_by_n(records, |r| r.kkt.as_ref().map(f))
}

fn summarize(records: &[SweepRecord], reference: Option<f64>) -> Vec<NSummary> {
    let opt = median_by_n(records, |r| Some(r.opt_value));
    let err = median_by_n(records, |r| reference.map(|v| (r.opt_value - v).abs()));
    let dist = median_by_n(records, |r| r.dist_to_reference);
    let gamma = median_by_n(records, |r| r.gamma);
    let mult = kkt_stat(records, |k| k.multiplier_norm);
    let comp = kkt_stat(records, |k| k.complementarity);
    let feas = kkt_stat(records, |k| k.primal_feasibility);
    let finite = |x: f64| if x.is_finite() { Some(x) } else { None };
    opt.iter()
        .enumerate()
        .map(|(i, &(n, v))| {
            let cells: Vec<&SweepRecord> = records.iter().filter(|r| r.n == n).collect();
            NSummary {
                n,
                cells: cells.len(),
                failed_cells: cells.iter().filter(|r| r.error.is_some()).count(),
                median_gamma: finite(gamma[i].1),
                median_opt_value: v,
                median_abs_value_error: finite(err[i].1),
                median_dist_to_reference: finite(dist[i].1),
                median_multiplier_norm: mult[i].1,
                max_multiplier_norm: cells
                    .iter()
                    .filter_map(|r| r.kkt.as_ref().map(|k| k.multiplier_norm))
                    .fold(f64::NEG_INFINITY, f64::max),
                median_complementarity: comp[i].1,
                median_primal_feasibility: feas[i].1,
            }
        })
        .collect()
}

fn sweep_charts(per_n: &[NSummary], reference: Option<f64>) -> Vec<(Chart, &'static str)> {
    let ns = |f: &dyn Fn(&NSummary) -> f64| -> Vec<(f64, f64)> { per_n.iter().map(|s| (s.n as f64, f(s))).collect() };
    let mut opt_series = vec![Series { label: "median opt value".into(), points: ns(&|s| s.median_opt_value) }];
    if let (Some(v), Some(first), Some(last)) = (reference, per_n.first(), per_n.last()) {
        opt_series.push(Series { label: "reference".into(), points: vec![(first.n as f64, v), (last.n as f64, v)] });
    }
    let mut charts = vec![
        (
            Chart {
                title: "SAA optimal value".into(),
                x_label: "N".into(),
                y_label: "F̂ + ψ".into(),
                log_x: true,
                log_y: false,
                series: opt_series,
            },
            "opt_value_vs_N.svg",
        ),
        (
            Chart {
                title: "Aggregated multiplier norm".into(),
                x_label: "N".into(),
                y_label: "(1/N) Σ ‖μᵢ‖".into(),
                log_x: true,
                log_y: false,
                series: vec![
                    Series { label: "median".into(), points: ns(&|s| s.median_multiplier_norm) },
                    Series { label: "max".into(), points: ns(&|s| s.max_multiplier_norm) },
                ],
            },
            "multiplier_norm_vs_N.svg",
        ),
    ];
    let viol: Vec<(f64, f64)> = per_n
        .iter()
        .filter_map(|s| s.median_gamma.map(|g| (g, s.median_primal_feasibility)))
        .collect();
    if !viol.is_empty() {
        charts.push((
            Chart {
                title: "In-sample constraint violation".into(),
                x_label: "γ_N".into(),
                y_label: "max dist(G, K)".into(),
                log_x: true,
                log_y: true,
                series: vec![Series { label: "median over seeds".into(), points: viol }],
            },
            "violation_vs_gamma.svg",
        ));
    }
    charts
}

struct SweepJob<'a> {
    cfg: &'a RunConfig,
    dir: &'a Path,
}

impl Job for SweepJob<'_> {
    fn run<P: StochasticProgram>(self, program: &P) -> Result<i32> {
        let cfg = self.cfg;
        let reference = if cfg.sweep.reference_n > 0 {
            Some(reference_solution(program, cfg.sweep.reference_n, cfg.sweep.reference_seed, &cfg.oracle)?)
        } else {
            None
        };
        let sweep_cfg = SweepConfig {
            n_list: cfg.n_list.clone(),
            seeds: cfg.seeds.clone(),
            method: cfg.method,
            penalty: cfg.penalty.clone(),
            oracle: cfg.oracle.clone(),
            solver: cfg.solver.clone(),
            validation_samples: cfg.sweep.validation_samples,
        };
        let records = run_consistency_sweep(program, &sweep_cfg, reference.as_ref().map(|r| r.u.as_slice()))?;
        let ref_value = reference.as_ref().map(|r| r.value);
        let per_n = summarize(&records, ref_value);
        let dir = output::prepare_dir(self.dir)?;
        let mut files = Vec::new();
        let table = match cfg.format {
            Format::Csv => {
                let p = dir.join("sweep.csv");
                output::write_sweep_csv(&p, &records)?;
                p
            }
            Format::Json => {
                let p = dir.join("sweep.json");
                output::write_json(&p, &SweepJson { records: &records })?;
                p
            }
        };
        files.push(table);
        if cfg.plots {
            for (chart, name) in sweep_charts(&per_n, ref_value) {
                files.push(write_chart(&chart, &dir, name)?);
            }
        }
        println!("{:>6} {:>14} {:>14} {:>14} {:>14}", "N", "median value", "|err|", "mult norm", "compl");
        for s in &per_n {
            println!(
                "{:>6} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
                s.n,
                s.median_opt_value,
                s.median_abs_value_error.unwrap_or(f64::NAN),
                s.median_multiplier_norm,
                s.median_complementarity
            );
        }
        let summary = SweepSummary {
            problem_id: program.name(),
            method: cfg.method,
            reference: reference.map(|r| SweepSummaryRef { n: r.n, seed: cfg.sweep.reference_seed, value: r.value }),
            per_n,
        };
        let p = dir.join("sweep_summary.json");
        output::write_json(&p, &summary)?;
        files.push(p);
        let failed = records.iter().filter(|r| r.error.is_some()).count();
        if failed > 0 {
            eprintln!("warning: {failed} of {} cells failed; see the error column", records.len());
        }
        print_files(&files);
        Ok(0)
    }
}

struct CertifyJob<'a> {
    cfg: &'a RunConfig,
    dir: &'a Path,
}

impl Job for CertifyJob<'_> {
    fn run<P: StochasticProgram>(self, program: &P) -> Result<i32> {
        let mut c = self.cfg.certify.clone();
        c.oracle = self.cfg.oracle.clone();
        let cert: FeasibilityCertificate = certify_epsilon_feasibility(program, &c)?;
        let dir = output::prepare_dir(self.dir)?;
        let p = dir.join("certificate.json");
        output::write_json(&p, &cert)?;
        println!(
            "{} Q={} required_N={} used_N={} empirical_rate={:.4} threshold={:.4} {}{}",
            cert.problem_id,
            cert.covering_number,
            cert.required_n,
            cert.n_used,
            cert.empirical_rate,
            cert.threshold,
            if cert.passed { "PASSED" } else { "NOT PASSED" },
            if cert.heuristic { " (heuristic Lipschitz constant)" } else { "" }
        );
        print_files(&[p]);
        Ok(0)
    }
}

#[derive(Serialize)]
struct PhiJson<'a> {
    problem_id: &'a str,
    reference_value: Option<f64>,
    estimates: Vec<PhiRow>,
}

#[derive(Serialize)]
struct PhiRow {
    s: f64,
    phi: f64,
    objective_gap: f64,
    mean_penalty: f64,
    converged: bool,
}

struct PhiJob<'a> {
    cfg: &'a RunConfig,
    dir: &'a Path,
}

impl Job for PhiJob<'_> {
    fn run<P: StochasticProgram>(self, program: &P) -> Result<i32> {
        let cfg = self.cfg;
        let (levels, reference_value) = if cfg.phi.levels.is_empty() {
            let r = reference_solution(program, cfg.sweep.reference_n.max(1), cfg.sweep.reference_seed, &cfg.oracle)?;
            (cfg.phi.offsets.iter().map(|o| r.value + o).collect(), Some(r.value))
        } else {
            (cfg.phi.levels.clone(), None)
        };
        let estimates: Vec<PhiEstimate> = levels
            .iter()
            .map(|&s| estimate_error_measure(program, s, &cfg.phi.config))
            .collect::<Result<_>>()?;
        let dir = output::prepare_dir(self.dir)?;
        let p = match cfg.format {
            Format::Csv => {
                let p = dir.join("phi.csv");
                output::write_phi_csv(&p, program.name(), &estimates)?;
                p
            }
            Format::Json => {
                let p = dir.join("phi.json");
                let rows = estimates
                    .iter()
                    .map(|e| PhiRow {
                        s: e.s,
                        phi: e.phi,
                        objective_gap: e.objective_gap,
                        mean_penalty: e.mean_penalty,
                        converged: e.converged,
                    })
                    .collect();
                output::write_json(&p, &PhiJson { problem_id: program.name(), reference_value, estimates: rows })?;
                p
            }
        };
        for e in &estimates {
            println!("s={} Φ={}", output::num(e.s), output::num(e.phi));
        }
        print_files(&[p]);
        Ok(0)
    }
}

struct CheckGradJob<'a> {
    cfg: &'a CheckGradConfig,
    seed: u64,
}

/// Largest relative gradient error of `J(·,ξ)` and `J(·,ξ) + γ β(G(·,ξ))`
/// over random `(u, ξ)` with `u ∈ dom ψ`.
pub fn max_gradient_error<P: StochasticProgram>(
    program: &P,
    points: usize,
    seed: u64,
    gamma: f64,
    step: f64,
) -> Result<Vec<(f64, f64)>> {
    let n = program.dim();
    (0..points as u64)
        .map(|k| {
            let mut rng = scenario_rng(sub_seed(sub_seed(seed, 0), k));
            let cube: Vec<f64> = (0..=n).map(|_| rng.random()).collect();
            let u = program.regularizer().from_unit_cube(n, &cube)?;
            let xi = program.sample(sub_seed(sub_seed(seed, 1), k));
            let set = ScenarioSet::from_scenarios(vec![xi], k)?;
            let e_obj = check_gradient(|v: &[f64]| saa_objective(program, &set, v), &u, step)?;
            let e_pen = check_gradient(assemble_penalized(program, &set, gamma)?, &u, step)?;
            Ok((e_obj, e_pen))
        })
        .collect()
}

impl Job for CheckGradJob<'_> {
    fn run<P: StochasticProgram>(self, program: &P) -> Result<i32> {
        let c = self.cfg;
        let errs = max_gradient_error(program, c.points, self.seed, c.gamma, c.step)?;
        let mut worst: f64 = 0.0;
        for (k, (a, b)) in errs.iter().enumerate() {
            println!("point {k:>3}: objective {a:.3e}  penalized {b:.3e}");
            worst = worst.max(*a).max(*b);
        }
        let ok = worst <= c.tol;
        println!(
            "{}: max relative error {worst:.3e} (tolerance {:.1e}) {}",
            program.name(),
            c.tol,
            if ok { "ok" } else { "FAILED" }
        );
        Ok(if ok { 0 } else { 2 })
    }
}
