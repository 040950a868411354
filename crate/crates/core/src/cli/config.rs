//! Run configuration read from a TOML file.
//!
//! Every key is optional except `problem`, which may also come from the
//! command line. The whole file is checked before anything runs and all
//! problems are reported together, each with its dotted key path.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::apps::kantorovich::KantorovichConfig;
use crate::apps::regression::RegressionConfig;
use crate::apps::semilinear::SemilinearConfig;
use crate::error::{Error, Result};
use crate::lab::feasibility::CertifyConfig;
use crate::lab::phi::PhiConfig;
use crate::lab::solve::{Method, OracleConfig};
use crate::penalty::PenaltyPathConfig;
use crate::prox::SolverOptions;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SAA_OUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemId {
    Regression,
    Kantorovich,
    Semilinear,
    /// One-dimensional `min ½(u − a)² s.t. u ≤ b` with a closed-form path.
    Scalar,
}

impl ProblemId {
    pub const ALL: [ProblemId; 4] = [
        ProblemId::Regression,
        ProblemId::Kantorovich,
        ProblemId::Semilinear,
        ProblemId::Scalar,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemId::Regression => "regression",
            ProblemId::Kantorovich => "kantorovich",
            ProblemId::Semilinear => "semilinear",
            ProblemId::Scalar => "scalar",
        }
    }
}

impl std::str::FromStr for ProblemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown problem `{s}` (expected regression, kantorovich, semilinear or scalar)"
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KantorovichSection {
    pub line: KantorovichConfig,
    /// Square distance matrix; replaces the positions on the line.
    pub distances_csv: Option<PathBuf>,
    /// Cost matrix; defaults to the distance.
    pub cost_csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarConfig {
    pub target: f64,
    pub bound: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
}

impl Default for ScalarConfig {
    fn default() -> Self {
        ScalarConfig { target: 2.0, bound: 1.0, lower: -10.0, upper: 10.0, alpha: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSection {
    pub validation_samples: usize,
    /// Scenario count of the reference run; 0 disables it.
    pub reference_n: usize,
    pub reference_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhiSection {
    pub config: PhiConfig,
    /// Absolute levels `s`. When empty, `offsets` are added to the
    /// reference value.
    pub levels: Vec<f64>,
    pub offsets: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckGradConfig {
    pub points: usize,
    pub step: f64,
    pub tol: f64,
    /// γ of the penalized objective whose gradient is checked too.
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: Option<ProblemId>,
    pub method: Method,
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    pub format: Format,
    pub plots: bool,
    pub penalty: PenaltyPathConfig,
    /// Explicit γ ladder for `solve`, replacing the schedule.
    pub gamma_ladder: Option<Vec<f64>>,
    pub solver: SolverOptions,
    pub oracle: OracleConfig,
    pub sweep: SweepSection,
    pub certify: CertifyConfig,
    pub phi: PhiSection,
    pub check_grad: CheckGradConfig,
    pub regression: RegressionConfig,
    pub kantorovich: KantorovichSection,
    pub semilinear: SemilinearConfig,
    pub scalar: ScalarConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: None,
            method: Method::MyPath,
            n_list: vec![8, 32, 128, 512],
            seeds: (0..10).collect(),
            out_dir: None,
            format: Format::Csv,
            plots: true,
            penalty: PenaltyPathConfig::default(),
            gamma_ladder: None,
            solver: SolverOptions { accelerate: true, max_iter: 50_000, ..Default::default() },
            oracle: OracleConfig::default(),
            sweep: SweepSection { validation_samples: 2000, reference_n: 8192, reference_seed: 0 },
            certify: CertifyConfig::default(),
            phi: PhiSection { config: PhiConfig::default(), levels: Vec::new(), offsets: vec![0.0, -0.1] },
            check_grad: CheckGradConfig { points: 20, step: 1e-6, tol: 1e-4, gamma: 10.0 },
            regression: RegressionConfig::default(),
            kantorovich: KantorovichSection {
                line: KantorovichConfig::default(),
                distances_csv: None,
                cost_csv: None,
            },
            semilinear: SemilinearConfig::default(),
            scalar: ScalarConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads and validates a config file. Relative paths inside it resolve
    /// against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(vec![format!("{}: cannot read config file: {e}", path.display())])
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(vec![format!("syntax error: {e}")]))?;
        let mut errs = Vec::new();
        let cfg = read_root(&table, base_dir, &mut errs);
        errs.extend(cfg.range_errors());
        if errs.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errs))
        }
    }

    /// All range and consistency errors, including a missing problem.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.problem.is_none() {
            errs.push("problem: missing required key (set it in the config or pass --problem)".to_string());
        }
        errs.extend(self.range_errors());
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn problem(&self) -> Result<ProblemId> {
        self.problem
            .ok_or_else(|| Error::Config(vec!["problem: missing required key".to_string()]))
    }

    /// Output directory from the config, then the environment, then `runs`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"))
    }

    fn range_errors(&self) -> Vec<String> {
        let mut e = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                e.push(msg);
            }
        };
        need(!self.n_list.is_empty(), "N_list: must not be empty".into());
        need(self.n_list.iter().all(|n| *n >= 1), "N_list: entries must be ≥ 1".into());
        need(
            self.n_list.windows(2).all(|w| w[1] > w[0]),
            format!("N_list: must be increasing, got {:?}", self.n_list),
        );
        need(!self.seeds.is_empty(), "seeds: must not be empty".into());
        let p = &self.penalty;
        need(p.c_gamma > 0.0 && p.c_gamma.is_finite(), format!("gamma.c: must be positive, got {}", p.c_gamma));
        need(
            p.exponent > 0.0 && p.exponent < 1.0,
            format!("gamma.exponent: must lie in (0, 1), got {}", p.exponent),
        );
        need(p.tol_per_stage > 0.0, "gamma.tol: must be positive".into());
        need(
            !p.stage_fractions.is_empty()
                && p.stage_fractions.iter().all(|f| *f > 0.0)
                && p.stage_fractions.windows(2).all(|w| w[1] > w[0])
                && p.stage_fractions.last() == Some(&1.0),
            format!("gamma.stages: must be increasing in (0, 1] and end at 1, got {:?}", p.stage_fractions),
        );
        if let Some(l) = &self.gamma_ladder {
            need(
                !l.is_empty() && l.iter().all(|g| *g > 0.0 && g.is_finite()) && l.windows(2).all(|w| w[1] > w[0]),
                "gamma.ladder: must be positive and strictly increasing".into(),
            );
        }
        need(self.solver.max_iter >= 1, "solver.max_iter: must be ≥ 1".into());
        if let Some(t) = self.solver.initial_step {
            need(t > 0.0 && t.is_finite(), "solver.initial_step: must be positive".into());
        }
        need(
            !self.oracle.gammas.is_empty() && self.oracle.gammas.windows(2).all(|w| w[1] > w[0]),
            "oracle.gammas: must be nonempty and increasing".into(),
        );
        need(self.oracle.tol > 0.0, "oracle.tol: must be positive".into());
        need(self.sweep.validation_samples >= 2, "sweep.validation_samples: must be ≥ 2".into());
        let c = &self.certify;
        need(c.epsilon > 0.0 && c.epsilon < 1.0, format!("certify.epsilon: must lie in (0, 1), got {}", c.epsilon));
        need(c.delta > 0.0 && c.delta < 1.0, format!("certify.delta: must lie in (0, 1), got {}", c.delta));
        need(c.rho > 0.0, "certify.rho: must be positive".into());
        need(c.trials >= 20, "certify.trials: must be ≥ 20".into());
        need(c.domain_samples >= 1, "certify.domain_samples: must be ≥ 1".into());
        need(c.validation_samples >= 2, "certify.validation_samples: must be ≥ 2".into());
        if let Some(l) = c.lipschitz {
            need(l > 0.0 && l.is_finite(), "certify.lipschitz: must be positive".into());
        }
        let phi = &self.phi;
        need(
            !phi.config.taus.is_empty() && phi.config.taus.iter().all(|t| *t > 0.0),
            "phi.taus: must be nonempty and positive".into(),
        );
        need(phi.config.validation_samples >= 1, "phi.validation_samples: must be ≥ 1".into());
        need(
            phi.levels.iter().chain(&phi.offsets).all(|s| s.is_finite()),
            "phi.levels/offsets: must be finite".into(),
        );
        need(!phi.levels.is_empty() || !phi.offsets.is_empty(), "phi: give levels or offsets".into());
        let g = &self.check_grad;
        need(g.points >= 1, "check_grad.points: must be ≥ 1".into());
        need(g.step > 0.0, "check_grad.step: must be positive".into());
        need(g.tol > 0.0, "check_grad.tol: must be positive".into());
        need(g.gamma > 0.0, "check_grad.gamma: must be positive".into());
        let r = &self.regression;
        need(r.grid >= 3, "regression.grid: must be ≥ 3".into());
        need(r.radius > 0.0, format!("regression.radius: must be positive, got {}", r.radius));
        need(r.noise_sd >= 0.0, "regression.noise_sd: must be ≥ 0".into());
        let k = &self.kantorovich.line;
        need(k.radius > 0.0, "kantorovich.radius: must be positive".into());
        if self.kantorovich.distances_csv.is_none() {
            need(k.positions.len() >= 2, "kantorovich.positions: need at least two atoms".into());
            need(
                k.p1.len() == k.positions.len() && k.p2.len() == k.positions.len(),
                "kantorovich.p1/p2: must have one weight per atom".into(),
            );
        }
        let s = &self.semilinear;
        need(s.nodes >= 3, "semilinear.nodes: must be ≥ 3".into());
        need(s.alpha > 0.0, "semilinear.alpha: must be positive".into());
        need(s.y_max > 0.0, "semilinear.y_max: must be positive".into());
        need(s.lower <= 0.0 && s.upper >= 0.0, "semilinear.lower/upper: box must contain 0".into());
        let q = &self.scalar;
        need(q.lower <= q.upper, "scalar.lower/upper: lower must not exceed upper".into());
        e
    }
}

fn check_keys(t: &Table, path: &str, allowed: &[&str], errs: &mut Vec<String>) {
    for key in t.keys() {
        if !allowed.contains(&key.as_str()) {
            errs.push(format!("{}: unknown key (allowed: {})", join(path, key), allowed.join(", ")));
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

/// Typed field access that records errors against the table's path.
struct Fields<'t, 'e> {
    table: &'t Table,
    path: String,
    errs: &'e mut Vec<String>,
}

impl<'t, 'e> Fields<'t, 'e> {
    fn mismatch(&mut self, key: &str, want: &str, v: &Value) {
        let msg = format!("{}: expected {want}, found {}", join(&self.path, key), type_name(v));
        self.errs.push(msg);
    }

    fn float(&mut self, key: &str, slot: &mut f64) {
        match self.table.get(key) {
            None => {}
            Some(Value::Float(x)) => *slot = *x,
            Some(Value::Integer(i)) => *slot = *i as f64,
            Some(v) => self.mismatch(key, "number", v),
        }
    }

    fn opt_float(&mut self, key: &str, slot: &mut Option<f64>) {
        if self.table.contains_key(key) {
            let mut x = 0.0;
            self.float(key, &mut x);
            *slot = Some(x);
        }
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        match self.table.get(key) {
            None => None,
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
            Some(v) => {
                self.mismatch(key, "nonnegative integer", v);
                None
            }
        }
    }

    fn usize(&mut self, key: &str, slot: &mut usize) {
        if let Some(x) = self.uint(key) {
            *slot = x as usize;
        }
    }

    fn u64(&mut self, key: &str, slot: &mut u64) {
        if let Some(x) = self.uint(key) {
            *slot = x;
        }
    }

    fn opt_usize(&mut self, key: &str, slot: &mut Option<usize>) {
        if let Some(x) = self.uint(key) {
            *slot = Some(x as usize);
        }
    }

    fn boolean(&mut self, key: &str, slot: &mut bool) {
        match self.table.get(key) {
            None => {}
            Some(Value::Boolean(b)) => *slot = *b,
            Some(v) => self.mismatch(key, "boolean", v),
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.table.get(key) {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(v) => {
                self.mismatch(key, "string", v);
                None
            }
        }
    }

    fn array(&mut self, key: &str) -> Option<&'t Vec<Value>> {
        match self.table.get(key) {
            None => None,
            Some(Value::Array(a)) => Some(a),
            Some(v) => {
                self.mismatch(key, "array", v);
                None
            }
        }
    }

    fn floats(&mut self, key: &str) -> Option<Vec<f64>> {
        let arr = self.array(key)?;
        let mut out = Vec::with_capacity(arr.len());
        for (i, v) in arr.iter().enumerate() {
            match v {
                Value::Float(x) => out.push(*x),
                Value::Integer(x) => out.push(*x as f64),
                other => {
                    let msg = format!("{}[{i}]: expected number, found {}", join(&self.path, key), type_name(other));
                    self.errs.push(msg);
                    return None;
                }
            }
        }
        Some(out)
    }

    fn float_list(&mut self, key: &str, slot: &mut Vec<f64>) {
        if let Some(v) = self.floats(key) {
            *slot = v;
        }
    }

    fn uints(&mut self, key: &str) -> Option<Vec<u64>> {
        let arr = self.array(key)?;
        let mut out = Vec::with_capacity(arr.len());
        for (i, v) in arr.iter().enumerate() {
            match v {
                Value::Integer(x) if *x >= 0 => out.push(*x as u64),
                other => {
                    let msg = format!(
                        "{}[{i}]: expected nonnegative integer, found {}",
                        join(&self.path, key),
                        type_name(other)
                    );
                    self.errs.push(msg);
                    return None;
                }
            }
        }
        Some(out)
    }

    fn sub(&mut self, key: &str, allowed: &[&str]) -> Option<&'t Table> {
        match self.table.get(key) {
            None => None,
            Some(Value::Table(t)) => {
                check_keys(t, key, allowed, self.errs);
                Some(t)
            }
            Some(v) => {
                self.mismatch(key, "table", v);
                None
            }
        }
    }
}

fn fields<'t, 'e>(table: &'t Table, path: &str, errs: &'e mut Vec<String>) -> Fields<'t, 'e> {
    Fields { table, path: path.to_string(), errs }
}

const ROOT_KEYS: &[&str] = &[
    "problem", "method", "N_list", "seeds", "out_dir", "format", "plots", "gamma", "solver", "oracle",
    "sweep", "certify", "phi", "check_grad", "regression", "kantorovich", "semilinear", "scalar",
];

fn read_root(t: &Table, base: &Path, errs: &mut Vec<String>) -> RunConfig {
    let mut cfg = RunConfig::default();
    check_keys(t, "", ROOT_KEYS, errs);
    let mut f = fields(t, "", errs);
    if let Some(s) = f.string("problem") {
        match s.parse() {
            Ok(p) => cfg.problem = Some(p),
            Err(e) => f.errs.push(format!("problem: {e}")),
        }
    }
    if let Some(s) = f.string("method") {
        match s.parse() {
            Ok(m) => cfg.method = m,
            Err(e) => f.errs.push(format!("method: {e}")),
        }
    }
    if let Some(ns) = f.uints("N_list") {
        cfg.n_list = ns.into_iter().map(|n| n as usize).collect();
    }
    if let Some(s) = f.uints("seeds") {
        cfg.seeds = s;
    }
    if let Some(s) = f.string("out_dir") {
        cfg.out_dir = Some(base.join(s));
    }
    if let Some(s) = f.string("format") {
        match s.as_str() {
            "csv" => cfg.format = Format::Csv,
            "json" => cfg.format = Format::Json,
            _ => f.errs.push(format!("format: expected \"csv\" or \"json\", got \"{s}\"")),
        }
    }
    f.boolean("plots", &mut cfg.plots);

    if let Some(g) = f.sub("gamma", &["c", "exponent", "stages", "stage_count", "tol", "ladder"]) {
        let mut s = fields(g, "gamma", f.errs);
        s.float("c", &mut cfg.penalty.c_gamma);
        s.float("exponent", &mut cfg.penalty.exponent);
        s.float_list("stages", &mut cfg.penalty.stage_fractions);
        if let Some(k) = s.uint("stage_count") {
            if g.contains_key("stages") {
                s.errs.push("gamma.stage_count: conflicts with gamma.stages".into());
            } else if k == 0 {
                s.errs.push("gamma.stage_count: must be ≥ 1".into());
            } else {
                cfg.penalty.stage_fractions = PenaltyPathConfig::halving_fractions(k as usize);
            }
        }
        s.float("tol", &mut cfg.penalty.tol_per_stage);
        if let Some(l) = s.floats("ladder") {
            cfg.gamma_ladder = Some(l);
        }
    }
    if let Some(g) = f.sub("solver", &["max_iter", "accelerate", "initial_step"]) {
        let mut s = fields(g, "solver", f.errs);
        s.usize("max_iter", &mut cfg.solver.max_iter);
        s.boolean("accelerate", &mut cfg.solver.accelerate);
        s.opt_float("initial_step", &mut cfg.solver.initial_step);
    }
    if let Some(g) = f.sub("oracle", &["gammas", "tol", "max_iter"]) {
        let mut s = fields(g, "oracle", f.errs);
        s.float_list("gammas", &mut cfg.oracle.gammas);
        s.float("tol", &mut cfg.oracle.tol);
        s.usize("max_iter", &mut cfg.oracle.max_iter);
    }
    if let Some(g) = f.sub("sweep", &["validation_samples", "reference_n", "reference_seed"]) {
        let mut s = fields(g, "sweep", f.errs);
        s.usize("validation_samples", &mut cfg.sweep.validation_samples);
        s.usize("reference_n", &mut cfg.sweep.reference_n);
        s.u64("reference_seed", &mut cfg.sweep.reference_seed);
    }
    if let Some(g) = f.sub(
        "certify",
        &[
            "epsilon", "rho", "delta", "trials", "base_seed", "domain_samples", "validation_samples", "lipschitz",
            "n_override",
        ],
    ) {
        let c = &mut cfg.certify;
        let mut s = fields(g, "certify", f.errs);
        s.float("epsilon", &mut c.epsilon);
        s.float("rho", &mut c.rho);
        s.float("delta", &mut c.delta);
        s.usize("trials", &mut c.trials);
        s.u64("base_seed", &mut c.base_seed);
        s.usize("domain_samples", &mut c.domain_samples);
        s.usize("validation_samples", &mut c.validation_samples);
        s.opt_float("lipschitz", &mut c.lipschitz);
        s.opt_usize("n_override", &mut c.n_override);
    }
    if let Some(g) = f.sub(
        "phi",
        &["taus", "validation_samples", "seed", "tol", "max_iter", "levels", "offsets"],
    ) {
        let p = &mut cfg.phi;
        let mut s = fields(g, "phi", f.errs);
        s.float_list("taus", &mut p.config.taus);
        s.usize("validation_samples", &mut p.config.validation_samples);
        s.u64("seed", &mut p.config.seed);
        s.float("tol", &mut p.config.solver.tol);
        s.usize("max_iter", &mut p.config.solver.max_iter);
        s.float_list("levels", &mut p.levels);
        s.float_list("offsets", &mut p.offsets);
    }
    if let Some(g) = f.sub("check_grad", &["points", "step", "tol", "gamma"]) {
        let c = &mut cfg.check_grad;
        let mut s = fields(g, "check_grad", f.errs);
        s.usize("points", &mut c.points);
        s.float("step", &mut c.step);
        s.float("tol", &mut c.tol);
        s.float("gamma", &mut c.gamma);
    }
    if let Some(g) = f.sub("regression", &["grid", "radius", "offset", "amplitude", "noise_sd"]) {
        let r = &mut cfg.regression;
        let mut s = fields(g, "regression", f.errs);
        s.usize("grid", &mut r.grid);
        s.float("radius", &mut r.radius);
        s.float("offset", &mut r.offset);
        s.float("amplitude", &mut r.amplitude);
        s.float("noise_sd", &mut r.noise_sd);
    }
    if let Some(g) = f.sub("kantorovich", &["positions", "p1", "p2", "radius", "distances_csv", "cost_csv"]) {
        let k = &mut cfg.kantorovich;
        let mut s = fields(g, "kantorovich", f.errs);
        s.float_list("positions", &mut k.line.positions);
        s.float_list("p1", &mut k.line.p1);
        s.float_list("p2", &mut k.line.p2);
        s.float("radius", &mut k.line.radius);
        k.distances_csv = s.string("distances_csv").map(|p| base.join(p));
        k.cost_csv = s.string("cost_csv").map(|p| base.join(p));
    }
    if let Some(g) = f.sub(
        "semilinear",
        &[
            "nodes", "kappa0", "modes", "mode_amplitude", "target_amplitude", "y_max", "alpha", "lower", "upper",
        ],
    ) {
        let c = &mut cfg.semilinear;
        let mut s = fields(g, "semilinear", f.errs);
        s.usize("nodes", &mut c.nodes);
        s.float("kappa0", &mut c.kappa0);
        s.usize("modes", &mut c.modes);
        s.float("mode_amplitude", &mut c.mode_amplitude);
        s.float("target_amplitude", &mut c.target_amplitude);
        s.float("y_max", &mut c.y_max);
        s.float("alpha", &mut c.alpha);
        s.float("lower", &mut c.lower);
        s.float("upper", &mut c.upper);
    }
    if let Some(g) = f.sub("scalar", &["target", "bound", "lower", "upper", "alpha"]) {
        let c = &mut cfg.scalar;
        let mut s = fields(g, "scalar", f.errs);
        s.float("target", &mut c.target);
        s.float("bound", &mut c.bound);
        s.float("lower", &mut c.lower);
        s.float("upper", &mut c.upper);
        s.float("alpha", &mut c.alpha);
    }
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::from_toml_str(text, Path::new("/cfg"))
    }

    fn messages(r: Result<RunConfig>) -> Vec<String> {
        match r {
            Err(Error::Config(m)) => m,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse("problem = \"regression\"\n").unwrap();
        assert_eq!(cfg.problem, Some(ProblemId::Regression));
        assert_eq!(cfg.n_list, vec![8, 32, 128, 512]);
        assert_eq!(cfg.seeds.len(), 10);
        assert_eq!(cfg.penalty, PenaltyPathConfig::default());
        assert_eq!(cfg.format, Format::Csv);
        cfg.validate().unwrap();
    }

    #[test]
    fn unsorted_n_list_is_rejected() {
        let m = messages(parse("problem = \"regression\"\nN_list = [32, 8]\n"));
        assert!(m.iter().any(|s| s.starts_with("N_list") && s.contains("must be increasing")), "{m:?}");
    }

    #[test]
    fn exponent_out_of_range_cites_interval() {
        let m = messages(parse("[gamma]\nexponent = 1.5\n"));
        assert!(m.iter().any(|s| s.starts_with("gamma.exponent") && s.contains("(0, 1)")), "{m:?}");
    }

    #[test]
    fn all_errors_are_reported_together() {
        let text = "problem = \"regression\"\nbogus = 1\nN_list = [32, 8]\n[gamma]\ntol = \"x\"\n[regression]\nradius = -1\nwidth = 3\n";
        let m = messages(parse(text));
        assert!(m.iter().any(|s| s.starts_with("bogus: unknown key")), "{m:?}");
        assert!(m.iter().any(|s| s.starts_with("gamma.tol: expected number")), "{m:?}");
        assert!(m.iter().any(|s| s.starts_with("regression.width: unknown key")), "{m:?}");
        assert!(m.iter().any(|s| s.starts_with("regression.radius")), "{m:?}");
        assert!(m.iter().any(|s| s.starts_with("N_list")), "{m:?}");
    }

    #[test]
    fn missing_problem_is_a_validation_error() {
        let cfg = parse("seeds = [1, 2]\n").unwrap();
        let m = messages(cfg.validate().map(|_| cfg.clone()));
        assert!(m[0].starts_with("problem: missing required key"));
    }

    #[test]
    fn sections_override_defaults() {
        let text = "problem = \"kantorovich\"\nmethod = \"saa-oracle\"\nformat = \"json\"\nout_dir = \"o\"\n\
            [gamma]\nc = 100\nstage_count = 3\n[kantorovich]\ndistances_csv = \"d.csv\"\n";
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.method, Method::SaaOracle);
        assert_eq!(cfg.format, Format::Json);
        assert_eq!(cfg.out_dir, Some(PathBuf::from("/cfg/o")));
        assert_eq!(cfg.penalty.c_gamma, 100.0);
        assert_eq!(cfg.penalty.stage_fractions, vec![0.25, 0.5, 1.0]);
        assert_eq!(cfg.kantorovich.distances_csv, Some(PathBuf::from("/cfg/d.csv")));
    }

    #[test]
    fn bad_enums_and_syntax() {
        assert!(messages(parse("problem = \"nope\"\n"))[0].starts_with("problem:"));
        assert!(messages(parse("format = \"xml\"\n"))[0].starts_with("format:"));
        assert!(messages(parse("problem = \n"))[0].starts_with("syntax error"));
        assert!(messages(parse("seeds = [1, -2]\n"))[0].starts_with("seeds[1]"));
    }
}
