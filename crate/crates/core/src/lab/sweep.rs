//! N-sweeps of optimal values, solutions and multipliers.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kkt::{kkt_report, KktReport};
use crate::lab::solve::{solve_saa_oracle, solve_with, Method, OracleConfig, SaaSolution};
use crate::linalg::dist;
use crate::penalty::PenaltyPathConfig;
use crate::program::{
    draw_scenarios, saa_objective, sub_seed, validation_estimate, ScenarioSet, StochasticProgram,
};
use crate::prox::SolverOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub method: Method,
    pub penalty: PenaltyPathConfig,
    pub oracle: OracleConfig,
    pub solver: SolverOptions,
    /// Out-of-sample size for `validation_mean_beta`.
    pub validation_samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_list: vec![8, 32, 128, 512],
            seeds: (0..10).collect(),
            method: Method::MyPath,
            penalty: PenaltyPathConfig::default(),
            oracle: OracleConfig::default(),
            solver: SolverOptions::default(),
            validation_samples: 2000,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list[0] == 0 {
            return Err(Error::invalid("N list must be nonempty with N ≥ 1"));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("N list must be increasing"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        if self.validation_samples < 2 {
            return Err(Error::invalid("validation sample size must be at least 2"));
        }
        self.penalty.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub problem_id: String,
    pub method: Method,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub gamma: Option<f64>,
    /// `F̂_N(u) + ψ(u)` at the cell solution.
    pub opt_value: f64,
    pub dist_to_reference: Option<f64>,
    pub kkt: Option<KktReport>,
    pub validation_mean_beta: f64,
    /// Monte Carlo `Var(∇_u J)` and `Var(∇_u β∘G)` over the cell's scenarios.
    pub grad_var_objective: f64,
    pub grad_var_penalty: f64,
    pub converged: bool,
    pub error: Option<String>,
    pub wall_time_ms: f64,
}

/// Scenario base seed of the cell `(N, seed)`.
pub fn cell_seed(seed: u64, n: usize) -> u64 {
    sub_seed(seed, n as u64)
}

fn gradient_variances<P: StochasticProgram>(
    program: &P,
    scenarios: &ScenarioSet<P::Scenario>,
    u: &[f64],
) -> Result<(f64, f64)> {
    let w = program.observe(u);
    let cone = program.cone();
    let mut gj = Vec::with_capacity(scenarios.len());
    let mut gp = Vec::with_capacity(scenarios.len());
    for xi in scenarios.scenarios() {
        let (_, g) = program.integrand(&w, xi)?;
        gj.push(program.observe_adjoint(&g));
        let r = program.constraint_map(&w, xi)?;
        let d = cone.penalty_beta_grad(&r)?;
        let adj = program.constraint_map_adjoint(&w, xi, &d)?;
        gp.push(program.observe_adjoint(&adj));
    }
    let var = |gs: &[Vec<f64>]| {
        let nf = gs.len() as f64;
        let mut mean = vec![0.0; u.len()];
        for g in gs {
            crate::linalg::axpy(1.0 / nf, g, &mut mean);
        }
        gs.iter().map(|g| dist(g, &mean).powi(2)).sum::<f64>() / nf
    };
    Ok((var(&gj), var(&gp)))
}

fn evaluate_cell<P: StochasticProgram>(
    program: &P,
    cfg: &SweepConfig,
    n: usize,
    seed: u64,
    reference: Option<&[f64]>,
) -> Result<(SaaSolution, SweepRecord)> {
    let start = Instant::now();
    let base = cell_seed(seed, n);
    let scenarios = draw_scenarios(program, n, base)?;
    let sol = solve_with(program, &scenarios, cfg.method, &cfg.penalty, &cfg.oracle, &cfg.solver)?;
    let (f, _) = saa_objective(program, &scenarios, &sol.u)?;
    let opt_value = f + program.regularizer().value(&sol.u);
    let kkt = kkt_report(program, &scenarios, &sol.u, &sol.multipliers, sol.gamma)?;
    let val = validation_estimate(program, &sol.u, cfg.validation_samples, sub_seed(base, u64::MAX), 0.0)?;
    let (grad_var_objective, grad_var_penalty) = gradient_variances(program, &scenarios, &sol.u)?;
    let record = SweepRecord {
        problem_id: program.name().to_string(),
        method: cfg.method,
        n,
        seed,
        gamma: sol.gamma,
        opt_value,
        dist_to_reference: reference.map(|r| dist(r, &sol.u)),
        kkt: Some(kkt),
        validation_mean_beta: val.mean_beta,
        grad_var_objective,
        grad_var_penalty,
        converged: sol.converged,
        error: None,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((sol, record))
}

/// One record per `(N, seed)` cell, ordered by N then seed. Failed cells are
/// recorded with their error and the sweep continues.
pub fn run_consistency_sweep<P: StochasticProgram>(
    program: &P,
    cfg: &SweepConfig,
    reference: Option<&[f64]>,
) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    if let Some(r) = reference {
        crate::error::check_len("reference solution", program.dim(), r.len())?;
    }
    let cells: Vec<(usize, u64)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(n, seed)| match evaluate_cell(program, cfg, n, seed, reference) {
            Ok((_, rec)) => rec,
            Err(e) => SweepRecord {
                problem_id: program.name().to_string(),
                method: cfg.method,
                n,
                seed,
                gamma: None,
                opt_value: f64::NAN,
                dist_to_reference: None,
                kkt: None,
                validation_mean_beta: f64::NAN,
                grad_var_objective: f64::NAN,
                grad_var_penalty: f64::NAN,
                converged: false,
                error: Some(e.to_string()),
                wall_time_ms: 0.0,
            },
        })
        .collect())
}

/// Reference solution and value from one large hard-constrained SAA run.
#[derive(Clone, Debug)]
pub struct Reference {
    pub u: Vec<f64>,
    pub value: f64,
    pub n: usize,
}

pub fn reference_solution<P: StochasticProgram>(
    program: &P,
    n: usize,
    seed: u64,
    oracle: &OracleConfig,
) -> Result<Reference> {
    let scenarios = draw_scenarios(program, n, sub_seed(seed, u64::MAX - 1))?;
    let sol = solve_saa_oracle(program, &scenarios, oracle)?;
    let (f, _) = saa_objective(program, &scenarios, &sol.u)?;
    Ok(Reference {
        value: f + program.regularizer().value(&sol.u),
        u: sol.u,
        n,
    })
}

/// Per-N medians of a record statistic, in sweep order.
pub fn median_by_n(records: &[SweepRecord], stat: impl Fn(&SweepRecord) -> Option<f64>) -> Vec<(usize, f64)> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| r.n == n)
                .filter_map(&stat)
                .filter(|v| v.is_finite())
                .collect();
            (n, crate::linalg::median(&vals))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::quadratic::QuadraticProgram;

    #[test]
    fn deterministic_instance_has_constant_value() {
        let p = QuadraticProgram::scalar(2.0, 1.0, -10.0, 10.0, 0.0).unwrap();
        let cfg = SweepConfig {
            n_list: vec![1, 4, 16],
            seeds: vec![0, 1],
            method: Method::SaaOracle,
            validation_samples: 10,
            ..Default::default()
        };
        let recs = run_consistency_sweep(&p, &cfg, Some(&[1.0])).unwrap();
        assert_eq!(recs.len(), 6);
        for r in &recs {
            assert_eq!(r.opt_value, 0.5);
            assert_eq!(r.dist_to_reference, Some(0.0));
        }
    }

    #[test]
    fn rejects_unsorted_n_list() {
        let p = QuadraticProgram::scalar(2.0, 1.0, -10.0, 10.0, 0.0).unwrap();
        let cfg = SweepConfig { n_list: vec![32, 8], ..Default::default() };
        assert!(run_consistency_sweep(&p, &cfg, None).is_err());
    }

    #[test]
    fn medians_follow_sweep_order() {
        let p = QuadraticProgram::scalar(2.0, 1.0, -10.0, 10.0, 0.0).unwrap();
        let cfg = SweepConfig {
            n_list: vec![2, 8],
            seeds: vec![0, 1, 2],
            validation_samples: 10,
            ..Default::default()
        };
        let recs = run_consistency_sweep(&p, &cfg, None).unwrap();
        let med = median_by_n(&recs, |r| r.gamma);
        assert_eq!(med.len(), 2);
        assert!(med[0].1 < med[1].1);
    }
}
