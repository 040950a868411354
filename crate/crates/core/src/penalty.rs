//! Moreau–Yosida penalty paths for the SAA problem.
//!
//! The hard constraints `G(u,ξⁱ) ∈ K` are replaced by `γ φ̂_N(u)` with
//! `φ̂_N(u) = (1/N) Σ β(G(u,ξⁱ))`, and `min F̂_N + ψ + γ φ̂_N` is solved for an
//! increasing ladder of γ values ending at `γ_N = c N^p`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy, compensated_sum, scale};
use crate::program::{draw_scenarios, saa_constraint_residual, ScenarioSet, StochasticProgram};
use crate::prox::{solve_composite, SolveResult, SolverOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyPathConfig {
    pub c_gamma: f64,
    pub exponent: f64,
    /// Continuation stages as fractions of the final γ; strictly increasing,
    /// last entry 1.
    pub stage_fractions: Vec<f64>,
    /// Final-stage tolerance scale; stage γ uses `tol_per_stage / √γ`.
    pub tol_per_stage: f64,
}

impl Default for PenaltyPathConfig {
    fn default() -> Self {
        PenaltyPathConfig {
            c_gamma: 1.0,
            exponent: 0.25,
            stage_fractions: vec![0.125, 0.25, 0.5, 1.0],
            tol_per_stage: 1e-8,
        }
    }
}

impl PenaltyPathConfig {
    /// Halving ladder `{2^{1−k}, …, 1/2, 1}` with `k` stages.
    pub fn halving_fractions(k: usize) -> Vec<f64> {
        (0..k.max(1))
            .rev()
            .map(|i| 0.5_f64.powi(i as i32))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_gamma > 0.0 && self.c_gamma.is_finite()) {
            return Err(Error::invalid("c_gamma must be positive"));
        }
        if !(self.exponent > 0.0 && self.exponent < 1.0) {
            return Err(Error::invalid("gamma exponent must lie in (0, 1)"));
        }
        if !(self.tol_per_stage > 0.0) {
            return Err(Error::invalid("tol_per_stage must be positive"));
        }
        validate_increasing(&self.stage_fractions)?;
        if self.stage_fractions.last() != Some(&1.0) {
            return Err(Error::invalid("the last stage fraction must be 1"));
        }
        Ok(())
    }

    /// γ values of every stage for sample size `n`.
    pub fn stages(&self, n: usize) -> Vec<f64> {
        let g = gamma_schedule(n, self);
        self.stage_fractions.iter().map(|f| f * g).collect()
    }
}

fn validate_increasing(gammas: &[f64]) -> Result<()> {
    if gammas.is_empty() {
        return Err(Error::invalid("at least one penalty stage is required"));
    }
    if gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::invalid("penalty stages must be positive and finite"));
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("penalty stages must be strictly increasing"));
    }
    Ok(())
}

/// `γ_N = c_gamma · N^exponent`
pub fn gamma_schedule(n: usize, cfg: &PenaltyPathConfig) -> f64 {
    cfg.c_gamma * (n.max(1) as f64).powf(cfg.exponent)
}

/// Smooth part `F̂_N(u) + γ φ̂_N(u)` of the penalized SAA problem, with its
/// gradient. `ψ` is left to the prox.
pub fn assemble_penalized<'a, P: StochasticProgram>(
    program: &'a P,
    scenarios: &'a ScenarioSet<P::Scenario>,
    gamma: f64,
) -> Result<impl Fn(&[f64]) -> Result<(f64, Vec<f64>)> + 'a> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("penalty parameter γ must be positive"));
    }
    Ok(move |u: &[f64]| penalized_value_grad(program, scenarios, gamma, u))
}

/// `(F̂_N(u), φ̂_N(u), ∇F̂_N(u) + γ∇φ̂_N(u))`
pub fn penalized_parts<P: StochasticProgram>(
    program: &P,
    scenarios: &ScenarioSet<P::Scenario>,
    gamma: f64,
    u: &[f64],
) -> Result<(f64, f64, Vec<f64>)> {
    crate::error::check_len("decision vector", program.dim(), u.len())?;
    if !all_finite(u) {
        return Err(Error::NonFinite("decision vector"));
    }
    let w = program.observe(u);
    let terms: Vec<_> = scenarios
        .scenarios()
        .par_iter()
        .with_min_len(16)
        .enumerate()
        .map(|(i, xi)| {
            let t = program.penalized_term(&w, xi, gamma)?;
            if !t.j.is_finite() || !t.beta.is_finite() || !all_finite(&t.grad_w) {
                return Err(Error::NonFiniteScenario {
                    what: "penalized integrand",
                    index: i,
                });
            }
            Ok(t)
        })
        .collect::<Result<_>>()?;
    let f = compensated_sum(terms.iter().map(|t| t.j));
    let phi = compensated_sum(terms.iter().map(|t| t.beta));
    let mut grad_w = vec![0.0; w.len()];
    for t in &terms {
        axpy(1.0, &t.grad_w, &mut grad_w);
    }
    let inv_n = 1.0 / scenarios.len() as f64;
    scale(inv_n, &mut grad_w);
    Ok((f * inv_n, phi * inv_n, program.observe_adjoint(&grad_w)))
}

fn penalized_value_grad<P: StochasticProgram>(
    program: &P,
    scenarios: &ScenarioSet<P::Scenario>,
    gamma: f64,
    u: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (f, phi, g) = penalized_parts(program, scenarios, gamma, u)?;
    Ok((f + gamma * phi, g))
}

#[derive(Clone, Debug)]
pub struct StageRecord {
    pub gamma: f64,
    pub tol: f64,
    pub result: SolveResult,
    /// `φ̂_N(u_γ)`
    pub mean_penalty: f64,
    /// `maxᵢ dist(G(u_γ,ξⁱ), K)`
    pub max_violation: f64,
}

#[derive(Clone, Debug)]
pub struct PathResult {
    pub stages: Vec<StageRecord>,
    pub gamma_final: f64,
    /// Every stage met its tolerance.
    pub converged: bool,
}

impl PathResult {
    pub fn final_result(&self) -> &SolveResult {
        &self.stages.last().expect("path has at least one stage").result
    }
}

/// Continuation over explicit γ values on a fixed scenario set, warm-starting
/// each stage from the previous one. Non-converged stages are flagged and
/// the path continues.
pub fn solve_penalty_path_on<P: StochasticProgram>(
    program: &P,
    scenarios: &ScenarioSet<P::Scenario>,
    gammas: &[f64],
    u0: &[f64],
    tol: f64,
    opts: &SolverOptions,
) -> Result<PathResult> {
    validate_increasing(gammas)?;
    let reg = program.regularizer();
    let mut u = u0.to_vec();
    let mut stages = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let stage_tol = tol / gamma.sqrt();
        let smooth = assemble_penalized(program, scenarios, gamma)?;
        let stage_opts = SolverOptions {
            tol: stage_tol,
            ..opts.clone()
        };
        let result = solve_composite(smooth, reg, &u, &stage_opts)?;
        let res = saa_constraint_residual(program, scenarios, &result.u_star)?;
        u = result.u_star.clone();
        stages.push(StageRecord {
            gamma,
            tol: stage_tol,
            result,
            mean_penalty: res.mean_penalty,
            max_violation: res.max_violation,
        });
    }
    Ok(PathResult {
        converged: stages.iter().all(|s| s.result.converged),
        gamma_final: *gammas.last().expect("validated nonempty"),
        stages,
    })
}

/// Draws N scenarios once and runs the continuation ladder of `cfg`, ending
/// at `γ_N = gamma_schedule(N)`, starting from the projection of 0.
pub fn solve_penalty_path<P: StochasticProgram>(
    program: &P,
    n: usize,
    base_seed: u64,
    cfg: &PenaltyPathConfig,
    opts: &SolverOptions,
) -> Result<(PathResult, ScenarioSet<P::Scenario>)> {
    cfg.validate()?;
    let scenarios = draw_scenarios(program, n, base_seed)?;
    let u0 = program.regularizer().project(&vec![0.0; program.dim()])?;
    let path = solve_penalty_path_on(
        program,
        &scenarios,
        &cfg.stages(n),
        &u0,
        cfg.tol_per_stage,
        opts,
    )?;
    Ok((path, scenarios))
}

/// `μᵢ = γ Dβ(G(u,ξⁱ))`
pub fn recover_multipliers<P: StochasticProgram>(
    program: &P,
    scenarios: &ScenarioSet<P::Scenario>,
    u: &[f64],
    gamma: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("penalty parameter γ must be positive"));
    }
    let values = crate::program::constraint_values(program, scenarios, u)?;
    values
        .iter()
        .map(|g| {
            let mut mu = program.cone().penalty_beta_grad(g)?;
            scale(gamma, &mut mu);
            Ok(mu)
        })
        .collect()
}
