//! SAA solution methods shared by the experiment drivers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::{recover_multipliers, solve_penalty_path_on, PenaltyPathConfig};
use crate::program::{ScenarioSet, StochasticProgram};
use crate::prox::SolverOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Hard-constrained SAA: the program's exact oracle when it has one,
    /// otherwise a long high-γ continuation.
    SaaOracle,
    /// Penalty path ending at `γ_N = c N^p`.
    MyPath,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::SaaOracle => "saa-oracle",
            Method::MyPath => "my-path",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "saa-oracle" => Ok(Method::SaaOracle),
            "my-path" => Ok(Method::MyPath),
            other => Err(Error::invalid(format!(
                "unknown method `{other}` (expected saa-oracle or my-path)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// γ ladder used when no exact oracle exists.
    pub gammas: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            gammas: vec![1.0, 10.0, 100.0, 1e3, 1e4],
            tol: 1e-6,
            max_iter: 200_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SaaSolution {
    pub u: Vec<f64>,
    pub multipliers: Vec<Vec<f64>>,
    /// Final γ, `None` for exact oracles.
    pub gamma: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Solves the hard-constrained SAA problem on a fixed scenario set.
pub fn solve_saa_oracle<P: StochasticProgram>(
    program: &P,
    scenarios: &ScenarioSet<P::Scenario>,
    oracle: &OracleConfig,
) -> Result<SaaSolution> {
    if let Some(exact) = program.exact_saa(scenarios.scenarios()) {
        let exact = exact?;
        return Ok(SaaSolution {
            u: exact.u,
            multipliers: exact.multipliers,
            gamma: None,
            converged: true,
            iterations: 0,
        });
    }
    let opts = SolverOptions {
        tol: oracle.tol,
        max_iter: oracle.max_iter,
        accelerate: true,
        ..Default::default()
    };
    let u0 = program.regularizer().project(&vec![0.0; program.dim()])?;
    let path = solve_penalty_path_on(program, scenarios, &oracle.gammas, &u0, oracle.tol, &opts)?;
    let u = path.final_result().u_star.clone();
    let gamma = path.gamma_final;
    Ok(SaaSolution {
        multipliers: recover_multipliers(program, scenarios, &u, gamma)?,
        iterations: path.stages.iter().map(|s| s.result.iterations).sum(),
        converged: path.converged,
        gamma: Some(gamma),
        u,
    })
}

/// Penalty-path solution with `γ_N` from `cfg`, from the projection of 0.
pub fn solve_my_path<P: StochasticProgram>(
    program: &P,
    scenarios: &ScenarioSet<P::Scenario>,
    cfg: &PenaltyPathConfig,
    opts: &SolverOptions,
) -> Result<SaaSolution> {
    cfg.validate()?;
    let u0 = program.regularizer().project(&vec![0.0; program.dim()])?;
    let path = solve_penalty_path_on(
        program,
        scenarios,
        &cfg.stages(scenarios.len()),
        &u0,
        cfg.tol_per_stage,
        opts,
    )?;
    let u = path.final_result().u_star.clone();
    let gamma = path.gamma_final;
    Ok(SaaSolution {
        multipliers: recover_multipliers(program, scenarios, &u, gamma)?,
        iterations: path.stages.iter().map(|s| s.result.iterations).sum(),
        converged: path.converged,
        gamma: Some(gamma),
        u,
    })
}

pub fn solve_with<P: StochasticProgram>(
    program: &P,
    scenarios: &ScenarioSet<P::Scenario>,
    method: Method,
    penalty: &PenaltyPathConfig,
    oracle: &OracleConfig,
    opts: &SolverOptions,
) -> Result<SaaSolution> {
    match method {
        Method::SaaOracle => solve_saa_oracle(program, scenarios, oracle),
        Method::MyPath => solve_my_path(program, scenarios, penalty, opts),
    }
}
