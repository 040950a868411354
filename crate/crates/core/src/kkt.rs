//! KKT residuals for the SAA problem at a primal point with per-scenario
//! multipliers `μᵢ`.
//!
//! The aggregated multiplier `λ_N` is kept in atomic form: the pairs
//! `(ξⁱ, μᵢ)` with `⟨λ_N, v⟩ = (1/N) Σ ⟨μᵢ, v(ξⁱ)⟩`.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dist, dot, norm, scale};
use crate::program::{saa_constraint_residual, constraint_values, ScenarioSet, StochasticProgram};

/// Default prox step used for the stationarity residual.
pub const PROBE_STEP: f64 = 1.0;
/// Second step reported alongside, to expose the dependence on `t`.
pub const SMALL_PROBE_STEP: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KktReport {
    pub stationarity: f64,
    /// Stationarity residual at `t = SMALL_PROBE_STEP`.
    pub stationarity_small_step: f64,
    /// `(1/N) Σ ⟨μᵢ, G(u,ξⁱ)⟩`, signed.
    pub complementarity: f64,
    /// `maxᵢ dist(μᵢ, K⁻)`
    pub dual_feasibility: f64,
    /// `maxᵢ dist(G(u,ξⁱ), K)`
    pub primal_feasibility: f64,
    /// `(1/N) Σ ‖μᵢ‖`
    pub multiplier_norm: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub gamma: Option<f64>,
    /// Some scenarios coincide, so `multiplier_norm` overstates the dual norm.
    pub duplicate_atoms: bool,
}

fn check_multipliers(mu: &[Vec<f64>]) -> Result<usize> {
    let k = mu
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("multiplier list must be nonempty"))?;
    for m in mu {
        check_len("multiplier", k, m.len())?;
    }
    Ok(k)
}

/// `(1/N) Σ ‖μᵢ‖₂`
pub fn aggregate_multiplier_norm(mu: &[Vec<f64>]) -> Result<f64> {
    check_multipliers(mu)?;
    Ok(mu.iter().map(|m| norm(m)).sum::<f64>() / mu.len() as f64)
}

/// `∇F̂_N(u) + (1/N) Σ D_uG(u,ξⁱ)* μᵢ`
pub fn lagrangian_gradient<P: StochasticProgram>(
    program: &P,
    scenarios: &ScenarioSet<P::Scenario>,
    u: &[f64],
    mu: &[Vec<f64>],
) -> Result<Vec<f64>> {
    check_len("decision vector", program.dim(), u.len())?;
    check_len("multiplier list", scenarios.len(), mu.len())?;
    let k = program.constraint_dim();
    let w = program.observe(u);
    let mut grad_w = vec![0.0; w.len()];
    for (xi, m) in scenarios.scenarios().iter().zip(mu) {
        check_len("multiplier", k, m.len())?;
        let (_, gj) = program.integrand(&w, xi)?;
        axpy(1.0, &gj, &mut grad_w);
        if m.iter().any(|x| *x != 0.0) {
            let adj = program.constraint_map_adjoint(&w, xi, m)?;
            axpy(1.0, &adj, &mut grad_w);
        }
    }
    scale(1.0 / scenarios.len() as f64, &mut grad_w);
    Ok(program.observe_adjoint(&grad_w))
}

/// `‖u − prox_{tψ}(u − t g)‖ / t` with `g` the Lagrangian gradient.
pub fn stationarity_residual<P: StochasticProgram>(
    program: &P,
    scenarios: &ScenarioSet<P::Scenario>,
    u: &[f64],
    mu: &[Vec<f64>],
    probe_step: f64,
) -> Result<f64> {
    let g = lagrangian_gradient(program, scenarios, u, mu)?;
    prox_residual(program, u, &g, probe_step)
}

fn prox_residual<P: StochasticProgram>(program: &P, u: &[f64], g: &[f64], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid("probe step must be positive"));
    }
    let trial: Vec<f64> = u.iter().zip(g).map(|(a, b)| a - t * b).collect();
    let p = program.regularizer().prox(&trial, t)?;
    Ok(dist(u, &p) / t)
}

/// `(1/N) Σ ⟨μᵢ, gᵢ⟩`
pub fn complementarity(mu: &[Vec<f64>], g_values: &[Vec<f64>]) -> Result<f64> {
    check_len("constraint values", mu.len(), g_values.len())?;
    let k = check_multipliers(mu)?;
    let mut total = 0.0;
    for (m, g) in mu.iter().zip(g_values) {
        check_len("constraint value", k, g.len())?;
        total += dot(m, g);
    }
    Ok(total / mu.len() as f64)
}

fn has_duplicates<P: StochasticProgram>(program: &P, scenarios: &ScenarioSet<P::Scenario>) -> bool {
    let mut coords: Vec<Vec<f64>> = scenarios
        .scenarios()
        .iter()
        .map(|s| program.scenario_coords(s))
        .collect();
    coords.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    coords.windows(2).any(|w| w[0] == w[1])
}

pub fn kkt_report<P: StochasticProgram>(
    program: &P,
    scenarios: &ScenarioSet<P::Scenario>,
    u: &[f64],
    mu: &[Vec<f64>],
    gamma: Option<f64>,
) -> Result<KktReport> {
    let g = lagrangian_gradient(program, scenarios, u, mu)?;
    let stationarity = prox_residual(program, u, &g, PROBE_STEP)?;
    let stationarity_small_step = prox_residual(program, u, &g, SMALL_PROBE_STEP)?;
    let values = constraint_values(program, scenarios, u)?;
    let cone = program.cone();
    let mut dual_feasibility = 0.0_f64;
    for m in mu {
        dual_feasibility = dual_feasibility.max(cone.polar_residual(m)?);
    }
    let primal = saa_constraint_residual(program, scenarios, u)?;
    Ok(KktReport {
        stationarity,
        stationarity_small_step,
        complementarity: complementarity(mu, &values)?,
        dual_feasibility,
        primal_feasibility: primal.max_violation,
        multiplier_norm: aggregate_multiplier_norm(mu)?,
        n: scenarios.len(),
        gamma,
        duplicate_atoms: has_duplicates(program, scenarios),
    })
}
