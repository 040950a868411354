//! Stochastic programs `min E[J(u,ξ)] + ψ(u)  s.t.  G(u,ξ) ∈ K  a.s.` and
//! their sample average approximations.
//!
//! Programs are described at the level of the observation `w = Bu`:
//! `J(u,ξ) = 𝒥(Bu,ξ)` and `G(u,ξ) = 𝒢(Bu,ξ)`. The SAA routines below
//! apply `B` once per evaluation, sum scenario contributions in observation
//! space, and pull gradients back with `B*` once.

use std::fmt::Debug;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cones::Cone;
use crate::error::{check_len, Error, Result};
use crate::linalg::{all_finite, axpy, dist};
use crate::regularizer::Regularizer;

/// Per-scenario contribution to the penalized SAA objective.
#[derive(Clone, Debug)]
pub struct PenalizedTerm {
    pub j: f64,
    pub beta: f64,
    /// `∇_w [𝒥(w,ξ) + γ β(𝒢(w,ξ))]`
    pub grad_w: Vec<f64>,
}

/// An exact solution of the hard-constrained SAA problem with per-scenario
/// multipliers, for programs that have a dedicated oracle.
#[derive(Clone, Debug)]
pub struct ExactSaaSolution {
    pub u: Vec<f64>,
    pub multipliers: Vec<Vec<f64>>,
}

pub trait StochasticProgram: Sync {
    type Scenario: Clone + Debug + Send + Sync;

    /// Short identifier used in output files.
    fn name(&self) -> &str;
    /// Decision dimension `n`.
    fn dim(&self) -> usize;
    /// Dimension of `w = Bu`.
    fn observation_dim(&self) -> usize;
    /// Constraint-image dimension `k`.
    fn constraint_dim(&self) -> usize {
        self.cone().dim()
    }
    fn cone(&self) -> &Cone;
    fn regularizer(&self) -> &Regularizer;

    /// One draw of ξ, deterministic in `seed`.
    fn sample(&self, seed: u64) -> Self::Scenario;

    /// `B u`
    fn observe(&self, u: &[f64]) -> Vec<f64>;
    /// `B* v`
    fn observe_adjoint(&self, v: &[f64]) -> Vec<f64>;

    /// `(𝒥(w,ξ), ∇_w 𝒥(w,ξ))`
    fn integrand(&self, w: &[f64], xi: &Self::Scenario) -> Result<(f64, Vec<f64>)>;
    /// `𝒢(w,ξ)`
    fn constraint_map(&self, w: &[f64], xi: &Self::Scenario) -> Result<Vec<f64>>;
    /// `D_w𝒢(w,ξ)* μ`
    fn constraint_map_adjoint(&self, w: &[f64], xi: &Self::Scenario, mu: &[f64])
        -> Result<Vec<f64>>;

    /// `𝒥 + γ β∘𝒢` with its gradient. Programs whose `𝒥` and `𝒢` share an
    /// expensive inner solve override this.
    fn penalized_term(&self, w: &[f64], xi: &Self::Scenario, gamma: f64) -> Result<PenalizedTerm> {
        let (j, mut grad_w) = self.integrand(w, xi)?;
        let g = self.constraint_map(w, xi)?;
        let beta = self.cone().penalty_beta(&g)?;
        if gamma > 0.0 && beta > 0.0 {
            let dbeta = self.cone().penalty_beta_grad(&g)?;
            let adj = self.constraint_map_adjoint(w, xi, &dbeta)?;
            axpy(gamma, &adj, &mut grad_w);
        }
        Ok(PenalizedTerm { j, beta, grad_w })
    }

    /// User-supplied Lipschitz bound of `𝒢(·,ξ)` on `B(dom ψ)`.
    fn lipschitz_g(&self) -> Option<f64> {
        None
    }

    /// Numeric coordinates of a scenario, for CSV dumps and duplicate checks.
    fn scenario_coords(&self, xi: &Self::Scenario) -> Vec<f64>;

    /// Exact solver for the hard-constrained SAA problem, when one exists.
    fn exact_saa(&self, _scenarios: &[Self::Scenario]) -> Option<Result<ExactSaaSolution>> {
        None
    }

    /// `(J(u,ξ), ∇_u J(u,ξ))`
    fn j_value_grad(&self, u: &[f64], xi: &Self::Scenario) -> Result<(f64, Vec<f64>)> {
        let w = self.observe(u);
        let (j, gw) = self.integrand(&w, xi)?;
        Ok((j, self.observe_adjoint(&gw)))
    }

    /// `G(u,ξ) = 𝒢(Bu,ξ)`
    fn g_value(&self, u: &[f64], xi: &Self::Scenario) -> Result<Vec<f64>> {
        self.constraint_map(&self.observe(u), xi)
    }

    /// `D_u G(u,ξ)* μ = B* D_w𝒢(Bu,ξ)* μ`
    fn g_jacobian_transpose_apply(
        &self,
        u: &[f64],
        xi: &Self::Scenario,
        mu: &[f64],
    ) -> Result<Vec<f64>> {
        let w = self.observe(u);
        let adj = self.constraint_map_adjoint(&w, xi, mu)?;
        Ok(self.observe_adjoint(&adj))
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed for stream `index` of `base`; independent of any other index.
pub fn sub_seed(base: u64, index: u64) -> u64 {
    mix64(mix64(base) ^ mix64(index.wrapping_mul(0xD134_2543_DE82_EF95).wrapping_add(1)))
}

/// RNG for a given seed; programs use this inside `sample`.
pub fn scenario_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An i.i.d. sample ξ¹…ξᴺ together with its seed provenance.
#[derive(Clone, Debug)]
pub struct ScenarioSet<S> {
    scenarios: Vec<S>,
    base_seed: u64,
}

impl<S> ScenarioSet<S> {
    /// Wraps an explicit scenario list (e.g. a stratified design).
    pub fn from_scenarios(scenarios: Vec<S>, base_seed: u64) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::invalid("scenario set must be nonempty"));
        }
        Ok(ScenarioSet {
            scenarios,
            base_seed,
        })
    }

    pub fn scenarios(&self) -> &[S] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }
}

/// Draws N scenarios; scenario `i` uses sub-seed `sub_seed(base_seed, i)`.
pub fn draw_scenarios<P: StochasticProgram>(
    program: &P,
    n: usize,
    base_seed: u64,
) -> Result<ScenarioSet<P::Scenario>> {
    if n == 0 {
        return Err(Error::invalid("sample size N must be at least 1"));
    }
    let scenarios = (0..n as u64)
        .map(|i| program.sample(sub_seed(base_seed, i)))
        .collect();
    Ok(ScenarioSet {
        scenarios,
        base_seed,
    })
}

/// Writes `index,xi_0,xi_1,...` rows.
pub fn write_scenarios_csv<P: StochasticProgram, W: Write>(
    program: &P,
    set: &ScenarioSet<P::Scenario>,
    mut out: W,
) -> Result<()> {
    let width = set
        .scenarios()
        .first()
        .map(|s| program.scenario_coords(s).len())
        .unwrap_or(0);
    let header: Vec<String> = std::iter::once("index".to_string())
        .chain((0..width).map(|j| format!("xi_{j}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (i, s) in set.scenarios().iter().enumerate() {
        let coords: Vec<String> = program
            .scenario_coords(s)
            .iter()
            .map(|c| format!("{c:.17e}"))
            .collect();
        writeln!(out, "{i},{}", coords.join(","))?;
    }
    Ok(())
}

fn check_point<P: StochasticProgram>(program: &P, u: &[f64]) -> Result<()> {
    check_len("decision vector", program.dim(), u.len())?;
    if !all_finite(u) {
        return Err(Error::NonFinite("decision vector"));
    }
    Ok(())
}

/// `F̂_N(u) = (1/N) Σ J(u,ξⁱ)` and its gradient. `ψ` is not included.
pub fn saa_objective<P: StochasticProgram>(
    program: &P,
    scenarios: &ScenarioSet<P::Scenario>,
    u: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_point(program, u)?;
    let w = program.observe(u);
    let mut values = Vec::with_capacity(scenarios.len());
    let mut grad_w = vec![0.0; w.len()];
    for (i, xi) in scenarios.scenarios().iter().enumerate() {
        let (j, gw) = program.integrand(&w, xi)?;
        if !j.is_finite() || !all_finite(&gw) {
            return Err(Error::NonFiniteScenario {
                what: "objective integrand",
                index: i,
            });
        }
        values.push(j);
        axpy(1.0, &gw, &mut grad_w);
    }
    let inv_n = 1.0 / scenarios.len() as f64;
    crate::linalg::scale(inv_n, &mut grad_w);
    Ok((crate::linalg::compensated_sum(values) * inv_n, program.observe_adjoint(&grad_w)))
}

/// Constraint residuals of the SAA problem at `u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintResidual {
    /// `maxᵢ dist(G(u,ξⁱ), K)`
    pub max_violation: f64,
    /// `φ̂_N(u) = (1/N) Σ β(G(u,ξⁱ))`
    pub mean_penalty: f64,
}

pub fn saa_constraint_residual<P: StochasticProgram>(
    program: &P,
    scenarios: &ScenarioSet<P::Scenario>,
    u: &[f64],
) -> Result<ConstraintResidual> {
    check_point(program, u)?;
    let values = constraint_values(program, scenarios, u)?;
    let cone = program.cone();
    let mut max_violation = 0.0_f64;
    let mut sum = 0.0;
    for g in &values {
        let beta = cone.penalty_beta(g)?;
        max_violation = max_violation.max((2.0 * beta).sqrt());
        sum += beta;
    }
    Ok(ConstraintResidual {
        max_violation,
        mean_penalty: sum / scenarios.len() as f64,
    })
}

/// `G(u,ξⁱ)` for every scenario.
pub fn constraint_values<P: StochasticProgram>(
    program: &P,
    scenarios: &ScenarioSet<P::Scenario>,
    u: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let w = program.observe(u);
    scenarios
        .scenarios()
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            let g = program.constraint_map(&w, xi)?;
            if !all_finite(&g) {
                return Err(Error::NonFiniteScenario {
                    what: "constraint map",
                    index: i,
                });
            }
            Ok(g)
        })
        .collect()
}

/// Out-of-sample Monte Carlo estimates at a fixed decision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationEstimate {
    /// Estimate of `F(u) = E[J(u,ξ)]`.
    pub mean_j: f64,
    /// Standard error of `mean_j`.
    pub stderr: f64,
    /// Estimate of `E[β(G(u,ξ))]`.
    pub mean_beta: f64,
    /// Estimate of `P(dist(G(u,ξ), K) ≤ ρ)`.
    pub prob_feasible_rho: f64,
    pub samples: usize,
}

/// Fresh i.i.d. validation sample of size `m` drawn from `seed`.
pub fn validation_estimate<P: StochasticProgram>(
    program: &P,
    u: &[f64],
    m: usize,
    seed: u64,
    rho: f64,
) -> Result<ValidationEstimate> {
    if m < 2 {
        return Err(Error::invalid("validation sample size must be at least 2"));
    }
    if !(rho >= 0.0) {
        return Err(Error::invalid("feasibility radius ρ must be ≥ 0"));
    }
    check_point(program, u)?;
    let w = program.observe(u);
    let cone = program.cone();
    let per_sample: Vec<(f64, f64)> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let xi = program.sample(sub_seed(seed, i));
            let (j, _) = program.integrand(&w, &xi)?;
            let g = program.constraint_map(&w, &xi)?;
            let beta = cone.penalty_beta(&g)?;
            if !j.is_finite() || !beta.is_finite() {
                return Err(Error::NonFiniteScenario {
                    what: "validation evaluation",
                    index: i as usize,
                });
            }
            Ok((j, beta))
        })
        .collect::<Result<_>>()?;
    let mf = m as f64;
    let mean_j = per_sample.iter().map(|p| p.0).sum::<f64>() / mf;
    let var = per_sample
        .iter()
        .map(|p| (p.0 - mean_j) * (p.0 - mean_j))
        .sum::<f64>()
        / (mf - 1.0);
    let mean_beta = per_sample.iter().map(|p| p.1).sum::<f64>() / mf;
    let feasible = per_sample
        .iter()
        .filter(|p| (2.0 * p.1).sqrt() <= rho)
        .count();
    Ok(ValidationEstimate {
        mean_j,
        stderr: (var / mf).sqrt(),
        mean_beta,
        prob_feasible_rho: feasible as f64 / mf,
        samples: m,
    })
}

/// Empirical Lipschitz estimate of `𝒢(·,ξ)` on `B(dom ψ)`: the largest
/// sampled difference quotient `‖𝒢(w₁,ξ) − 𝒢(w₂,ξ)‖ / ‖w₁ − w₂‖`, inflated
/// by 1.5.
pub fn estimate_lipschitz_g<P: StochasticProgram>(
    program: &P,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let n = program.dim();
    let reg = program.regularizer();
    let quotients: Vec<f64> = (0..pairs as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = scenario_rng(sub_seed(seed, p));
            let mut draw = || -> Result<Vec<f64>> {
                let cube: Vec<f64> = (0..=n).map(|_| rng.random::<f64>()).collect();
                reg.from_unit_cube(n, &cube)
            };
            let u1 = draw()?;
            let u2 = draw()?;
            let xi = program.sample(rng.random());
            let w1 = program.observe(&u1);
            let w2 = program.observe(&u2);
            let dw = dist(&w1, &w2);
            if dw == 0.0 {
                return Ok(0.0);
            }
            let g1 = program.constraint_map(&w1, &xi)?;
            let g2 = program.constraint_map(&w2, &xi)?;
            Ok(dist(&g1, &g2) / dw)
        })
        .collect::<Result<_>>()?;
    Ok(1.5 * quotients.into_iter().fold(0.0, f64::max))
}
