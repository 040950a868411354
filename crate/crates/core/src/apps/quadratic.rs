//! Quadratic tracking over a finite scenario space.
//!
//! `J(u,ξ) = ½‖u − a_ξ‖²`, `G(u,ξ) = u − b_ξ ∈ (−∞,0]ⁿ`, ξ drawn from a
//! finite set of atoms. Small enough to have closed-form answers for both the
//! SAA problem and the true problem, so it serves as the reference instance
//! for solver, penalty-path and error-measure checks.

use rand::Rng;

use crate::cones::Cone;
use crate::error::{check_len, Error, Result};
use crate::program::{scenario_rng, ExactSaaSolution, StochasticProgram};
use crate::regularizer::{Domain, Regularizer};

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub target: Vec<f64>,
    pub bound: Vec<f64>,
    pub prob: f64,
}

#[derive(Clone, Debug)]
pub struct QuadraticProgram {
    n: usize,
    atoms: Vec<Atom>,
    cdf: Vec<f64>,
    cone: Cone,
    regularizer: Regularizer,
}

impl QuadraticProgram {
    pub fn new(atoms: Vec<Atom>, regularizer: Regularizer) -> Result<Self> {
        let n = atoms
            .first()
            .map(|a| a.target.len())
            .ok_or_else(|| Error::invalid("need at least one atom"))?;
        if n == 0 {
            return Err(Error::invalid("decision dimension must be positive"));
        }
        for a in &atoms {
            check_len("atom target", n, a.target.len())?;
            check_len("atom bound", n, a.bound.len())?;
            if !(a.prob > 0.0) {
                return Err(Error::invalid("atom probabilities must be positive"));
            }
        }
        if let Some(d) = regularizer.fixed_dim() {
            check_len("regularizer", n, d)?;
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("atom probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cdf = atoms
            .iter()
            .map(|a| {
                acc += a.prob;
                acc
            })
            .collect();
        Ok(QuadraticProgram {
            n,
            atoms,
            cdf,
            cone: Cone::Nonpositive(n),
            regularizer,
        })
    }

    /// `min ½(u − target)² s.t. u ≤ bound` over `[lower, upper]`, with a
    /// single deterministic scenario.
    pub fn scalar(target: f64, bound: f64, lower: f64, upper: f64, alpha: f64) -> Result<Self> {
        Self::new(
            vec![Atom {
                target: vec![target],
                bound: vec![bound],
                prob: 1.0,
            }],
            Regularizer::boxed(vec![lower], vec![upper], alpha)?,
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    fn box_bounds(&self) -> Option<(&[f64], &[f64])> {
        match &self.regularizer.domain {
            Domain::Box { lower, upper } => Some((lower, upper)),
            _ => None,
        }
    }

    /// Exact solution of the true problem (all atoms, exact expectation).
    /// Requires a box domain.
    pub fn true_solution(&self) -> Result<(Vec<f64>, f64)> {
        let (lower, upper) = self
            .box_bounds()
            .ok_or_else(|| Error::invalid("closed form needs a box domain"))?;
        let alpha = self.regularizer.quad_weight;
        let mut u = vec![0.0; self.n];
        for j in 0..self.n {
            let mean: f64 = self.atoms.iter().map(|a| a.prob * a.target[j]).sum();
            let cap = self
                .atoms
                .iter()
                .map(|a| a.bound[j])
                .fold(upper[j], f64::min);
            if cap < lower[j] {
                return Err(Error::invalid("true problem is infeasible"));
            }
            u[j] = (mean / (1.0 + alpha)).clamp(lower[j], cap);
        }
        Ok((u.clone(), self.true_objective(&u)))
    }

    /// `F(u) + ψ(u)` with the exact expectation.
    pub fn true_objective(&self, u: &[f64]) -> f64 {
        let f: f64 = self
            .atoms
            .iter()
            .map(|a| {
                a.prob
                    * 0.5
                    * u.iter()
                        .zip(&a.target)
                        .map(|(x, t)| (x - t) * (x - t))
                        .sum::<f64>()
            })
            .sum();
        f + self.regularizer.value(u)
    }

    /// `E[β(G(u,ξ))]` with the exact expectation.
    pub fn true_penalty(&self, u: &[f64]) -> f64 {
        self.atoms
            .iter()
            .map(|a| {
                let over: f64 = u
                    .iter()
                    .zip(&a.bound)
                    .map(|(x, b)| (x - b).max(0.0).powi(2))
                    .sum();
                a.prob * 0.5 * over
            })
            .sum()
    }
}

impl StochasticProgram for QuadraticProgram {
    type Scenario = usize;

    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn observation_dim(&self) -> usize {
        self.n
    }

    fn cone(&self) -> &Cone {
        &self.cone
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    fn sample(&self, seed: u64) -> usize {
        let v: f64 = scenario_rng(seed).random();
        self.cdf
            .iter()
            .position(|&c| v < c)
            .unwrap_or(self.atoms.len() - 1)
    }

    fn observe(&self, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }

    fn observe_adjoint(&self, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    fn integrand(&self, w: &[f64], xi: &usize) -> Result<(f64, Vec<f64>)> {
        let a = &self.atoms[*xi].target;
        let grad: Vec<f64> = w.iter().zip(a).map(|(x, t)| x - t).collect();
        let j = 0.5 * grad.iter().map(|g| g * g).sum::<f64>();
        Ok((j, grad))
    }

    fn constraint_map(&self, w: &[f64], xi: &usize) -> Result<Vec<f64>> {
        Ok(w.iter()
            .zip(&self.atoms[*xi].bound)
            .map(|(x, b)| x - b)
            .collect())
    }

    fn constraint_map_adjoint(&self, _w: &[f64], _xi: &usize, mu: &[f64]) -> Result<Vec<f64>> {
        Ok(mu.to_vec())
    }

    fn lipschitz_g(&self) -> Option<f64> {
        Some(1.0)
    }

    fn scenario_coords(&self, xi: &usize) -> Vec<f64> {
        vec![*xi as f64]
    }

    fn exact_saa(&self, scenarios: &[usize]) -> Option<Result<ExactSaaSolution>> {
        let (lower, upper) = self.box_bounds()?;
        let alpha = self.regularizer.quad_weight;
        let nf = scenarios.len() as f64;
        let mut u = vec![0.0; self.n];
        let mut multipliers = vec![vec![0.0; self.n]; scenarios.len()];
        for j in 0..self.n {
            let mean = scenarios
                .iter()
                .map(|&s| self.atoms[s].target[j])
                .sum::<f64>()
                / nf;
            let tightest = scenarios
                .iter()
                .map(|&s| self.atoms[s].bound[j])
                .fold(f64::INFINITY, f64::min);
            let cap = tightest.min(upper[j]);
            if cap < lower[j] {
                return Some(Err(Error::invalid("SAA problem is infeasible")));
            }
            let free = mean / (1.0 + alpha);
            u[j] = free.clamp(lower[j], cap);
            // multiplier mass λ = ā − (1+α)u* goes to the binding scenarios
            if free > u[j] && tightest <= upper[j] {
                let lambda = mean - (1.0 + alpha) * u[j];
                let active: Vec<usize> = scenarios
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| self.atoms[s].bound[j] == tightest)
                    .map(|(i, _)| i)
                    .collect();
                let share = nf * lambda / active.len() as f64;
                for i in active {
                    multipliers[i][j] = share;
                }
            }
        }
        Some(Ok(ExactSaaSolution { u, multipliers }))
    }
}
