//! The error measure `Φ(s) = min_u max{F(u) + ψ(u) − s, E[β(G(u,ξ))]}`.
//!
//! Expectations use a fixed validation sample. The max is replaced by the
//! softmax `τ log(e^{a/τ} + e^{b/τ})`, minimized by proximal gradient over
//! `dom ψ` for a decreasing sequence of τ, and the exact max is reported at
//! the final point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy, compensated_sum, scale};
use crate::program::{draw_scenarios, ScenarioSet, StochasticProgram};
use crate::prox::{solve_composite, SolverOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhiConfig {
    pub taus: Vec<f64>,
    pub validation_samples: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for PhiConfig {
    fn default() -> Self {
        PhiConfig {
            taus: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            validation_samples: 10_000,
            seed: 0x5eed,
            solver: SolverOptions {
                tol: 1e-9,
                max_iter: 50_000,
                accelerate: true,
                ..Default::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiEstimate {
    pub s: f64,
    pub phi: f64,
    /// `F(u) + ψ(u) − s` at the final point.
    pub objective_gap: f64,
    /// `E[β(G(u,ξ))]` at the final point.
    pub mean_penalty: f64,
    pub u: Vec<f64>,
    pub converged: bool,
}

/// `(F, E β, ∇F, ∇E β)` on a fixed sample.
fn parts<P: StochasticProgram>(
    program: &P,
    set: &ScenarioSet<P::Scenario>,
    u: &[f64],
) -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
    let w = program.observe(u);
    let cone = program.cone();
    let terms: Vec<(f64, f64, Vec<f64>, Vec<f64>)> = set
        .scenarios()
        .par_iter()
        .with_min_len(64)
        .map(|xi| {
            let (j, gj) = program.integrand(&w, xi)?;
            let r = program.constraint_map(&w, xi)?;
            let beta = cone.penalty_beta(&r)?;
            let gb = if beta > 0.0 {
                let d = cone.penalty_beta_grad(&r)?;
                program.constraint_map_adjoint(&w, xi, &d)?
            } else {
                vec![0.0; w.len()]
            };
            Ok((j, beta, gj, gb))
        })
        .collect::<Result<_>>()?;
    let k = w.len();
    let f = compensated_sum(terms.iter().map(|t| t.0));
    let b = compensated_sum(terms.iter().map(|t| t.1));
    let (mut gf, mut gb) = (vec![0.0; k], vec![0.0; k]);
    for (_, _, g1, g2) in &terms {
        axpy(1.0, g1, &mut gf);
        axpy(1.0, g2, &mut gb);
    }
    let inv = 1.0 / set.len() as f64;
    scale(inv, &mut gf);
    scale(inv, &mut gb);
    Ok((f * inv, b * inv, program.observe_adjoint(&gf), program.observe_adjoint(&gb)))
}

/// Estimates `Φ(s)`; the result is clipped at 0.
pub fn estimate_error_measure<P: StochasticProgram>(
    program: &P,
    s: f64,
    cfg: &PhiConfig,
) -> Result<PhiEstimate> {
    if !s.is_finite() {
        return Err(Error::invalid("level s must be finite"));
    }
    if cfg.taus.is_empty() || cfg.taus.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::invalid("smoothing parameters τ must be positive"));
    }
    let set = draw_scenarios(program, cfg.validation_samples, cfg.seed)?;
    let reg = program.regularizer();
    let alpha = reg.quad_weight;
    let indicator = reg.indicator_only();
    let gap = |u: &[f64], f: f64| f + reg.quad_value(u) - s;

    let mut u = reg.project(&vec![0.0; program.dim()])?;
    let mut converged = true;
    for &tau in &cfg.taus {
        let smooth = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let (f, b, gf, gb) = parts(program, &set, x)?;
            let a = gap(x, f);
            let m = a.max(b);
            let ea = ((a - m) / tau).exp();
            let eb = ((b - m) / tau).exp();
            let value = m + tau * (ea + eb).ln();
            let (wa, wb) = (ea / (ea + eb), eb / (ea + eb));
            let grad: Vec<f64> = gf
                .iter()
                .zip(&gb)
                .zip(x)
                .map(|((p, q), xi)| wa * (p + alpha * xi) + wb * q)
                .collect();
            if !value.is_finite() || !all_finite(&grad) {
                return Err(Error::NonFinite("smoothed error measure"));
            }
            Ok((value, grad))
        };
        let r = solve_composite(smooth, &indicator, &u, &cfg.solver)?;
        converged &= r.converged;
        u = r.u_star;
    }
    let (f, b, _, _) = parts(program, &set, &u)?;
    let a = gap(&u, f);
    Ok(PhiEstimate {
        s,
        phi: a.max(b).max(0.0),
        objective_gap: a,
        mean_penalty: b,
        u,
        converged,
    })
}
