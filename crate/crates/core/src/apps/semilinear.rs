//! Distributed control of `−(κ(x;ξ) y′)′ + y³ = u` on `(0,1)` with
//! homogeneous Dirichlet conditions and the pointwise state constraint
//! `y ≤ y_max`.
//!
//! Finite differences on `n` interior nodes with `κ` evaluated at cell
//! midpoints; the state equation is solved by damped Newton and the
//! gradient by the adjoint of the linearized operator `A_ξ + 3 diag(y²)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cones::Cone;
use crate::error::{check_len, Error, Result};
use crate::linalg::{norm_inf, solve_tridiagonal};
use crate::program::{scenario_rng, PenalizedTerm, StochasticProgram};
use crate::regularizer::Regularizer;

pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemilinearConfig {
    /// Interior grid nodes.
    pub nodes: usize,
    pub kappa0: f64,
    /// Number of sine modes in `κ`.
    pub modes: usize,
    /// `ξⱼ ~ U[−a, a]`.
    pub mode_amplitude: f64,
    /// `y_d(x) = target_amplitude · sin(πx)`
    pub target_amplitude: f64,
    /// Constant state bound.
    pub y_max: f64,
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Default for SemilinearConfig {
    fn default() -> Self {
        SemilinearConfig {
            nodes: 63,
            kappa0: 1.0,
            modes: 3,
            mode_amplitude: 0.2,
            target_amplitude: 1.0,
            y_max: 0.5,
            alpha: 1e-3,
            lower: -20.0,
            upper: 20.0,
        }
    }
}

/// Sampled diffusion coefficients `ξ ∈ [−a,a]^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients(pub Vec<f64>);

#[derive(Clone, Debug)]
pub struct SemilinearProgram {
    cfg: SemilinearConfig,
    h: f64,
    y_d: Vec<f64>,
    y_max: Vec<f64>,
    kappa_min: f64,
    kappa_max: f64,
    cone: Cone,
    regularizer: Regularizer,
}

/// Tridiagonal stiffness `A_ξ` as `(lower, diag, upper)`.
struct Stiffness {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Stiffness {
    fn apply(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * y[i];
                if i > 0 {
                    v += self.lower[i] * y[i - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * y[i + 1];
                }
                v
            })
            .collect()
    }

    /// Solves `(A + diag(d)) x = rhs`.
    fn solve_shifted(&self, d: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let diag: Vec<f64> = self.diag.iter().zip(d).map(|(a, b)| a + b).collect();
        let n = diag.len();
        let x = solve_tridiagonal(&self.lower[1..], &diag, &self.upper[..n - 1], rhs);
        if !crate::linalg::all_finite(&x) {
            return Err(Error::NonFinite("linearized state solve"));
        }
        Ok(x)
    }
}

impl SemilinearProgram {
    pub fn new(cfg: SemilinearConfig) -> Result<Self> {
        if cfg.nodes < 2 {
            return Err(Error::invalid("PDE grid needs at least 2 interior nodes"));
        }
        if !(cfg.alpha > 0.0) {
            return Err(Error::invalid("control cost α must be positive"));
        }
        if !(cfg.y_max > 0.0) {
            return Err(Error::invalid("state bound y_max must be positive"));
        }
        if !(cfg.lower <= 0.0 && 0.0 <= cfg.upper) {
            return Err(Error::invalid("control box must contain 0"));
        }
        if !(cfg.mode_amplitude >= 0.0) {
            return Err(Error::invalid("mode amplitude must be ≥ 0"));
        }
        let kappa_min = cfg.kappa0 - cfg.modes as f64 * cfg.mode_amplitude;
        let kappa_max = cfg.kappa0 + cfg.modes as f64 * cfg.mode_amplitude;
        if !(kappa_min > 0.0) {
            return Err(Error::invalid("κ₀ − m·a must be positive so that κ ≥ κ_min > 0"));
        }
        let n = cfg.nodes;
        let h = 1.0 / (n + 1) as f64;
        let y_d = (1..=n)
            .map(|i| cfg.target_amplitude * (std::f64::consts::PI * i as f64 * h).sin())
            .collect();
        let regularizer = Regularizer::boxed(vec![cfg.lower; n], vec![cfg.upper; n], cfg.alpha * h)?;
        let prog = SemilinearProgram {
            h,
            y_d,
            y_max: vec![cfg.y_max; n],
            kappa_min,
            kappa_max,
            cone: Cone::Nonpositive(n),
            regularizer,
            cfg,
        };
        prog.check_coefficient_bounds()?;
        Ok(prog)
    }

    /// Verifies `κ_min ≤ κ ≤ κ_max` at the corners of the ξ box on the grid.
    fn check_coefficient_bounds(&self) -> Result<()> {
        let m = self.cfg.modes;
        let a = self.cfg.mode_amplitude;
        for corner in 0..(1usize << m.min(12)) {
            let xi: Vec<f64> = (0..m)
                .map(|j| if corner >> j & 1 == 1 { a } else { -a })
                .collect();
            for i in 0..=self.cfg.nodes + 1 {
                let k = self.kappa(i as f64 * self.h, &xi);
                if k < self.kappa_min - 1e-12 || k > self.kappa_max + 1e-12 {
                    return Err(Error::invalid("κ leaves [κ_min, κ_max]"));
                }
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &SemilinearConfig {
        &self.cfg
    }

    pub fn mesh_width(&self) -> f64 {
        self.h
    }

    pub fn kappa_bounds(&self) -> (f64, f64) {
        (self.kappa_min, self.kappa_max)
    }

    pub fn desired_state(&self) -> &[f64] {
        &self.y_d
    }

    pub fn kappa(&self, x: f64, xi: &[f64]) -> f64 {
        self.cfg.kappa0
            + xi.iter()
                .enumerate()
                .map(|(j, c)| c * ((j + 1) as f64 * std::f64::consts::PI * x).sin())
                .sum::<f64>()
    }

    /// `κ(·;ξ)` at the cell midpoints `x_{i+1/2}`, `i = 0..=n`.
    pub fn kappa_midpoints(&self, xi: &[f64]) -> Vec<f64> {
        (0..=self.cfg.nodes)
            .map(|i| self.kappa((i as f64 + 0.5) * self.h, xi))
            .collect()
    }

    fn stiffness(&self, xi: &[f64]) -> Stiffness {
        self.stiffness_from_midpoints(&self.kappa_midpoints(xi))
    }

    fn stiffness_from_midpoints(&self, k: &[f64]) -> Stiffness {
        let n = self.cfg.nodes;
        let s = 1.0 / (self.h * self.h);
        Stiffness {
            lower: (0..n).map(|i| -s * k[i]).collect(),
            diag: (0..n).map(|i| s * (k[i] + k[i + 1])).collect(),
            upper: (0..n).map(|i| -s * k[i + 1]).collect(),
        }
    }

    /// Solves `A_κ y + y³ = u` for explicit midpoint values of κ.
    pub fn solve_state_with_kappa(&self, u: &[f64], kappa_mid: &[f64]) -> Result<Vec<f64>> {
        check_len("control", self.cfg.nodes, u.len())?;
        check_len("κ midpoints", self.cfg.nodes + 1, kappa_mid.len())?;
        if kappa_mid.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::invalid("κ must be positive on the grid"));
        }
        self.newton(u, &self.stiffness_from_midpoints(kappa_mid))
    }

    /// `y(u, ξ)`
    pub fn solve_state(&self, u: &[f64], xi: &Coefficients) -> Result<Vec<f64>> {
        check_len("control", self.cfg.nodes, u.len())?;
        self.newton(u, &self.stiffness(&xi.0))
    }

    fn residual(&self, a: &Stiffness, y: &[f64], u: &[f64]) -> Vec<f64> {
        a.apply(y)
            .iter()
            .zip(y)
            .zip(u)
            .map(|((ay, yi), ui)| ay + yi * yi * yi - ui)
            .collect()
    }

    fn newton(&self, u: &[f64], a: &Stiffness) -> Result<Vec<f64>> {
        let n = u.len();
        let mut y = vec![0.0; n];
        let tol = NEWTON_TOL * (1.0 + norm_inf(u));
        let mut r = self.residual(a, &y, u);
        let mut rn = norm_inf(&r);
        for _ in 0..NEWTON_MAX_ITER {
            if rn <= tol {
                return Ok(y);
            }
            let d: Vec<f64> = y.iter().map(|v| 3.0 * v * v).collect();
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let step = a.solve_shifted(&d, &neg)?;
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a + t * b).collect();
                let rt = self.residual(a, &trial, u);
                let rtn = norm_inf(&rt);
                if rtn < rn || t < 1e-8 {
                    y = trial;
                    r = rt;
                    rn = rtn;
                    break;
                }
                t *= 0.5;
            }
        }
        if rn <= tol {
            return Ok(y);
        }
        Err(Error::NoConvergence {
            solver: "state Newton",
            iterations: NEWTON_MAX_ITER,
            residual: rn,
        })
    }

    /// Discrete `‖y′‖_{L²}` with zero boundary values.
    pub fn grad_norm(&self, y: &[f64]) -> f64 {
        let n = y.len();
        let mut s = 0.0;
        for i in 0..=n {
            let left = if i == 0 { 0.0 } else { y[i - 1] };
            let right = if i == n { 0.0 } else { y[i] };
            s += (right - left) * (right - left);
        }
        (s / self.h).sqrt()
    }

    /// Discrete `‖y‖_{H¹} = (‖y‖²_{L²} + ‖y′‖²_{L²})^{1/2}`.
    pub fn h1_norm(&self, y: &[f64]) -> f64 {
        let l2: f64 = self.h * y.iter().map(|v| v * v).sum::<f64>();
        let g = self.grad_norm(y);
        (l2 + g * g).sqrt()
    }

    /// Constant `c = κ_min / (1 + C_p²)` of the stability estimate
    /// `c‖y(ξ′) − y(ξ)‖_{H¹} ≤ max|κ(ξ′) − κ(ξ)| · ‖y(ξ)′‖`, with the discrete
    /// Poincaré constant `C_p² = 1/λ₁` and `λ₁ = (4/h²) sin²(πh/2)`.
    pub fn regularity_constant(&self) -> f64 {
        let s = (std::f64::consts::PI * self.h / 2.0).sin();
        let lambda1 = 4.0 * s * s / (self.h * self.h);
        self.kappa_min / (1.0 + 1.0 / lambda1)
    }

    fn state_and_adjoint(
        &self,
        w: &[f64],
        xi: &Coefficients,
        gamma: f64,
    ) -> Result<(Vec<f64>, f64, f64, Vec<f64>)> {
        let a = self.stiffness(&xi.0);
        let y = self.newton(w, &a)?;
        let mut j = 0.0;
        let mut beta = 0.0;
        let mut rhs = vec![0.0; y.len()];
        for i in 0..y.len() {
            let e = y[i] - self.y_d[i];
            j += 0.5 * self.h * e * e;
            rhs[i] = self.h * e;
            let over = (y[i] - self.y_max[i]).max(0.0);
            beta += 0.5 * over * over;
            rhs[i] += gamma * over;
        }
        let d: Vec<f64> = y.iter().map(|v| 3.0 * v * v).collect();
        let p = a.solve_shifted(&d, &rhs)?;
        Ok((y, j, beta, p))
    }
}

impl StochasticProgram for SemilinearProgram {
    type Scenario = Coefficients;

    fn name(&self) -> &str {
        "semilinear"
    }

    fn dim(&self) -> usize {
        self.cfg.nodes
    }

    fn observation_dim(&self) -> usize {
        self.cfg.nodes
    }

    fn cone(&self) -> &Cone {
        &self.cone
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    fn sample(&self, seed: u64) -> Coefficients {
        let mut rng = scenario_rng(seed);
        let a = self.cfg.mode_amplitude;
        Coefficients(
            (0..self.cfg.modes)
                .map(|_| a * (2.0 * rng.random::<f64>() - 1.0))
                .collect(),
        )
    }

    fn observe(&self, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }

    fn observe_adjoint(&self, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    fn integrand(&self, w: &[f64], xi: &Coefficients) -> Result<(f64, Vec<f64>)> {
        let (_, j, _, p) = self.state_and_adjoint(w, xi, 0.0)?;
        Ok((j, p))
    }

    fn constraint_map(&self, w: &[f64], xi: &Coefficients) -> Result<Vec<f64>> {
        let y = self.solve_state(w, xi)?;
        Ok(y.iter().zip(&self.y_max).map(|(a, b)| a - b).collect())
    }

    fn constraint_map_adjoint(&self, w: &[f64], xi: &Coefficients, mu: &[f64]) -> Result<Vec<f64>> {
        check_len("multiplier", self.cfg.nodes, mu.len())?;
        let a = self.stiffness(&xi.0);
        let y = self.newton(w, &a)?;
        let d: Vec<f64> = y.iter().map(|v| 3.0 * v * v).collect();
        a.solve_shifted(&d, mu)
    }

    fn penalized_term(&self, w: &[f64], xi: &Coefficients, gamma: f64) -> Result<PenalizedTerm> {
        let (_, j, beta, grad_w) = self.state_and_adjoint(w, xi, gamma)?;
        Ok(PenalizedTerm { j, beta, grad_w })
    }

    fn scenario_coords(&self, xi: &Coefficients) -> Vec<f64> {
        xi.0.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fit_slope;
    use crate::program::{draw_scenarios, saa_objective, ScenarioSet};
    use crate::prox::check_gradient;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn program(nodes: usize) -> SemilinearProgram {
        SemilinearProgram::new(SemilinearConfig { nodes, ..Default::default() }).unwrap()
    }

    #[test]
    fn zero_control_gives_zero_state() {
        let p = program(15);
        let xi = p.sample(3);
        assert_eq!(p.solve_state(&[0.0; 15], &xi).unwrap(), vec![0.0; 15]);
    }

    #[test]
    fn rejects_degenerate_coefficients() {
        let cfg = SemilinearConfig { mode_amplitude: 0.4, ..Default::default() };
        assert!(SemilinearProgram::new(cfg).is_err());
    }

    #[test]
    fn manufactured_solution_is_second_order() {
        use std::f64::consts::PI;
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        for n in [15usize, 31, 63, 127] {
            let p = program(n);
            let h = p.mesh_width();
            let xs: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
            let u: Vec<f64> = xs
                .iter()
                .map(|x| PI * PI * (PI * x).sin() + (PI * x).sin().powi(3))
                .collect();
            let y = p.solve_state_with_kappa(&u, &vec![1.0; n + 1]).unwrap();
            let err = xs
                .iter()
                .zip(&y)
                .map(|(x, yi)| (yi - (PI * x).sin()).abs())
                .fold(0.0, f64::max);
            hs.push(h.ln());
            errs.push(err.ln());
        }
        let order = fit_slope(&hs, &errs);
        assert!((1.8..=2.2).contains(&order), "observed order {order}");
    }

    #[test]
    fn state_is_monotone_in_control() {
        let p = program(31);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in 0..20 {
            let xi = p.sample(k);
            let u1: Vec<f64> = (0..31).map(|_| rng.random_range(-10.0..10.0)).collect();
            let u2: Vec<f64> = u1.iter().map(|v| v + rng.random_range(0.0..3.0)).collect();
            let y1 = p.solve_state(&u1, &xi).unwrap();
            let y2 = p.solve_state(&u2, &xi).unwrap();
            assert!(y1.iter().zip(&y2).all(|(a, b)| *a <= *b + 1e-12));
        }
    }

    #[test]
    fn adjoint_gradient_matches_finite_differences() {
        let p = program(31);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 0..5 {
            let set = ScenarioSet::from_scenarios(vec![p.sample(k)], 0).unwrap();
            let u: Vec<f64> = (0..31).map(|_| rng.random_range(-10.0..10.0)).collect();
            let err = check_gradient(|u: &[f64]| saa_objective(&p, &set, u), &u, 1e-5).unwrap();
            assert!(err <= 1e-4, "relative error {err}");
        }
    }

    #[test]
    fn zero_target_has_zero_optimum() {
        let p = SemilinearProgram::new(SemilinearConfig {
            nodes: 15,
            target_amplitude: 0.0,
            y_max: 100.0,
            ..Default::default()
        })
        .unwrap();
        let set = draw_scenarios(&p, 4, 0).unwrap();
        let (f, g) = saa_objective(&p, &set, &[0.0; 15]).unwrap();
        assert_eq!(f, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }
}
