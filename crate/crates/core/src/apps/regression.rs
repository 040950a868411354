//! Least-squares regression over a discrete H¹ ball with a nonnegativity
//! constraint at the sample points.
//!
//! The function is represented by its nodal values on a uniform grid of
//! `[0,1]`. The decision `z` lives in coordinates that are orthonormal for the
//! discrete H¹ inner product: `u = Q Λ^{-1/2} z` with `A = Q Λ Qᵀ` the H¹
//! Gram matrix, so the H¹ ball is a round Euclidean ball in `z` and `B`
//! is the map to nodal values.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cones::Cone;
use crate::error::{check_len, Error, Result};
use crate::program::{scenario_rng, ExactSaaSolution, StochasticProgram};
use crate::regularizer::{Domain, Regularizer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressionConfig {
    /// Number of grid nodes, including both endpoints.
    pub grid: usize,
    /// H¹ radius ρ.
    pub radius: f64,
    /// Target `f(x) = offset + amplitude · sin(2πx)`.
    pub offset: f64,
    pub amplitude: f64,
    /// Standard deviation of the Gaussian noise before clipping to `[−1,1]`.
    pub noise_sd: f64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            grid: 33,
            radius: 3.0,
            offset: 0.3,
            amplitude: 0.5,
            noise_sd: 0.2,
        }
    }
}

/// A sampled observation `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug)]
pub struct RegressionProgram {
    cfg: RegressionConfig,
    h: f64,
    gram: DMatrix<f64>,
    /// `B = Q Λ^{-1/2}` and its transpose.
    basis: DMatrix<f64>,
    basis_t: DMatrix<f64>,
    cone: Cone,
    regularizer: Regularizer,
}

/// Discrete H¹ Gram matrix on `n` uniform nodes: lumped trapezoid mass plus
/// the Neumann stiffness matrix.
pub fn h1_gram(n: usize) -> DMatrix<f64> {
    let h = 1.0 / (n - 1) as f64;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let mass = if i == 0 || i == n - 1 { 0.5 * h } else { h };
        a[(i, i)] += mass;
    }
    for i in 0..n - 1 {
        a[(i, i)] += 1.0 / h;
        a[(i + 1, i + 1)] += 1.0 / h;
        a[(i, i + 1)] -= 1.0 / h;
        a[(i + 1, i)] -= 1.0 / h;
    }
    a
}

impl RegressionProgram {
    pub fn new(cfg: RegressionConfig) -> Result<Self> {
        if cfg.grid < 3 {
            return Err(Error::invalid("regression grid needs at least 3 nodes"));
        }
        if !(cfg.radius > 0.0 && cfg.radius.is_finite()) {
            return Err(Error::invalid("Sobolev radius ρ must be positive"));
        }
        if !(cfg.noise_sd >= 0.0 && cfg.noise_sd.is_finite()) {
            return Err(Error::invalid("noise standard deviation must be ≥ 0"));
        }
        let n = cfg.grid;
        let gram = h1_gram(n);
        let eig = SymmetricEigen::new(gram.clone());
        if eig.eigenvalues.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::NonFinite("H¹ Gram matrix is not positive definite"));
        }
        let mut basis = eig.eigenvectors.clone();
        for (j, lambda) in eig.eigenvalues.iter().enumerate() {
            let s = 1.0 / lambda.sqrt();
            basis.column_mut(j).scale_mut(s);
        }
        let basis_t = basis.transpose();
        let regularizer = Regularizer::new(Domain::SobolevBall { radius: cfg.radius }, 0.0)?;
        Ok(RegressionProgram {
            h: 1.0 / (n - 1) as f64,
            cfg,
            gram,
            basis,
            basis_t,
            cone: Cone::Nonnegative(1),
            regularizer,
        })
    }

    pub fn config(&self) -> &RegressionConfig {
        &self.cfg
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.cfg.grid).map(|j| j as f64 * self.h).collect()
    }

    pub fn target(&self, x: f64) -> f64 {
        self.cfg.offset + self.cfg.amplitude * (2.0 * std::f64::consts::PI * x).sin()
    }

    /// Nodal values `u = Bz`.
    pub fn nodal(&self, z: &[f64]) -> Vec<f64> {
        self.observe(z)
    }

    /// Coordinates `z` with `Bz = u`.
    pub fn coordinates(&self, u: &[f64]) -> Vec<f64> {
        // B⁻¹ = Λ^{1/2} Qᵀ = Bᵀ A
        let v = &self.gram * nalgebra::DVector::from_column_slice(u);
        (&self.basis_t * v).as_slice().to_vec()
    }

    /// `‖u‖_{H¹}` of nodal values.
    pub fn h1_norm(&self, u: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(u);
        v.dot(&(&self.gram * &v)).max(0.0).sqrt()
    }

    /// Linear interpolation cell and weight for `x`.
    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.cfg.grid;
        let s = (x.clamp(0.0, 1.0)) / self.h;
        let k = (s.floor() as usize).min(n - 2);
        (k, s - k as f64)
    }

    /// `u(x)` from nodal values.
    pub fn interpolate(&self, u: &[f64], x: f64) -> f64 {
        let (k, t) = self.locate(x);
        (1.0 - t) * u[k] + t * u[k + 1]
    }

    /// Hard-constrained SAA solution.
    ///
    /// `u` is linear on each grid cell, so `u(x_i) ≥ 0` for every sample in a
    /// cell iff it holds at the leftmost and rightmost sample of the cell. The
    /// loss is aggregated into a quadratic `½zᵀHz − cᵀz`, the ball constraint
    /// is dualized with a scalar θ found by bisection, and each inner problem
    /// is solved by a primal active-set method. Only the extreme samples carry
    /// nonzero multipliers.
    pub fn solve_exact(&self, scenarios: &[Observation]) -> Result<ExactSaaSolution> {
        if scenarios.is_empty() {
            return Err(Error::invalid("exact SAA needs at least one scenario"));
        }
        let n = self.cfg.grid;
        let nf = scenarios.len() as f64;
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        let mut extremes: Vec<Option<(usize, usize)>> = vec![None; n - 1];
        for (i, xi) in scenarios.iter().enumerate() {
            let (k, t) = self.locate(xi.x);
            let a = [1.0 - t, t];
            for p in 0..2 {
                b[k + p] += a[p] * xi.y / nf;
                for q in 0..2 {
                    m[(k + p, k + q)] += a[p] * a[q] / nf;
                }
            }
            let e = extremes[k].get_or_insert((i, i));
            if xi.x < scenarios[e.0].x {
                e.0 = i;
            }
            if xi.x > scenarios[e.1].x {
                e.1 = i;
            }
        }
        let mut active: Vec<usize> = extremes.iter().flatten().flat_map(|&(l, r)| [l, r]).collect();
        active.sort_unstable();
        active.dedup();
        let mut rows = DMatrix::<f64>::zeros(active.len(), n);
        for (r, &i) in active.iter().enumerate() {
            let (k, t) = self.locate(scenarios[i].x);
            rows[(r, k)] = 1.0 - t;
            rows[(r, k + 1)] = t;
        }
        let h = &self.basis_t * &m * &self.basis;
        let c = &self.basis_t * &b;
        let a = &rows * &self.basis;

        let radius = self.cfg.radius;
        let scale = h.diagonal().max().max(1.0);
        let mut qp = ActiveSetQp::new(&h, &c, &a);
        let mut theta_lo = 1e-12 * scale;
        let mut best = qp.solve(theta_lo)?;
        if best.0.norm() > radius {
            let mut theta_hi = scale;
            loop {
                best = qp.solve(theta_hi)?;
                if best.0.norm() <= radius {
                    break;
                }
                theta_lo = theta_hi;
                theta_hi *= 10.0;
                if !theta_hi.is_finite() {
                    return Err(Error::NonFinite("ball multiplier"));
                }
            }
            for _ in 0..200 {
                if theta_hi <= theta_lo * (1.0 + 1e-15) {
                    break;
                }
                let mid = (theta_lo * theta_hi).sqrt();
                let trial = qp.solve(mid)?;
                let norm = trial.0.norm();
                if norm <= radius {
                    theta_hi = mid;
                    best = trial;
                    if norm >= radius * (1.0 - 1e-13) {
                        break;
                    }
                } else {
                    theta_lo = mid;
                }
            }
        }
        let (z, lambda) = best;
        let mut multipliers = vec![vec![0.0]; scenarios.len()];
        for (&i, l) in active.iter().zip(lambda.iter()) {
            multipliers[i][0] = -nf * l;
        }
        let u = self.regularizer.project(z.as_slice())?;
        Ok(ExactSaaSolution { u, multipliers })
    }
}

/// `min ½zᵀ(H + θI)z − cᵀz  s.t.  Az ≥ −ε`, warm-started across θ from the
/// previous feasible point and working set. The distinct tiny `ε_j` break the
/// ties at degenerate vertices that otherwise make the active set cycle.
struct ActiveSetQp<'a> {
    h: &'a DMatrix<f64>,
    c: &'a DVector<f64>,
    a: &'a DMatrix<f64>,
    slack: Vec<f64>,
    z: DVector<f64>,
    working: Vec<usize>,
}

impl<'a> ActiveSetQp<'a> {
    fn new(h: &'a DMatrix<f64>, c: &'a DVector<f64>, a: &'a DMatrix<f64>) -> Self {
        let m = a.nrows();
        let slack = (0..m).map(|j| 1e-12 * (1.0 + (j as f64 + 1.0) / m as f64)).collect();
        ActiveSetQp { h, c, a, slack, z: DVector::zeros(h.nrows()), working: Vec::new() }
    }

    /// Returns `(z, λ)` with `λ ≥ 0` the constraint multipliers.
    fn solve(&mut self, theta: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.h.nrows();
        let mc = self.a.nrows();
        let mut hq = self.h.clone();
        for i in 0..n {
            hq[(i, i)] += theta;
        }
        let max_iter = 20 * (n + mc) + 100;
        for _ in 0..max_iter {
            let g = &hq * &self.z - self.c;
            let k = self.working.len();
            let mut kkt = DMatrix::<f64>::zeros(n + k, n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(&hq);
            for (r, &j) in self.working.iter().enumerate() {
                for col in 0..n {
                    kkt[(n + r, col)] = self.a[(j, col)];
                    kkt[(col, n + r)] = -self.a[(j, col)];
                }
            }
            let mut rhs = DVector::<f64>::zeros(n + k);
            rhs.rows_mut(0, n).copy_from(&(-&g));
            let sol = kkt
                .lu()
                .solve(&rhs)
                .filter(|v| v.iter().all(|x| x.is_finite()))
                .ok_or(Error::NonFinite("active-set KKT system"))?;
            let p = sol.rows(0, n).into_owned();
            let ap = self.a * &p;
            let az = self.a * &self.z;
            let mut alpha = 1.0;
            let mut blocking = None;
            let negligible = p.norm() <= 1e-10 * (1.0 + self.z.norm());
            for j in (0..mc).filter(|_| !negligible) {
                if ap[j] < -1e-15 && !self.working.contains(&j) {
                    let step = (az[j] + self.slack[j]).max(0.0) / -ap[j];
                    if step < alpha {
                        alpha = step;
                        blocking = Some(j);
                    }
                }
            }
            if !negligible {
                self.z += alpha * p;
            }
            if let Some(j) = blocking {
                self.working.push(j);
                continue;
            }
            // full step: the multipliers of the solve belong to the new point
            let lam = sol.rows(n, k);
            let (worst, value) = lam
                .iter()
                .enumerate()
                .fold((usize::MAX, 0.0), |acc, (r, &l)| if l < acc.1 { (r, l) } else { acc });
            if worst == usize::MAX || value >= -1e-12 * (1.0 + self.c.norm()) {
                let mut full = DVector::<f64>::zeros(mc);
                for (r, &j) in self.working.iter().enumerate() {
                    full[j] = lam[r].max(0.0);
                }
                return Ok((self.z.clone(), full));
            }
            self.working.remove(worst);
        }
        Err(Error::NoConvergence { solver: "active-set QP", iterations: max_iter, residual: f64::NAN })
    }
}

impl StochasticProgram for RegressionProgram {
    type Scenario = Observation;

    fn name(&self) -> &str {
        "regression"
    }

    fn dim(&self) -> usize {
        self.cfg.grid
    }

    fn observation_dim(&self) -> usize {
        self.cfg.grid
    }

    fn cone(&self) -> &Cone {
        &self.cone
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    fn sample(&self, seed: u64) -> Observation {
        let mut rng = scenario_rng(seed);
        let x: f64 = rng.random();
        let z: f64 = rng.sample(StandardNormal);
        let y = (self.target(x) + self.cfg.noise_sd * z).clamp(-1.0, 1.0);
        Observation { x, y }
    }

    fn observe(&self, z: &[f64]) -> Vec<f64> {
        (&self.basis * nalgebra::DVector::from_column_slice(z))
            .as_slice()
            .to_vec()
    }

    fn observe_adjoint(&self, v: &[f64]) -> Vec<f64> {
        (&self.basis_t * nalgebra::DVector::from_column_slice(v))
            .as_slice()
            .to_vec()
    }

    fn integrand(&self, w: &[f64], xi: &Observation) -> Result<(f64, Vec<f64>)> {
        check_len("nodal values", self.cfg.grid, w.len())?;
        let (k, t) = self.locate(xi.x);
        let r = (1.0 - t) * w[k] + t * w[k + 1] - xi.y;
        let mut g = vec![0.0; w.len()];
        g[k] = (1.0 - t) * r;
        g[k + 1] = t * r;
        Ok((0.5 * r * r, g))
    }

    fn constraint_map(&self, w: &[f64], xi: &Observation) -> Result<Vec<f64>> {
        check_len("nodal values", self.cfg.grid, w.len())?;
        Ok(vec![self.interpolate(w, xi.x)])
    }

    fn constraint_map_adjoint(&self, w: &[f64], xi: &Observation, mu: &[f64]) -> Result<Vec<f64>> {
        check_len("multiplier", 1, mu.len())?;
        let (k, t) = self.locate(xi.x);
        let mut g = vec![0.0; w.len()];
        g[k] = (1.0 - t) * mu[0];
        g[k + 1] = t * mu[0];
        Ok(g)
    }

    /// `|u(x)| ≤ max_j |u_j| ≤ ‖u‖₂`
    fn lipschitz_g(&self) -> Option<f64> {
        Some(1.0)
    }

    fn scenario_coords(&self, xi: &Observation) -> Vec<f64> {
        vec![xi.x, xi.y]
    }

    fn exact_saa(&self, scenarios: &[Observation]) -> Option<Result<ExactSaaSolution>> {
        Some(self.solve_exact(scenarios))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dist, dot, norm};
    use crate::program::{draw_scenarios, saa_objective, ScenarioSet};
    use crate::prox::{check_gradient, solve_composite, SolverOptions};
    use proptest::prelude::*;

    fn program() -> RegressionProgram {
        RegressionProgram::new(RegressionConfig { grid: 9, ..Default::default() }).unwrap()
    }

    #[test]
    fn rejects_bad_config() {
        assert!(RegressionProgram::new(RegressionConfig { radius: 0.0, ..Default::default() }).is_err());
        assert!(RegressionProgram::new(RegressionConfig { grid: 2, ..Default::default() }).is_err());
    }

    #[test]
    fn basis_is_orthonormal_for_h1() {
        let p = program();
        let n = p.dim();
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let u = p.nodal(&e);
            assert!((p.h1_norm(&u) - 1.0).abs() <= 1e-10);
            assert!(dist(&p.coordinates(&u), &e) <= 1e-10);
        }
        // constant 1 has H¹ norm 1 on [0,1]
        assert!((p.h1_norm(&vec![1.0; n]) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_data_gives_zero_loss() {
        let p = program();
        let u = vec![0.0; p.dim()];
        for x in [0.0, 0.3, 0.99, 1.0] {
            let (j, _) = p.integrand(&u, &Observation { x, y: 0.0 }).unwrap();
            assert_eq!(j, 0.0);
        }
    }

    #[test]
    fn single_sample_is_fitted() {
        let p = program();
        let s = ScenarioSet::from_scenarios(vec![Observation { x: 0.5, y: 1.0 }], 0).unwrap();
        let f = |z: &[f64]| saa_objective(&p, &s, z);
        let r = solve_composite(f, p.regularizer(), &vec![0.0; p.dim()],
            &SolverOptions { tol: 1e-10, ..Default::default() }).unwrap();
        let u = p.nodal(&r.u_star);
        assert!((p.interpolate(&u, 0.5) - 1.0).abs() <= 1e-8);
        assert!(p.h1_norm(&u) <= p.config().radius + 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = program();
        let s = draw_scenarios(&p, 5, 2).unwrap();
        let f = |z: &[f64]| saa_objective(&p, &s, z);
        let z: Vec<f64> = (0..p.dim()).map(|i| 0.1 * (i as f64).sin()).collect();
        assert!(check_gradient(f, &z, 1e-6).unwrap() <= 1e-6);
    }

    #[test]
    fn samples_are_in_range() {
        let p = program();
        for seed in 0..200 {
            let o = p.sample(seed);
            assert!((0.0..1.0).contains(&o.x) && (-1.0..=1.0).contains(&o.y));
        }
    }

    #[test]
    fn exact_oracle_satisfies_kkt() {
        let p = program();
        let s = draw_scenarios(&p, 200, 3).unwrap();
        let sol = p.solve_exact(s.scenarios()).unwrap();
        let rep = crate::kkt::kkt_report(&p, &s, &sol.u, &sol.multipliers, None).unwrap();
        assert!(rep.stationarity <= 1e-8, "{rep:?}");
        assert!(rep.primal_feasibility <= 1e-9 && rep.complementarity <= 1e-9, "{rep:?}");
        assert!(sol.multipliers.iter().any(|m| m[0] < 0.0));
    }

    proptest! {
        #[test]
        fn projection_is_norm_correct(z in prop::collection::vec(-5.0..5.0f64, 9)) {
            let p = program();
            let pz = p.regularizer().project(&z).unwrap();
            let u = p.nodal(&pz);
            prop_assert!(p.h1_norm(&u) <= p.config().radius + 1e-10);
            let again = p.regularizer().project(&pz).unwrap();
            prop_assert!(dist(&again, &pz) <= 1e-12);
            // adjoint identity ⟨Bz, v⟩ = ⟨z, B*v⟩
            let v: Vec<f64> = z.iter().rev().cloned().collect();
            prop_assert!((dot(&p.observe(&z), &v) - dot(&z, &p.observe_adjoint(&v))).abs()
                <= 1e-10 * (1.0 + norm(&z) * norm(&v)));
        }
    }
}
