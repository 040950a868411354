//! Kantorovich potentials on a finite metric space.
//!
//! `min E[2ρ − u₁(x₁) − u₂(x₂)]` over `‖u‖∞ ≤ ρ` subject to
//! `u₁(x₁) + u₂(x₂) ≤ c(x₁,x₂)` almost surely, with `(x₁,x₂) ~ P₁ ⊗ P₂`.
//! The optimal value is `2ρ − W_c(P₁,P₂)` whenever the box contains a true
//! pair of potentials.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cones::Cone;
use crate::error::{check_len, Error, Result};
use crate::program::{scenario_rng, ExactSaaSolution, StochasticProgram};
use crate::regularizer::{Domain, Regularizer};

const METRIC_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KantorovichConfig {
    /// Atom positions on the line; the pairwise distance is `|xᵢ − xⱼ|`.
    pub positions: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_radius() -> f64 {
    2.0
}

impl Default for KantorovichConfig {
    fn default() -> Self {
        KantorovichConfig {
            positions: vec![0.0, 0.4, 1.1, 1.5, 2.0],
            p1: vec![0.4, 0.2, 0.2, 0.1, 0.1],
            p2: vec![0.1, 0.1, 0.2, 0.2, 0.4],
            radius: 2.0,
        }
    }
}

/// A sampled pair of atom indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    pub a: usize,
    pub b: usize,
}

#[derive(Clone, Debug)]
pub struct KantorovichProgram {
    m: usize,
    dist: Vec<Vec<f64>>,
    cost: Vec<Vec<f64>>,
    p1: Vec<f64>,
    p2: Vec<f64>,
    cdf1: Vec<f64>,
    cdf2: Vec<f64>,
    positions: Option<Vec<f64>>,
    cone: Cone,
    regularizer: Regularizer,
}

fn check_probabilities(p: &[f64], m: usize, what: &str) -> Result<Vec<f64>> {
    check_len("marginal", m, p.len())?;
    if p.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
        return Err(Error::invalid(format!("{what} has a negative or non-finite weight")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("{what} sums to {total}, not 1")));
    }
    let mut acc = 0.0;
    Ok(p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect())
}

fn check_metric(d: &[Vec<f64>]) -> Result<()> {
    let m = d.len();
    for (i, row) in d.iter().enumerate() {
        check_len("distance matrix row", m, row.len())?;
        if row[i] != 0.0 {
            return Err(Error::invalid("distance matrix must have zero diagonal"));
        }
        for j in 0..m {
            if !(row[j] >= 0.0 && row[j].is_finite()) || (row[j] - d[j][i]).abs() > METRIC_TOL {
                return Err(Error::invalid("distance matrix must be symmetric, finite and ≥ 0"));
            }
            if i != j && row[j] == 0.0 {
                return Err(Error::invalid("distinct atoms must have positive distance"));
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                if d[i][k] > d[i][j] + d[j][k] + METRIC_TOL {
                    return Err(Error::invalid(format!(
                        "triangle inequality fails for atoms {i}, {j}, {k}"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn pick(cdf: &[f64], v: f64) -> usize {
    cdf.iter().position(|&c| v < c).unwrap_or(cdf.len() - 1)
}

impl KantorovichProgram {
    /// General metric space with cost equal to the distance. Distances are
    /// rescaled so that the diameter is at most 2.
    pub fn new(dist: Vec<Vec<f64>>, p1: Vec<f64>, p2: Vec<f64>, radius: f64) -> Result<Self> {
        let m = dist.len();
        if m < 2 {
            return Err(Error::invalid("need at least two atoms"));
        }
        check_metric(&dist)?;
        let diameter = dist.iter().flatten().cloned().fold(0.0, f64::max);
        let dist = if diameter > 2.0 {
            let s = 2.0 / diameter;
            dist.iter()
                .map(|r| r.iter().map(|x| x * s).collect())
                .collect()
        } else {
            dist
        };
        let cost = dist.clone();
        Self::with_cost(dist, cost, p1, p2, radius)
    }

    /// Explicit cost matrix; must be nonnegative and 1-Lipschitz in each
    /// argument for the given distance.
    pub fn with_cost(
        dist: Vec<Vec<f64>>,
        cost: Vec<Vec<f64>>,
        p1: Vec<f64>,
        p2: Vec<f64>,
        radius: f64,
    ) -> Result<Self> {
        let m = dist.len();
        check_metric(&dist)?;
        check_len("cost matrix", m, cost.len())?;
        for row in &cost {
            check_len("cost matrix row", m, row.len())?;
            if row.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
                return Err(Error::invalid("cost must be finite and ≥ 0"));
            }
        }
        let cdf1 = check_probabilities(&p1, m, "P1")?;
        let cdf2 = check_probabilities(&p2, m, "P2")?;
        let regularizer = Regularizer::new(Domain::SupNormBox { radius }, 0.0)?;
        Ok(KantorovichProgram {
            m,
            dist,
            cost,
            p1,
            p2,
            cdf1,
            cdf2,
            positions: None,
            cone: Cone::Nonpositive(1),
            regularizer,
        })
    }

    /// Atoms on the real line with `c(x,y) = |x − y|`, positions rescaled to
    /// diameter at most 2.
    pub fn on_line(positions: Vec<f64>, p1: Vec<f64>, p2: Vec<f64>, radius: f64) -> Result<Self> {
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("atom positions must be finite"));
        }
        let lo = positions.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = positions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s = if hi - lo > 2.0 { 2.0 / (hi - lo) } else { 1.0 };
        let scaled: Vec<f64> = positions.iter().map(|x| (x - lo) * s + lo).collect();
        let dist = scaled
            .iter()
            .map(|x| scaled.iter().map(|y| (x - y).abs()).collect())
            .collect();
        let mut p = Self::new(dist, p1, p2, radius)?;
        p.positions = Some(scaled);
        Ok(p)
    }

    pub fn from_config(cfg: &KantorovichConfig) -> Result<Self> {
        Self::on_line(cfg.positions.clone(), cfg.p1.clone(), cfg.p2.clone(), cfg.radius)
    }

    pub fn atoms(&self) -> usize {
        self.m
    }

    pub fn distances(&self) -> &[Vec<f64>] {
        &self.dist
    }

    pub fn cost(&self) -> &[Vec<f64>] {
        &self.cost
    }

    pub fn marginals(&self) -> (&[f64], &[f64]) {
        (&self.p1, &self.p2)
    }

    /// Rescaled positions, for line instances.
    pub fn positions(&self) -> Option<&[f64]> {
        self.positions.as_deref()
    }

    pub fn radius(&self) -> f64 {
        match self.regularizer.domain {
            Domain::SupNormBox { radius } => radius,
            _ => unreachable!("Kantorovich programs use a sup-norm box"),
        }
    }

    /// Every pair `(a,b)` repeated `D²·p₁(a)·p₂(b)` times, so that the
    /// empirical marginals equal `P₁, P₂` exactly. Requires `D·pᵢ` integral.
    pub fn product_design(&self, denominator: usize) -> Result<Vec<Pair>> {
        let d = denominator as f64;
        let counts = |p: &[f64]| -> Result<Vec<usize>> {
            p.iter()
                .map(|x| {
                    let c = x * d;
                    if (c - c.round()).abs() > 1e-9 {
                        Err(Error::invalid("marginal weights are not multiples of 1/D"))
                    } else {
                        Ok(c.round() as usize)
                    }
                })
                .collect()
        };
        let c1 = counts(&self.p1)?;
        let c2 = counts(&self.p2)?;
        let mut pairs = Vec::new();
        for a in 0..self.m {
            for b in 0..self.m {
                for _ in 0..c1[a] * c2[b] {
                    pairs.push(Pair { a, b });
                }
            }
        }
        Ok(pairs)
    }

    /// Potentials `(u₁, u₂)` flattened into one decision vector.
    pub fn split<'a>(&self, u: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        u.split_at(self.m)
    }
}

/// `W₁ = ∫|F₁ − F₂|` for measures on the line.
pub fn w1_on_line(positions: &[f64], p1: &[f64], p2: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&i, &j| positions[i].total_cmp(&positions[j]));
    let mut f1 = 0.0;
    let mut f2 = 0.0;
    let mut total = 0.0;
    for w in order.windows(2) {
        f1 += p1[w[0]];
        f2 += p2[w[0]];
        total += (f1 - f2).abs() * (positions[w[1]] - positions[w[0]]);
    }
    total
}

fn lp_error(e: impl std::fmt::Display) -> Error {
    Error::LinearProgram(e.to_string())
}

/// Optimal primal potentials and transport plan of the LP restricted to the
/// given pairs, with empirical marginal weights.
pub struct RestrictedLp {
    pub potentials: Vec<f64>,
    /// `(pair, π_pair)` for each distinct pair.
    pub plan: Vec<(Pair, f64)>,
    /// `max Σ p̂₁u₁ + Σ p̂₂u₂`
    pub dual_value: f64,
    pub primal_value: f64,
}

pub fn solve_restricted_lp(prog: &KantorovichProgram, scenarios: &[Pair]) -> Result<RestrictedLp> {
    if scenarios.is_empty() {
        return Err(Error::invalid("scenario set must be nonempty"));
    }
    let m = prog.m;
    let rho = prog.radius();
    let nf = scenarios.len() as f64;
    let mut w1 = vec![0.0; m];
    let mut w2 = vec![0.0; m];
    for s in scenarios {
        w1[s.a] += 1.0 / nf;
        w2[s.b] += 1.0 / nf;
    }
    let mut pairs: Vec<Pair> = scenarios.to_vec();
    pairs.sort();
    pairs.dedup();

    // potentials: max Σ w₁u₁ + Σ w₂u₂ s.t. u₁[a] + u₂[b] ≤ c_ab on sampled pairs
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let u1: Vec<_> = w1.iter().map(|w| lp.add_var(*w, (-rho, rho))).collect();
    let u2: Vec<_> = w2.iter().map(|w| lp.add_var(*w, (-rho, rho))).collect();
    for p in &pairs {
        lp.add_constraint([(u1[p.a], 1.0), (u2[p.b], 1.0)], ComparisonOp::Le, prog.cost[p.a][p.b]);
    }
    let sol = lp
        .solve()
        .map_err(lp_error)?
        .into_solution()
        .map_err(|_| Error::LinearProgram("potential LP was interrupted".into()))?;
    let potentials: Vec<f64> = u1.iter().chain(&u2).map(|v| sol.var_value(*v)).collect();
    let dual_value = sol.objective();

    // plan: min Σ c π + ρ Σ (s⁺ + s⁻) s.t. marginals of π plus slacks equal w
    let mut tp = Problem::new(OptimizationDirection::Minimize);
    let pi: Vec<_> = pairs
        .iter()
        .map(|p| tp.add_var(prog.cost[p.a][p.b], (0.0, f64::INFINITY)))
        .collect();
    for (side, w) in [(0usize, &w1), (1, &w2)] {
        for (k, wk) in w.iter().enumerate() {
            let sp = tp.add_var(rho, (0.0, f64::INFINITY));
            let sm = tp.add_var(rho, (0.0, f64::INFINITY));
            let mut terms: Vec<(microlp::Variable, f64)> = pairs
                .iter()
                .zip(&pi)
                .filter(|(p, _)| if side == 0 { p.a == k } else { p.b == k })
                .map(|(_, v)| (*v, 1.0))
                .collect();
            terms.push((sp, 1.0));
            terms.push((sm, -1.0));
            tp.add_constraint(terms, ComparisonOp::Eq, *wk);
        }
    }
    let tsol = tp
        .solve()
        .map_err(lp_error)?
        .into_solution()
        .map_err(|_| Error::LinearProgram("transport LP was interrupted".into()))?;
    let primal_value = tsol.objective();
    if (primal_value - dual_value).abs() > 1e-8 * (1.0 + dual_value.abs()) {
        return Err(Error::LinearProgram(format!(
            "duality gap {} between potential and transport LPs",
            primal_value - dual_value
        )));
    }
    let plan = pairs
        .iter()
        .zip(&pi)
        .map(|(p, v)| (*p, tsol.var_value(*v).max(0.0)))
        .collect();
    Ok(RestrictedLp {
        potentials,
        plan,
        dual_value,
        primal_value,
    })
}

impl StochasticProgram for KantorovichProgram {
    type Scenario = Pair;

    fn name(&self) -> &str {
        "kantorovich"
    }

    fn dim(&self) -> usize {
        2 * self.m
    }

    fn observation_dim(&self) -> usize {
        2 * self.m
    }

    fn cone(&self) -> &Cone {
        &self.cone
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    fn sample(&self, seed: u64) -> Pair {
        let mut rng = scenario_rng(seed);
        let a = pick(&self.cdf1, rng.random());
        let b = pick(&self.cdf2, rng.random());
        Pair { a, b }
    }

    fn observe(&self, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }

    fn observe_adjoint(&self, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    fn integrand(&self, w: &[f64], xi: &Pair) -> Result<(f64, Vec<f64>)> {
        check_len("potentials", 2 * self.m, w.len())?;
        let j = 2.0 * self.radius() - w[xi.a] - w[self.m + xi.b];
        let mut g = vec![0.0; w.len()];
        g[xi.a] = -1.0;
        g[self.m + xi.b] = -1.0;
        Ok((j, g))
    }

    fn constraint_map(&self, w: &[f64], xi: &Pair) -> Result<Vec<f64>> {
        check_len("potentials", 2 * self.m, w.len())?;
        Ok(vec![w[xi.a] + w[self.m + xi.b] - self.cost[xi.a][xi.b]])
    }

    fn constraint_map_adjoint(&self, w: &[f64], xi: &Pair, mu: &[f64]) -> Result<Vec<f64>> {
        check_len("multiplier", 1, mu.len())?;
        let mut g = vec![0.0; w.len()];
        g[xi.a] = mu[0];
        g[self.m + xi.b] = mu[0];
        Ok(g)
    }

    /// `|Δu₁(a) + Δu₂(b)| ≤ √2 ‖Δu‖₂`
    fn lipschitz_g(&self) -> Option<f64> {
        Some(std::f64::consts::SQRT_2)
    }

    fn scenario_coords(&self, xi: &Pair) -> Vec<f64> {
        vec![xi.a as f64, xi.b as f64]
    }

    /// LP potentials with multipliers `μᵢ = N π_{ab} / #{j : ξʲ = (a,b)}`.
    fn exact_saa(&self, scenarios: &[Pair]) -> Option<Result<ExactSaaSolution>> {
        Some(solve_restricted_lp(self, scenarios).map(|lp| {
            let nf = scenarios.len() as f64;
            let lookup = |p: &Pair| {
                let mult = scenarios.iter().filter(|q| *q == p).count() as f64;
                let pi = lp
                    .plan
                    .iter()
                    .find(|(q, _)| q == p)
                    .map(|(_, v)| *v)
                    .unwrap_or(0.0);
                nf * pi / mult
            };
            ExactSaaSolution {
                multipliers: scenarios.iter().map(|p| vec![lookup(p)]).collect(),
                u: lp.potentials,
            }
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kkt::kkt_report;
    use crate::program::{saa_objective, ScenarioSet};
    use crate::prox::check_gradient;

    #[test]
    fn two_point_transport() {
        let p = KantorovichProgram::on_line(vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0], 2.0)
            .unwrap();
        let set = p.product_design(1).unwrap();
        assert_eq!(set, vec![Pair { a: 0, b: 1 }]);
        let lp = solve_restricted_lp(&p, &set).unwrap();
        assert!((lp.dual_value - 1.0).abs() <= 1e-9);
        assert!((w1_on_line(&[0.0, 1.0], &[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn identical_marginals_cost_nothing() {
        let pr = vec![0.25, 0.25, 0.5];
        let p = KantorovichProgram::on_line(vec![0.0, 0.5, 1.0], pr.clone(), pr, 2.0).unwrap();
        let lp = solve_restricted_lp(&p, &p.product_design(4).unwrap()).unwrap();
        assert!(lp.dual_value.abs() <= 1e-9);
    }

    #[test]
    fn rescales_and_validates_metric() {
        let p = KantorovichProgram::on_line(vec![0.0, 4.0], vec![0.5, 0.5], vec![0.5, 0.5], 2.0)
            .unwrap();
        assert_eq!(p.distances()[0][1], 2.0);
        let bad = vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]];
        assert!(KantorovichProgram::new(bad, vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0], 2.0).is_err());
        assert!(KantorovichProgram::on_line(vec![0.0, 1.0], vec![0.7, 0.7], vec![0.5, 0.5], 2.0)
            .is_err());
    }

    #[test]
    fn lp_optimum_satisfies_kkt() {
        let p = KantorovichProgram::from_config(&KantorovichConfig::default()).unwrap();
        let pairs = p.product_design(10).unwrap();
        let exact = p.exact_saa(&pairs).unwrap().unwrap();
        let set = ScenarioSet::from_scenarios(pairs, 0).unwrap();
        let rep = kkt_report(&p, &set, &exact.u, &exact.multipliers, None).unwrap();
        assert!(rep.stationarity <= 1e-8, "{rep:?}");
        assert!(rep.complementarity.abs() <= 1e-8);
        assert!(rep.primal_feasibility <= 1e-9);
        let (f, _) = saa_objective(&p, &set, &exact.u).unwrap();
        let w1 = w1_on_line(p.positions().unwrap(), p.marginals().0, p.marginals().1);
        assert!((f - (2.0 * p.radius() - w1)).abs() <= 1e-9);
    }

    #[test]
    fn gradient_is_exact() {
        let p = KantorovichProgram::from_config(&KantorovichConfig::default()).unwrap();
        let set = ScenarioSet::from_scenarios(vec![Pair { a: 0, b: 3 }, Pair { a: 2, b: 2 }], 0)
            .unwrap();
        let u: Vec<f64> = (0..10).map(|i| 0.1 * i as f64 - 0.4).collect();
        assert!(check_gradient(|u: &[f64]| saa_objective(&p, &set, u), &u, 1e-3).unwrap() <= 1e-10);
    }
}
