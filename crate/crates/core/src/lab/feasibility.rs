//! Sample sizes for ε-feasibility from covering numbers, and Monte Carlo
//! certification of the resulting SAA solutions.
//!
//! With `N ≥ (1/ε)(ln(1/δ) + ln 𝒩(ρ/(2L), B(dom ψ)))`, every SAA-feasible
//! point is, with probability at least `1 − δ`, in
//! `𝒰_ε(ρ) = {u : P(dist(G(u,ξ), K) ≤ ρ) ≥ 1 − ε}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::solve::{solve_saa_oracle, OracleConfig};
use crate::linalg::dist;
use crate::program::{draw_scenarios, sub_seed, validation_estimate, StochasticProgram};

/// `⌈(1/ε)(ln(1/δ) + ln Q)⌉`
pub fn sample_size_for_feasibility(epsilon: f64, delta: f64, q: usize) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("ε must lie in (0, 1)"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("δ must lie in (0, 1)"));
    }
    if q == 0 {
        return Err(Error::invalid("covering number must be at least 1"));
    }
    let bound = ((1.0 / delta).ln() + (q as f64).ln()) / epsilon;
    Ok((bound.ceil() as usize).max(1))
}

/// Size of a greedy farthest-point ν-net of `points`: an upper bound on the
/// ν-covering number of the sampled set. The traversal is run from several
/// starting points (nearest to and farthest from the centroid, plus evenly
/// spaced indices) and the smallest net is kept.
pub fn greedy_covering_number(points: &[Vec<f64>], nu: f64) -> Result<usize> {
    if !(nu > 0.0) {
        return Err(Error::invalid("covering radius ν must be positive"));
    }
    let Some(first) = points.first() else {
        return Err(Error::invalid("need at least one point to cover"));
    };
    let d = first.len();
    for p in points {
        crate::error::check_len("covering point", d, p.len())?;
    }
    let mut centroid = vec![0.0; d];
    for p in points {
        crate::linalg::axpy(1.0 / points.len() as f64, p, &mut centroid);
    }
    let to_centroid: Vec<f64> = points.iter().map(|p| dist(p, &centroid)).collect();
    let argmin = (0..points.len())
        .min_by(|&a, &b| to_centroid[a].total_cmp(&to_centroid[b]))
        .expect("nonempty");
    let argmax = (0..points.len())
        .max_by(|&a, &b| to_centroid[a].total_cmp(&to_centroid[b]))
        .expect("nonempty");
    let mut starts = vec![argmin, argmax];
    for k in 0..GREEDY_EXTRA_STARTS {
        starts.push(k * points.len() / GREEDY_EXTRA_STARTS);
    }
    starts.dedup();
    let mut best = usize::MAX;
    for s in starts {
        if best == 1 {
            break;
        }
        if let Some(q) = farthest_point_net(points, s, nu, best) {
            best = best.min(q);
        }
    }
    Ok(best)
}

const GREEDY_EXTRA_STARTS: usize = 8;

/// Net size from `start`, or `None` once it reaches `cap` centers.
fn farthest_point_net(points: &[Vec<f64>], start: usize, nu: f64, cap: usize) -> Option<usize> {
    let mut nearest: Vec<f64> = points.par_iter().map(|p| dist(p, &points[start])).collect();
    let mut centers = 1;
    loop {
        let (far, gap) = nearest
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, g)| (i, *g))
            .expect("nonempty");
        if gap <= nu {
            return Some(centers);
        }
        centers += 1;
        if centers >= cap {
            return None;
        }
        let c = &points[far];
        nearest
            .par_iter_mut()
            .zip(points.par_iter())
            .for_each(|(n, p)| *n = n.min(dist(p, c)));
    }
}

fn primes(count: usize) -> Vec<u64> {
    let mut ps = Vec::with_capacity(count);
    let mut k = 2u64;
    while ps.len() < count {
        if ps.iter().take_while(|p| *p * *p <= k).all(|p| k % p != 0) {
            ps.push(k);
        }
        k += 1;
    }
    ps
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut x = 0.0;
    while i > 0 {
        x += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    x
}

/// Randomly shifted Halton points in `[0,1)^dims`.
pub fn halton(count: usize, dims: usize, seed: u64) -> Vec<Vec<f64>> {
    let bases = primes(dims);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dims).map(|_| rng.random()).collect();
    (1..=count as u64)
        .map(|i| {
            bases
                .iter()
                .zip(&shift)
                .map(|(b, s)| (radical_inverse(i, *b) + s).fract())
                .collect()
        })
        .collect()
}

/// Observation-space images `B u` of quasi-random points of `dom ψ`.
pub fn domain_image_sample<P: StochasticProgram>(program: &P, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = program.dim();
    halton(count, n + 1, seed)
        .iter()
        .map(|c| Ok(program.observe(&program.regularizer().from_unit_cube(n, c)?)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    pub epsilon: f64,
    pub rho: f64,
    pub delta: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub domain_samples: usize,
    pub validation_samples: usize,
    /// Lipschitz constant of `𝒢(·,ξ)`; falls back to the program's own bound.
    /// A supplied value for a program without its own bound is reported as
    /// heuristic.
    pub lipschitz: Option<f64>,
    /// Replaces the computed sample size (for negative controls).
    pub n_override: Option<usize>,
    pub oracle: OracleConfig,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            epsilon: 0.1,
            rho: 0.05,
            delta: 0.1,
            trials: 50,
            base_seed: 0,
            domain_samples: 2000,
            validation_samples: 100_000,
            lipschitz: None,
            n_override: None,
            oracle: OracleConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityCertificate {
    pub problem_id: String,
    pub epsilon: f64,
    pub rho: f64,
    pub delta: f64,
    pub lipschitz: f64,
    /// `L_𝒢` came from an estimate or a local bound, not a proven global one.
    pub heuristic: bool,
    pub nu: f64,
    pub covering_number: usize,
    pub required_n: usize,
    pub n_used: usize,
    pub trials: usize,
    pub successes: usize,
    pub empirical_rate: f64,
    /// `1 − δ − 2 √(δ(1 − δ)/trials)`
    pub threshold: f64,
    pub passed: bool,
    /// Per-trial estimates of `P(dist(G(u_N,ξ), K) ≤ ρ)`.
    pub trial_rates: Vec<f64>,
}

pub fn certify_epsilon_feasibility<P: StochasticProgram>(
    program: &P,
    cfg: &CertifyConfig,
) -> Result<FeasibilityCertificate> {
    if cfg.trials < 20 {
        return Err(Error::invalid("certification needs at least 20 trials"));
    }
    if !(cfg.rho > 0.0) {
        return Err(Error::invalid("feasibility radius ρ must be positive"));
    }
    if cfg.domain_samples == 0 || cfg.validation_samples < 2 {
        return Err(Error::invalid("domain and validation sample sizes must be positive"));
    }
    let (lipschitz, heuristic) = match (cfg.lipschitz, program.lipschitz_g()) {
        (Some(l), own) => (l, own.is_none()),
        (None, Some(l)) => (l, false),
        (None, None) => {
            return Err(Error::invalid(format!(
                "program `{}` has no Lipschitz bound for its constraint map; supply one \
                 (certify.lipschitz) or estimate it with estimate_lipschitz_g",
                program.name()
            )))
        }
    };
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::invalid("Lipschitz constant must be positive"));
    }
    let nu = cfg.rho / (2.0 * lipschitz);
    let images = domain_image_sample(program, cfg.domain_samples, sub_seed(cfg.base_seed, 0xC0))?;
    let q = greedy_covering_number(&images, nu)?;
    let required_n = sample_size_for_feasibility(cfg.epsilon, cfg.delta, q)?;
    let n_used = cfg.n_override.unwrap_or(required_n);

    let trial_rates: Vec<f64> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = sub_seed(cfg.base_seed, t + 1);
            let set = draw_scenarios(program, n_used, seed)?;
            let sol = solve_saa_oracle(program, &set, &cfg.oracle)?;
            let val = validation_estimate(
                program,
                &sol.u,
                cfg.validation_samples,
                sub_seed(seed, u64::MAX),
                cfg.rho,
            )?;
            Ok(val.prob_feasible_rho)
        })
        .collect::<Result<_>>()?;
    let successes = trial_rates.iter().filter(|r| **r >= 1.0 - cfg.epsilon).count();
    let empirical_rate = successes as f64 / cfg.trials as f64;
    let threshold =
        1.0 - cfg.delta - 2.0 * (cfg.delta * (1.0 - cfg.delta) / cfg.trials as f64).sqrt();
    Ok(FeasibilityCertificate {
        problem_id: program.name().to_string(),
        epsilon: cfg.epsilon,
        rho: cfg.rho,
        delta: cfg.delta,
        lipschitz,
        heuristic,
        nu,
        covering_number: q,
        required_n,
        n_used,
        trials: cfg.trials,
        successes,
        empirical_rate,
        threshold,
        passed: empirical_rate >= threshold,
        trial_rates,
    })
}
