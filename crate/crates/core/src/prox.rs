//! Proximal gradient with backtracking for `min f(u) + ψ(u)`, where `f` is
//! smooth and `ψ` is a [`Regularizer`] with an exact prox.
//!
//! Stationarity is measured by the prox-gradient fixed-point residual
//! `‖u − prox_{tψ}(u − t∇f(u))‖ / t`, which vanishes exactly at composite
//! stationary points.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, dot, norm, norm_inf};
use crate::regularizer::Regularizer;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// FISTA-style extrapolation with a monotone restart safeguard.
    pub accelerate: bool,
    /// Overrides the power-iteration step estimate.
    pub initial_step: Option<f64>,
    /// Keep one [`TraceRow`] per iteration.
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 10_000,
            accelerate: false,
            initial_step: None,
            record_trace: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub residual: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub u_star: Vec<f64>,
    /// `f(u*) + ψ(u*)`
    pub objective: f64,
    /// Prox-gradient residual at `u*` with `t = step_size_final`.
    pub prox_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub step_size_final: f64,
    pub wall_time_ms: f64,
    pub trace: Vec<TraceRow>,
}

const MAX_HALVINGS: usize = 80;
const POWER_ITERATIONS: usize = 8;

/// Estimates the local curvature of `f` at `x` by power iteration on
/// finite-difference Hessian-vector products; returns `1/L̂` or 1.0.
fn initial_step<F>(smooth: &mut F, x: &[f64], grad: &[f64]) -> f64
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x.len();
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i * 7 + 3) % 11) as f64 / 11.0)
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|c| *c /= nv);
    let eps = 1e-6 * (1.0 + norm_inf(x));
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let probe: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
        let Ok((_, gp)) = smooth(&probe) else {
            return 1.0;
        };
        let hv: Vec<f64> = gp.iter().zip(grad).map(|(a, b)| (a - b) / eps).collect();
        let nh = norm(&hv);
        if !nh.is_finite() || nh == 0.0 {
            break;
        }
        estimate = nh;
        v = hv.iter().map(|c| c / nh).collect();
    }
    if estimate > 0.0 && estimate.is_finite() {
        1.0 / estimate
    } else {
        1.0
    }
}

struct Step {
    point: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    t: f64,
}

/// One backtracked prox-gradient step from `y`. Halves `t` until
/// `f(y⁺) ≤ f(y) + ⟨∇f(y), y⁺ − y⟩ + ‖y⁺ − y‖² / (2t)`.
fn prox_step<F>(
    smooth: &mut F,
    reg: &Regularizer,
    y: &[f64],
    fy: f64,
    gy: &[f64],
    mut t: f64,
) -> Result<Option<Step>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    for _ in 0..MAX_HALVINGS {
        let trial: Vec<f64> = y.iter().zip(gy).map(|(a, g)| a - t * g).collect();
        let cand = reg.prox(&trial, t)?;
        let (fc, gc) = smooth(&cand)?;
        if !fc.is_finite() {
            return Err(Error::NonFinite("smooth objective during line search"));
        }
        let d: Vec<f64> = cand.iter().zip(y).map(|(a, b)| a - b).collect();
        let model = fy + dot(gy, &d) + dot(&d, &d) / (2.0 * t);
        if fc <= model + 1e-14 * fy.abs().max(1.0) {
            return Ok(Some(Step {
                point: cand,
                value: fc,
                grad: gc,
                t,
            }));
        }
        t *= 0.5;
    }
    Ok(None)
}

/// Minimizes `f + ψ` from `u0` (projected onto `dom ψ` first).
///
/// Stops once the prox-gradient residual is at most `opts.tol`; hitting
/// `max_iter` returns with `converged = false`. Accepted iterates never
/// increase `f + ψ`.
pub fn solve_composite<F>(
    mut smooth: F,
    reg: &Regularizer,
    u0: &[f64],
    opts: &SolverOptions,
) -> Result<SolveResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("solver tolerance must be positive"));
    }
    let start = Instant::now();
    let mut x = if reg.contains(u0) {
        u0.to_vec()
    } else {
        reg.project(u0)?
    };
    let (mut fx, mut gx) = smooth(&x)?;
    if !fx.is_finite() {
        return Err(Error::NonFinite("smooth objective at the initial point"));
    }
    let mut t = match opts.initial_step {
        Some(t) if t > 0.0 => t,
        _ => initial_step(&mut smooth, &x, &gx),
    };
    let mut trace = Vec::new();
    let mut x_prev = x.clone();
    let mut theta = 1.0_f64;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        // plain step from x: gives the residual at x and the fallback iterate
        let Some(plain) = prox_step(&mut smooth, reg, &x, fx, &gx, t)? else {
            break;
        };
        t = plain.t;
        residual = dist(&x, &plain.point) / t;
        if opts.record_trace {
            trace.push(TraceRow {
                iteration: iterations,
                objective: fx + reg.value(&x),
                residual,
                step: t,
            });
        }
        if residual <= opts.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut next = plain;
        if opts.accelerate {
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let momentum = (theta - 1.0) / theta_next;
            if momentum > 0.0 {
                let y: Vec<f64> = x
                    .iter()
                    .zip(&x_prev)
                    .map(|(a, b)| a + momentum * (a - b))
                    .collect();
                if let Ok((fy, gy)) = smooth(&y) {
                    if fy.is_finite() {
                        if let Some(acc) = prox_step(&mut smooth, reg, &y, fy, &gy, t)? {
                            if acc.value + reg.value(&acc.point) <= next.value + reg.value(&next.point) {
                                next = acc;
                            }
                        }
                    }
                }
            }
            let before = fx + reg.value(&x);
            if next.value + reg.value(&next.point) > before {
                theta = 1.0;
            } else {
                theta = theta_next;
            }
        }
        t = next.t;
        x_prev = std::mem::replace(&mut x, next.point);
        fx = next.value;
        gx = next.grad;
    }

    Ok(SolveResult {
        objective: fx + reg.value(&x),
        u_star: x,
        prox_residual: residual,
        iterations,
        converged,
        step_size_final: t,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        trace,
    })
}

/// Worst discrepancy between the analytic gradient and central differences,
/// relative to the largest gradient component.
pub fn check_gradient<F>(mut f: F, u: &[f64], step: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let (_, g) = f(u)?;
    let mut fd = vec![0.0; u.len()];
    let mut probe = u.to_vec();
    for i in 0..u.len() {
        probe[i] = u[i] + step;
        let (fp, _) = f(&probe)?;
        probe[i] = u[i] - step;
        let (fm, _) = f(&probe)?;
        probe[i] = u[i];
        fd[i] = (fp - fm) / (2.0 * step);
    }
    let scale = norm_inf(&g).max(norm_inf(&fd));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let worst = g
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(worst / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quadratic(a: Vec<Vec<f64>>, b: Vec<f64>) -> impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)> {
        move |u: &[f64]| {
            let au: Vec<f64> = a.iter().map(|row| dot(row, u)).collect();
            let v = 0.5 * dot(u, &au) - dot(&b, u);
            Ok((v, au.iter().zip(&b).map(|(x, y)| x - y).collect()))
        }
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<Vec<f64>> {
        let m: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n).map(|k| m[k][i] * m[k][j]).sum::<f64>()
                            + if i == j { shift } else { 0.0 }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn interior_minimum_is_found() {
        let c = vec![0.3, -0.7, 1.1];
        let cc = c.clone();
        let f = move |u: &[f64]| {
            let d: Vec<f64> = u.iter().zip(&cc).map(|(a, b)| a - b).collect();
            Ok((0.5 * dot(&d, &d), d))
        };
        let reg = Regularizer::boxed(vec![-2.0; 3], vec![2.0; 3], 0.0).unwrap();
        let r = solve_composite(f, &reg, &[1.9, 1.9, -1.9], &SolverOptions::default()).unwrap();
        assert!(r.converged);
        assert!(dist(&r.u_star, &c) <= 1e-8);
    }

    #[test]
    fn active_bound_is_found() {
        let f = |u: &[f64]| Ok((0.5 * u[0] * u[0], vec![u[0]]));
        let reg = Regularizer::boxed(vec![1.0], vec![2.0], 0.0).unwrap();
        let r = solve_composite(f, &reg, &[1.7], &SolverOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.u_star[0] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_gradient_at_feasible_start_returns_immediately() {
        let f = |u: &[f64]| Ok((0.5 * u[0] * u[0], vec![u[0]]));
        let reg = Regularizer::ball(1.0).unwrap();
        let r = solve_composite(f, &reg, &[0.0], &SolverOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.prox_residual, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn matches_long_projected_gradient_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let n = 5;
            let a = random_spd(&mut rng, n, 0.5);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let reg = Regularizer::ball(0.7).unwrap();
            let opts = SolverOptions {
                tol: 1e-11,
                ..Default::default()
            };
            let r = solve_composite(quadratic(a.clone(), b.clone()), &reg, &vec![0.0; n], &opts)
                .unwrap();
            assert!(r.converged);
            // oracle: fixed-step projected gradient with step 1/‖A‖_F for 10× the iterations
            let lf = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
            let mut x = vec![0.0; n];
            for _ in 0..10 * r.iterations.max(100) {
                let g: Vec<f64> = a.iter().zip(&b).map(|(row, bi)| dot(row, &x) - bi).collect();
                let y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - gi / lf).collect();
                x = reg.project(&y).unwrap();
            }
            assert!(dist(&x, &r.u_star) <= 1e-6, "{:?} vs {:?}", x, r.u_star);
        }
    }

    #[test]
    fn accepted_iterates_are_monotone_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(&mut rng, 6, 0.1);
        let b: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
        for accelerate in [false, true] {
            let reg = Regularizer::boxed(vec![-0.5; 6], vec![0.5; 6], 0.2).unwrap();
            let opts = SolverOptions {
                tol: 1e-10,
                accelerate,
                record_trace: true,
                ..Default::default()
            };
            let r = solve_composite(quadratic(a.clone(), b.clone()), &reg, &[0.4; 6], &opts).unwrap();
            assert!(r.converged);
            assert!(reg.contains(&r.u_star));
            for w in r.trace.windows(2) {
                assert!(w[1].objective <= w[0].objective + 1e-13);
            }
        }
    }

    #[test]
    fn strongly_convex_error_decays_geometrically() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..3 {
            let n = 4;
            let a = random_spd(&mut rng, n, 1.0);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let reg = Regularizer::ball(1.0).unwrap();
            let tight = SolverOptions {
                tol: 1e-13,
                ..Default::default()
            };
            let oracle = solve_composite(quadratic(a.clone(), b.clone()), &reg, &[0.0; 4], &tight)
                .unwrap()
                .u_star;
            let mut errs = Vec::new();
            for k in [5usize, 10, 15, 20] {
                let opts = SolverOptions {
                    tol: 1e-300,
                    max_iter: k,
                    ..Default::default()
                };
                let r = solve_composite(quadratic(a.clone(), b.clone()), &reg, &[0.0; 4], &opts)
                    .unwrap();
                errs.push(dist(&r.u_star, &oracle).max(1e-300).ln());
            }
            let ks = [5.0, 10.0, 15.0, 20.0];
            let slope = crate::linalg::fit_slope(&ks, &errs);
            assert!(slope < -0.05, "log-error slope {slope}");
        }
    }

    #[test]
    fn deterministic_given_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(&mut rng, 3, 0.2);
        let b = vec![1.0, -1.0, 0.5];
        let reg = Regularizer::ball(0.5).unwrap();
        let opts = SolverOptions::default();
        let r1 = solve_composite(quadratic(a.clone(), b.clone()), &reg, &[0.1; 3], &opts).unwrap();
        let r2 = solve_composite(quadratic(a, b), &reg, &[0.1; 3], &opts).unwrap();
        assert_eq!(r1.u_star, r2.u_star);
        assert_eq!(r1.iterations, r2.iterations);
    }

    #[test]
    fn non_finite_objective_is_a_numerical_error() {
        let f = |u: &[f64]| {
            if u[0] < 0.5 {
                Ok((f64::NAN, vec![1.0]))
            } else {
                Ok((u[0], vec![1.0]))
            }
        };
        let reg = Regularizer::boxed(vec![-1.0], vec![1.0], 0.0).unwrap();
        let err = solve_composite(f, &reg, &[1.0], &SolverOptions {
            initial_step: Some(1.0),
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn gradient_check_linear_and_quadratic() {
        let a = [1.0, -2.0, 0.5];
        let lin = |u: &[f64]| Ok((dot(&a, u), a.to_vec()));
        assert!(check_gradient(lin, &[0.25, 0.5, -1.0], 0.5).unwrap() <= 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_spd(&mut rng, 4, 0.0);
        let q = quadratic(m, vec![0.0; 4]);
        let u: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert!(check_gradient(q, &u, 1e-5).unwrap() <= 1e-9);

        let wrong = |u: &[f64]| Ok((u[0] * u[0], vec![u[0]]));
        assert!(check_gradient(wrong, &[1.0], 1e-6).unwrap() > 0.4);
        assert!(check_gradient(lin, &[0.0; 3], 0.0).is_err());
    }
}
