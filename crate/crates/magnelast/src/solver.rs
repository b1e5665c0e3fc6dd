//! Limited-memory BFGS with Armijo backtracking.
//!
//! The implementation follows the standard two-loop recursion (Nocedal and
//! Wright, Numerical Optimization, ch. 7) with the initial Hessian scaled by
//! the most recent curvature pair. Objectives may return `+inf` outside
//! their admissible set; infinite trial points are simply rejected by the
//! line search, so constraint handling needs no projections.

use std::collections::VecDeque;
use thiserror::Error;

/// A smooth objective with exact gradient. `eval` writes the gradient into
/// `grad` and returns the value; a non-finite value marks an inadmissible
/// point (its gradient is ignored).
pub trait Objective {
    type Error;

    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64, Self::Error>;
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Convergence threshold on the max-norm of the gradient.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of curvature pairs retained.
    pub memory: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 5000,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverStats {
    pub iterations: usize,
    pub evaluations: usize,
    pub final_value: f64,
    pub final_grad_norm: f64,
    /// Objective value after each accepted step, starting at the initial
    /// point. Monotone decreasing by construction.
    pub energy_trace: Vec<f64>,
    pub converged: bool,
    pub line_search_failed: bool,
}

#[derive(Debug, Error)]
pub enum SolverError<E> {
    #[error("objective is not finite at the starting point")]
    InadmissibleStart,
    #[error("objective evaluation failed")]
    Objective(#[source] E),
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const CURVATURE_GUARD: f64 = 1e-12;

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Search direction `-H g` from the two-loop recursion.
fn two_loop(g: &[f64], pairs: &VecDeque<Pair>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for p in pairs.iter().rev() {
        let alpha = p.rho * dot(&p.s, &q);
        for (qk, yk) in q.iter_mut().zip(&p.y) {
            *qk -= alpha * yk;
        }
        alphas.push(alpha);
    }
    if let Some(last) = pairs.back() {
        let yy = dot(&last.y, &last.y);
        if yy > 0.0 {
            let gamma = 1.0 / (last.rho * yy);
            for qk in q.iter_mut() {
                *qk *= gamma;
            }
        }
    }
    for (p, alpha) in pairs.iter().zip(alphas.iter().rev()) {
        let beta = p.rho * dot(&p.y, &q);
        for (qk, sk) in q.iter_mut().zip(&p.s) {
            *qk += (alpha - beta) * sk;
        }
    }
    for qk in q.iter_mut() {
        *qk = -*qk;
    }
    q
}

/// Minimize `obj` from `x0`. Returns the best point and run statistics;
/// `stats.converged` records whether the gradient tolerance was met before
/// the iteration or line-search budget ran out.
pub fn minimize<O: Objective>(
    obj: &mut O,
    x0: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolverStats), SolverError<O::Error>> {
    assert!(opts.memory >= 1 && opts.tol > 0.0);
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut evaluations = 1;
    let mut value = obj.eval(&x, &mut g).map_err(SolverError::Objective)?;
    if !value.is_finite() {
        return Err(SolverError::InadmissibleStart);
    }
    let mut trace = vec![value];
    let mut pairs: VecDeque<Pair> = VecDeque::new();
    let mut gt = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut line_search_failed = false;

    loop {
        if inf_norm(&g) <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let mut d = two_loop(&g, &pairs);
        let mut slope = dot(&d, &g);
        if !(slope < -1e-14 * norm(&d) * norm(&g)) {
            // not a reliable descent direction: restart from steepest descent
            pairs.clear();
            d = g.iter().map(|gk| -gk).collect();
            slope = dot(&d, &g);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(xk, dk)| xk + t * dk).collect();
            evaluations += 1;
            let ft = obj.eval(&xt, &mut gt).map_err(SolverError::Objective)?;
            if ft.is_finite() && ft <= value + ARMIJO_C1 * t * slope {
                accepted = Some((xt, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((xt, ft)) = accepted else {
            if !pairs.is_empty() {
                // a stale quasi-Newton direction can defeat backtracking on
                // objectives with tiny jumps; retry once along -g before
                // giving up (next failure finds the history empty and stops)
                pairs.clear();
                continue;
            }
            line_search_failed = true;
            break;
        };

        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > CURVATURE_GUARD * norm(&s) * norm(&y) {
            pairs.push_back(Pair {
                rho: 1.0 / sy,
                s,
                y,
            });
            if pairs.len() > opts.memory {
                pairs.pop_front();
            }
        }
        x = xt;
        std::mem::swap(&mut g, &mut gt);
        value = ft;
        trace.push(value);
        iterations += 1;
    }

    let stats = SolverStats {
        iterations,
        evaluations,
        final_value: value,
        final_grad_norm: inf_norm(&g),
        energy_trace: trace,
        converged,
        line_search_failed,
    };
    Ok((x, stats))
}
